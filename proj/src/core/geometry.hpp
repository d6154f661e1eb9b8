#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "maze.hpp"

namespace navbench {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Heading wrapped into [0, 2*pi).
inline double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    if (w >= kTwoPi) w = 0.0;
    return w;
}

/// Continuous agent pose in world units. Heading 0 faces +x; increasing
/// heading turns toward +y (RotateLeft).
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
    bool operator==(const Pose&) const = default;
};

enum class Action : std::uint8_t { Forward = 0, Backward = 1, RotateLeft = 2, RotateRight = 3 };
inline constexpr int kActionCount = 4;

inline constexpr std::array<std::string_view, kActionCount> kActionNames{"forward", "backward", "rotate_left",
                                                                         "rotate_right"};

inline double distance(double ax, double ay, double bx, double by) { return std::hypot(ax - bx, ay - by); }

inline BlockCoord block_of(double x, double y, double block_size) {
    return {static_cast<int>(std::floor(x / block_size)), static_cast<int>(std::floor(y / block_size))};
}

inline std::array<double, 2> block_center(BlockCoord c, double block_size) {
    return {(c.x + 0.5) * block_size, (c.y + 0.5) * block_size};
}

} // namespace navbench
