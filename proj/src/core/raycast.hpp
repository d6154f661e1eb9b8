#pragma once

#include <array>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "geometry.hpp"
#include "maze.hpp"

namespace navbench {

struct RenderConfig {
    int width = 42;
    int height = 42;
    double fov = std::numbers::pi / 2.0;
    double block_size = 100.0;

    /// Rejects degenerate fields of view and empty images.
    void validate() const;
};

/// Planar RGB image, channel-major: data[(c * height + y) * width + x].
/// Intensities lie in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(3 * w * h), 0.0) {}
    double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * static_cast<std::size_t>(height) + static_cast<std::size_t>(y)) *
                        static_cast<std::size_t>(width) +
                    static_cast<std::size_t>(x)];
    }
    double at(int c, int y, int x) const { return const_cast<Image*>(this)->at(c, y, x); }
    bool operator==(const Image&) const = default;
};

/// First-person input to the agent.
struct Observation {
    Image image;
    std::array<double, kActionCount> prev_action{}; // one-hot; all zero before the first action
    double prev_reward = 0.0;
};

/// Goal and live apples drawn as flat-coloured markers.
struct SceneMarkers {
    std::optional<BlockCoord> goal;
    std::vector<BlockCoord> apples;
};

struct RayHit {
    double perp = 0.0;  // distance along the view direction (fisheye-corrected)
    BlockCoord block;   // wall block hit
    bool x_side = false; // crossed a vertical grid line (face normal along x)
    double wall_u = 0.0; // hit position along the face in [0, 1)
    double goal_entry = -1.0; // perp distance at which the ray entered the goal block, -1 if never
};

/// Grid DDA from (x, y) along (dx, dy); distances are in units of the
/// direction vector's length. The direction must be nonzero.
RayHit cast_ray(const Maze& maze, double block_size, double x, double y, double dx, double dy,
                std::optional<BlockCoord> goal = std::nullopt);

/// Ray direction for a screen column: the unit heading plus a lateral
/// offset along the camera plane, so distances are perpendicular.
std::array<double, 2> column_ray(const Pose& pose, int column, int width, double fov);

/// Wall slice height in pixels for a perpendicular distance.
int slice_height(int image_height, double block_size, double perp);

Image render(const Maze& maze, const TextureIds& textures, const Pose& pose, const RenderConfig& config,
             const SceneMarkers& markers = {});

/// Geometric depth classes over [near, far].
class DepthBuckets {
public:
    static constexpr int kDefaultCount = 8;
    DepthBuckets(double near, double far, int count = kDefaultCount);
    /// For a maze: near = agent radius, far = maze diagonal.
    static DepthBuckets for_maze(const Maze& maze, double block_size, double agent_radius,
                                 int count = kDefaultCount);

    int count() const noexcept { return static_cast<int>(edges_.size()) - 1; }
    int bucket(double depth) const noexcept;
    const std::vector<double>& edges() const noexcept { return edges_; }

private:
    std::vector<double> edges_;
};

struct DepthVector {
    std::vector<double> depths;
    std::vector<int> bucketed;
};

DepthVector depth_truth(const Maze& maze, const Pose& pose, int width, double fov, double block_size,
                        const DepthBuckets& buckets);

/// Per-group depth classes: the mean depth over each of `groups` equal
/// column ranges, bucketed.
std::vector<int> grouped_depth_classes(const DepthVector& depth, int groups, const DepthBuckets& buckets);

struct LoopClosureParams {
    int min_gap = 30;        // t_min, steps
    double radius = 50.0;    // epsilon_lc, world units
};

/// 1 iff some earlier position at least `min_gap` steps back lies within
/// `radius` of `current`. `prefix` holds positions x_0 .. x_{t-1}.
int loop_closure_truth(std::span<const std::array<double, 2>> prefix, std::array<double, 2> current,
                       const LoopClosureParams& params);

/// Incremental loop-closure labels over a growing trajectory, bucketing
/// positions on a grid of cell size `radius`.
class LoopClosureTracker {
public:
    explicit LoopClosureTracker(LoopClosureParams params) : params_(params) {}

    /// Label for `p` as position x_t, then appends it.
    int push(std::array<double, 2> p);
    void clear();
    std::size_t size() const noexcept { return points_.size(); }

private:
    std::int64_t cell_key(std::int64_t cx, std::int64_t cy) const noexcept { return cx * 1000003 + cy; }

    LoopClosureParams params_;
    std::vector<std::array<double, 2>> points_;
    std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

/// Binary PPM (P6), 8 bits per channel, with an optional comment line.
std::string encode_ppm(const Image& image, const std::string& comment = {});

} // namespace navbench
