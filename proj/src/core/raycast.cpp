#include "raycast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace navbench {
namespace {

constexpr std::array<double, 3> kCeiling{0.55, 0.60, 0.70};
constexpr std::array<double, 3> kFloor{0.36, 0.31, 0.26};
constexpr std::array<double, 3> kGoalColor{1.0, 0.55, 0.0};
constexpr std::array<double, 3> kAppleColor{0.18, 0.55, 0.34};
constexpr double kGoalAlpha = 0.7;

// Base colours for the procedural wall patterns.
constexpr std::array<std::array<double, 3>, kTextureCount> kPalette{{
    {0.80, 0.80, 0.80}, {0.85, 0.35, 0.30}, {0.30, 0.55, 0.85}, {0.90, 0.80, 0.30},
    {0.55, 0.35, 0.70}, {0.35, 0.70, 0.65}, {0.75, 0.50, 0.30}, {0.50, 0.75, 0.35},
    {0.95, 0.60, 0.75}, {0.40, 0.40, 0.55}, {0.65, 0.65, 0.40}, {0.30, 0.45, 0.40},
    {0.85, 0.55, 0.55}, {0.55, 0.60, 0.90}, {0.70, 0.40, 0.45}, {0.60, 0.85, 0.80},
}};

std::array<double, 3> wall_color(std::uint16_t texture, double u, double perp, double block_size) {
    const auto& base = kPalette[texture % kTextureCount];
    const int stripes = 1 + texture % 4;
    // cos() keeps the pattern mirror-symmetric about the face centre.
    const double pattern = 0.75 + 0.25 * std::cos(kTwoPi * stripes * u);
    const double shade = 1.0 / (1.0 + perp / block_size);
    return {base[0] * pattern * shade, base[1] * pattern * shade, base[2] * pattern * shade};
}

} // namespace

void RenderConfig::validate() const {
    if (!(fov > 0.0) || !(fov < std::numbers::pi)) {
        fail(ErrorKind::InvalidArgument, "field of view must lie in (0, pi), got " + std::to_string(fov));
    }
    if (width < 1 || height < 1) fail(ErrorKind::InvalidArgument, "render dimensions must be positive");
    if (!(block_size > 0.0)) fail(ErrorKind::InvalidArgument, "block size must be positive");
}

RayHit cast_ray(const Maze& maze, double block_size, double x, double y, double dx, double dy,
                std::optional<BlockCoord> goal) {
    int map_x = static_cast<int>(std::floor(x / block_size));
    int map_y = static_cast<int>(std::floor(y / block_size));
    const int map_x0 = map_x, map_y0 = map_y;
    // Offsets inside the starting block; everything below is relative to it.
    const double fx = x - map_x0 * block_size;
    const double fy = y - map_y0 * block_size;
    const double inf = std::numeric_limits<double>::infinity();
    const double delta_x = dx == 0.0 ? inf : std::abs(block_size / dx);
    const double delta_y = dy == 0.0 ? inf : std::abs(block_size / dy);
    const int step_x = dx < 0.0 ? -1 : 1;
    const int step_y = dy < 0.0 ? -1 : 1;
    // Boundary offsets are formed in world units so that whole-block
    // translations of the scene leave them bit-identical.
    double side_x = dx == 0.0 ? inf : dx < 0.0 ? fx / -dx : (block_size - fx) / dx;
    double side_y = dy == 0.0 ? inf : dy < 0.0 ? fy / -dy : (block_size - fy) / dy;

    RayHit hit;
    if (goal && goal->x == map_x && goal->y == map_y) hit.goal_entry = 0.0;
    bool x_side = false;
    for (;;) {
        double entered;
        if (side_x < side_y) {
            entered = side_x;
            side_x += delta_x;
            map_x += step_x;
            x_side = true;
        } else {
            entered = side_y;
            side_y += delta_y;
            map_y += step_y;
            x_side = false;
        }
        if (!maze.is_floor(map_x, map_y)) {
            hit.perp = entered;
            break;
        }
        if (goal && hit.goal_entry < 0.0 && goal->x == map_x && goal->y == map_y) hit.goal_entry = entered;
    }
    hit.block = {map_x, map_y};
    hit.x_side = x_side;
    const double along = x_side ? fy + hit.perp * dy : fx + hit.perp * dx;
    const double origin = (x_side ? map_y - map_y0 : map_x - map_x0) * block_size;
    hit.wall_u = std::clamp((along - origin) / block_size, 0.0, std::nextafter(1.0, 0.0));
    return hit;
}

std::array<double, 2> column_ray(const Pose& pose, int column, int width, double fov) {
    const double dir_x = std::cos(pose.heading);
    const double dir_y = std::sin(pose.heading);
    const double half = std::tan(fov / 2.0);
    const double cam = (2.0 * column + 1.0) / width - 1.0; // -1 at the left edge, +1 at the right
    // The right-hand side of the view is the heading rotated by -90 degrees.
    return {dir_x + dir_y * half * cam, dir_y - dir_x * half * cam};
}

int slice_height(int image_height, double block_size, double perp) {
    if (!(perp > 0.0)) return image_height;
    const double h = std::round(image_height * block_size / perp);
    return h >= image_height ? image_height : static_cast<int>(h);
}

Image render(const Maze& maze, const TextureIds& textures, const Pose& pose, const RenderConfig& config,
             const SceneMarkers& markers) {
    config.validate();
    const int w = config.width;
    const int h = config.height;
    const double block = config.block_size;
    Image img(w, h);

    std::vector<char> apple_at;
    if (!markers.apples.empty()) {
        apple_at.assign(maze.blocks().size(), 0);
        for (const BlockCoord a : markers.apples) apple_at[maze.index(a.x, a.y)] = 1;
    }

    const BlockCoord base = block_of(pose.x, pose.y, block);
    const double ox = pose.x - base.x * block;
    const double oy = pose.y - base.y * block;

    for (int col = 0; col < w; ++col) {
        const auto [rx, ry] = column_ray(pose, col, w, config.fov);
        const RayHit hit = cast_ray(maze, block, pose.x, pose.y, rx, ry, markers.goal);
        const int slice = slice_height(h, block, hit.perp);
        const int top = (h - slice) / 2;
        const int bottom = top + slice;
        const auto wall = wall_color(textures.at(maze, hit.block.x, hit.block.y), hit.wall_u, hit.perp, block);

        for (int row = 0; row < h; ++row) {
            std::array<double, 3> c;
            if (row < top) {
                c = kCeiling;
            } else if (row < bottom) {
                c = wall;
            } else {
                c = kFloor;
                // Floor casting only for marker blocks.
                const double offset = row + 0.5 - h / 2.0;
                if (offset > 0.0 && (!apple_at.empty() || markers.goal)) {
                    const double d = h * block / (2.0 * offset);
                    const BlockCoord rel = block_of(ox + d * rx, oy + d * ry, block);
                    const BlockCoord fb{base.x + rel.x, base.y + rel.y};
                    if (maze.in_bounds(fb.x, fb.y)) {
                        if (!apple_at.empty() && apple_at[maze.index(fb.x, fb.y)]) c = kAppleColor;
                        else if (markers.goal && fb == *markers.goal) c = kGoalColor;
                    }
                }
            }
            for (int ch = 0; ch < 3; ++ch) img.at(ch, row, col) = c[static_cast<std::size_t>(ch)];
        }

        if (hit.goal_entry >= 0.0) {
            // Full-height translucent goal marker on the block's near face.
            const int mslice = slice_height(h, block, hit.goal_entry);
            const int mtop = (h - mslice) / 2;
            for (int row = mtop; row < mtop + mslice; ++row) {
                for (int ch = 0; ch < 3; ++ch) {
                    double& v = img.at(ch, row, col);
                    v = (1.0 - kGoalAlpha) * v + kGoalAlpha * kGoalColor[static_cast<std::size_t>(ch)];
                }
            }
        }
    }
    return img;
}

DepthBuckets::DepthBuckets(double near, double far, int count) {
    if (!(near > 0.0) || !(far > near) || count < 1) {
        fail(ErrorKind::InvalidArgument, "depth buckets need 0 < near < far and count >= 1");
    }
    edges_.resize(static_cast<std::size_t>(count) + 1);
    for (int k = 0; k <= count; ++k) {
        edges_[static_cast<std::size_t>(k)] = near * std::pow(far / near, static_cast<double>(k) / count);
    }
}

DepthBuckets DepthBuckets::for_maze(const Maze& maze, double block_size, double agent_radius, int count) {
    const double diag = std::hypot(maze.block_width(), maze.block_height()) * block_size;
    return DepthBuckets(agent_radius, diag, count);
}

int DepthBuckets::bucket(double depth) const noexcept {
    // Edges are increasing; depths outside [near, far) clamp to the end classes.
    const auto it = std::upper_bound(edges_.begin() + 1, edges_.end() - 1, depth);
    return static_cast<int>(it - (edges_.begin() + 1));
}

DepthVector depth_truth(const Maze& maze, const Pose& pose, int width, double fov, double block_size,
                        const DepthBuckets& buckets) {
    RenderConfig{width, 1, fov, block_size}.validate();
    DepthVector out;
    out.depths.resize(static_cast<std::size_t>(width));
    out.bucketed.resize(static_cast<std::size_t>(width));
    for (int col = 0; col < width; ++col) {
        const auto [rx, ry] = column_ray(pose, col, width, fov);
        const double d = cast_ray(maze, block_size, pose.x, pose.y, rx, ry).perp;
        out.depths[static_cast<std::size_t>(col)] = d;
        out.bucketed[static_cast<std::size_t>(col)] = buckets.bucket(d);
    }
    return out;
}

std::vector<int> grouped_depth_classes(const DepthVector& depth, int groups, const DepthBuckets& buckets) {
    const int w = static_cast<int>(depth.depths.size());
    if (groups < 1 || groups > w) fail(ErrorKind::InvalidArgument, "depth group count must lie in [1, width]");
    std::vector<int> out(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g) {
        const int lo = g * w / groups;
        const int hi = (g + 1) * w / groups;
        double sum = 0.0;
        for (int c = lo; c < hi; ++c) sum += depth.depths[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(g)] = buckets.bucket(sum / (hi - lo));
    }
    return out;
}

int loop_closure_truth(std::span<const std::array<double, 2>> prefix, std::array<double, 2> current,
                       const LoopClosureParams& params) {
    const auto t = static_cast<std::ptrdiff_t>(prefix.size());
    for (std::ptrdiff_t tp = 0; tp <= t - params.min_gap; ++tp) {
        const auto& p = prefix[static_cast<std::size_t>(tp)];
        if (distance(p[0], p[1], current[0], current[1]) < params.radius) return 1;
    }
    return 0;
}

int LoopClosureTracker::push(std::array<double, 2> p) {
    const auto t = static_cast<std::ptrdiff_t>(points_.size());
    const auto cx = static_cast<std::int64_t>(std::floor(p[0] / params_.radius));
    const auto cy = static_cast<std::int64_t>(std::floor(p[1] / params_.radius));
    int label = 0;
    for (std::int64_t ox = -1; ox <= 1 && !label; ++ox) {
        for (std::int64_t oy = -1; oy <= 1 && !label; ++oy) {
            const auto it = cells_.find(cell_key(cx + ox, cy + oy));
            if (it == cells_.end()) continue;
            for (const std::size_t idx : it->second) {
                if (static_cast<std::ptrdiff_t>(idx) > t - params_.min_gap) break; // indices are increasing
                const auto& q = points_[idx];
                if (distance(q[0], q[1], p[0], p[1]) < params_.radius) {
                    label = 1;
                    break;
                }
            }
        }
    }
    cells_[cell_key(cx, cy)].push_back(points_.size());
    points_.push_back(p);
    return label;
}

void LoopClosureTracker::clear() {
    points_.clear();
    cells_.clear();
}

std::string encode_ppm(const Image& image, const std::string& comment) {
    std::string out = "P6\n";
    if (!comment.empty()) out += "# " + comment + "\n";
    out += std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(3 * image.width * image.height));
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
                out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
            }
        }
    }
    return out;
}

} // namespace navbench
