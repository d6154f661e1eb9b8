#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "error.hpp"

namespace navbench::oracle {

LatticeAudit audit_lattice(const Maze& maze) {
    const int cols = maze.cell_cols(), rows = maze.cell_rows();
    std::vector<int> parent(static_cast<std::size_t>(cols * rows));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    LatticeAudit audit;
    auto join = [&](int a, int b) {
        ++audit.edges;
        a = find(a);
        b = find(b);
        if (a == b) audit.cycle = true;
        else parent[a] = b;
    };
    for (int j = 0; j < rows; ++j)
        for (int i = 0; i < cols; ++i) {
            if (i + 1 < cols && maze.is_floor(2 * i + 2, 2 * j + 1)) join(j * cols + i, j * cols + i + 1);
            if (j + 1 < rows && maze.is_floor(2 * i + 1, 2 * j + 2)) join(j * cols + i, (j + 1) * cols + i);
        }
    std::set<int> roots;
    for (int k = 0; k < cols * rows; ++k) roots.insert(find(k));
    audit.components = static_cast<int>(roots.size());
    return audit;
}

std::vector<std::vector<int>> floyd_warshall(const Maze& maze) {
    const auto floors = maze.floor_blocks();
    const std::size_t n = floors.size();
    constexpr int inf = 1 << 28;
    std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        d[i][i] = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(floors[i].x - floors[j].x) + std::abs(floors[i].y - floors[j].y) == 1) d[i][j] = 1;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    for (auto& row : d)
        for (auto& v : row)
            if (v >= inf) v = -1;
    return d;
}

namespace {

bool wall_at(const Maze& maze, double block, double px, double py) {
    return !maze.is_floor(static_cast<int>(std::floor(px / block)), static_cast<int>(std::floor(py / block)));
}

// Smallest s in (lo, hi] where pred flips from false to true, to ~1e-12.
template <typename P>
double bisect(double lo, double hi, P pred) {
    for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (pred(mid)) hi = mid;
        else lo = mid;
    }
    return hi;
}

} // namespace

double march_depth(const Maze& maze, double block_size, double x, double y, double dx, double dy, double step) {
    const double len = std::hypot(dx, dy);
    if (!(len > 0.0)) fail(ErrorKind::InvalidArgument, "march_depth: zero direction");
    const double ux = dx / len, uy = dy / len;
    auto at = [&](double s) { return std::array<double, 2>{x + s * ux, y + s * uy}; };
    auto cell = [&](double s) {
        const auto p = at(s);
        return BlockCoord{static_cast<int>(std::floor(p[0] / block_size)),
                          static_cast<int>(std::floor(p[1] / block_size))};
    };
    const double limit = 2.0 * std::hypot(maze.block_width(), maze.block_height()) * block_size;
    double prev = 0.0;
    for (double s = step; s < limit; prev = s, s += step) {
        const BlockCoord a = cell(prev), b = cell(s);
        if (a == b) continue;
        // Crossing parameters for each coordinate that changed.
        std::vector<double> crossings;
        if (a.x != b.x) crossings.push_back(bisect(prev, s, [&](double m) { return cell(m).x != a.x; }));
        if (a.y != b.y) crossings.push_back(bisect(prev, s, [&](double m) { return cell(m).y != a.y; }));
        std::sort(crossings.begin(), crossings.end());
        for (std::size_t k = 0; k < crossings.size(); ++k) {
            const double next = k + 1 < crossings.size() ? crossings[k + 1] : s;
            const double probe = 0.5 * (crossings[k] + next);
            const auto p = at(probe);
            if (wall_at(maze, block_size, p[0], p[1])) return crossings[k] / len;
        }
    }
    fail(ErrorKind::Runtime, "march_depth: ray escaped the maze");
}

std::vector<int> loop_labels_quadratic(std::span<const std::array<double, 2>> positions,
                                       const LoopClosureParams& params) {
    std::vector<int> labels(positions.size(), 0);
    for (std::size_t t = 0; t < positions.size(); ++t)
        for (std::size_t tp = 0; tp + static_cast<std::size_t>(params.min_gap) <= t; ++tp) {
            const double d = std::hypot(positions[t][0] - positions[tp][0], positions[t][1] - positions[tp][1]);
            if (d < params.radius) {
                labels[t] = 1;
                break;
            }
        }
    return labels;
}

GeodesicPilot::GeodesicPilot(const Maze& maze, BlockCoord goal, double block_size, double turn_speed,
                             double forward_speed)
    : maze_(&maze), goal_(goal), block_(block_size), turn_(turn_speed), speed_(forward_speed),
      field_(bfs_distance_field(maze, goal)) {}

Action GeodesicPilot::next(const Pose& pose) {
    if (last_ && std::hypot(pose.x - last_->x, pose.y - last_->y) > speed_ + 1e-6) target_.reset();
    last_ = pose;
    if (target_ && std::hypot(target_->at(0) - pose.x, target_->at(1) - pose.y) < 0.5 * speed_) target_.reset();
    if (!target_) {
        const BlockCoord here = block_of(pose.x, pose.y, block_);
        BlockCoord next = here;
        const int d = field_[maze_->index(here.x, here.y)];
        if (d > 0) {
            for (const BlockCoord nb : floor_neighbours(*maze_, here))
                if (field_[maze_->index(nb.x, nb.y)] == d - 1) {
                    next = nb;
                    break;
                }
        }
        target_ = block_center(next, block_);
    }
    const double want = std::atan2(target_->at(1) - pose.y, target_->at(0) - pose.x);
    double err = std::remainder(want - pose.heading, kTwoPi);
    if (std::abs(err) > 0.5 * turn_ + 1e-9) return err > 0.0 ? Action::RotateLeft : Action::RotateRight;
    return Action::Forward;
}

} // namespace navbench::oracle
