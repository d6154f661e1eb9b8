#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace navbench {

enum class Block : std::uint8_t { Wall = 0, Floor = 1 };

struct BlockCoord {
    int x = 0; // column
    int y = 0; // row
    auto operator<=>(const BlockCoord&) const = default;
};

/// Block-world grid. Blocks are stored row-major; coordinate (x, y) is
/// column x, row y. Generated mazes live on a cell lattice: cell (i, j)
/// occupies block (2i+1, 2j+1) and corridors sit between adjacent cells.
class Maze {
public:
    static constexpr int kDefaultMaxBlockDim = 1023;

    Maze() = default;
    /// Validates shape: odd dimensions, all-wall border.
    Maze(int block_width, int block_height, std::vector<Block> blocks, std::uint64_t seed = 0);

    int block_width() const noexcept { return width_; }
    int block_height() const noexcept { return height_; }
    int cell_cols() const noexcept { return (width_ - 1) / 2; }
    int cell_rows() const noexcept { return (height_ - 1) / 2; }
    std::uint64_t seed() const noexcept { return seed_; }

    bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    Block at(int x, int y) const noexcept { return blocks_[index(x, y)]; }
    Block at(BlockCoord c) const noexcept { return at(c.x, c.y); }
    /// Out-of-bounds coordinates read as Wall.
    bool is_floor(int x, int y) const noexcept { return in_bounds(x, y) && at(x, y) == Block::Floor; }
    bool is_floor(BlockCoord c) const noexcept { return is_floor(c.x, c.y); }
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    std::span<const Block> blocks() const noexcept { return blocks_; }
    std::vector<BlockCoord> floor_blocks() const;
    std::size_t floor_count() const noexcept;

    /// Equal dimensions and blocks; the seed is ignored.
    bool same_layout(const Maze& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && blocks_ == other.blocks_;
    }
    bool operator==(const Maze&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Block> blocks_;
    std::uint64_t seed_ = 0;
};

/// Recursive backtracker on the cell lattice: depth-first carve with an
/// explicit stack; the next unvisited neighbour is drawn from Rng(seed).
Maze generate_maze(std::uint64_t seed, int cell_cols, int cell_rows,
                   int max_block_dim = Maze::kDefaultMaxBlockDim);

// Floor-graph queries (4-neighbourhood).
std::size_t floor_edge_count(const Maze& maze);
bool is_connected(const Maze& maze);
/// Floor graph is a spanning tree: connected and edges = nodes - 1.
bool is_perfect(const Maze& maze);
/// Floor blocks lying between two lattice cells.
std::size_t corridor_count(const Maze& maze);
/// Floor neighbours of a block in N, E, S, W order.
std::vector<BlockCoord> floor_neighbours(const Maze& maze, BlockCoord c);
/// BFS hop counts from `from`; -1 for walls and unreachable blocks.
std::vector<int> bfs_distance_field(const Maze& maze, BlockCoord from);

inline constexpr std::uint16_t kNoTexture = 0xFFFF;
inline constexpr std::uint16_t kTextureCount = 16;

/// Per-block texture index, dense over the grid. Defined (not kNoTexture)
/// exactly for Wall blocks with at least one Floor 4-neighbour.
struct TextureIds {
    std::vector<std::uint16_t> ids;
    std::uint16_t at(const Maze& maze, int x, int y) const noexcept { return ids[maze.index(x, y)]; }
    bool operator==(const TextureIds&) const = default;
};

bool is_exposed_wall(const Maze& maze, int x, int y);
TextureIds zero_textures(const Maze& maze);
TextureIds assign_textures(const Maze& maze, std::uint64_t texture_seed);

struct MapAnnotations {
    BlockCoord goal;
    std::optional<BlockCoord> spawn; // nullopt when spawns are drawn per respawn
    std::vector<BlockCoord> apples;  // sorted
    TextureIds textures;
    bool operator==(const MapAnnotations&) const = default;
};

struct StageFlags {
    bool goal_static = true;
    bool spawn_static = true;
};

/// Goal/spawn/apple placement. Static placements and apples are a pure
/// function of the map seed; a random goal is drawn from `episode_seed`.
/// A random spawn is left unset and drawn by the environment on each
/// (re)spawn. Textures start all-zero.
MapAnnotations annotate(const Maze& maze, StageFlags flags, int apple_count, std::uint64_t episode_seed);

/// Default apple count: one per six Floor blocks, rounded down.
int default_apple_count(const Maze& maze);

/// Placement of the static goal and static spawn for a map.
BlockCoord static_goal(const Maze& maze);
BlockCoord static_spawn(const Maze& maze);

// Plain-text map format: '#' wall, '.' floor, 'G' goal, 'S' spawn,
// 'A' apple; LF-terminated rows.
struct ParsedMap {
    Maze maze;
    std::optional<BlockCoord> goal;
    std::optional<BlockCoord> spawn;
    std::vector<BlockCoord> apples;

    /// Throws when the text carried no goal.
    MapAnnotations annotations() const;
};

std::string serialize_map(const Maze& maze);
std::string serialize_map(const Maze& maze, const MapAnnotations& annotations);
ParsedMap parse_map(std::string_view text);

/// Two-route planning maps. The spawn sits between the two arms' sentinel
/// blocks; whichever sentinel a traversal crosses first names its arm.
struct PlanningMap {
    std::string name;
    Maze maze;
    BlockCoord spawn;
    BlockCoord goal;
    BlockCoord short_sentinel;
    BlockCoord long_sentinel;

    MapAnnotations annotations() const;
};

PlanningMap square_planning_map();
PlanningMap goal_planning_map();
Maze build_square_map();
Maze build_goal_map();

} // namespace navbench
