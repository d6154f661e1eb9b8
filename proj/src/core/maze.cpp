#include "maze.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <numeric>
#include <sstream>

#include "error.hpp"
#include "rng.hpp"

namespace navbench {
namespace {

constexpr std::array<BlockCoord, 4> kDirs{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}}; // N E S W

// Seed-stream tags for placements derived from the map seed.
constexpr std::uint64_t kGoalStream = 0x676f616c;   // "goal"
constexpr std::uint64_t kSpawnStream = 0x737061776e; // "spawn"
constexpr std::uint64_t kAppleStream = 0x6170706c65; // "apple"
constexpr std::uint64_t kTextureStream = 0x74657874; // "text"

BlockCoord pick(Rng& rng, const std::vector<BlockCoord>& options) {
    return options[static_cast<std::size_t>(rng.uniform_index(options.size()))];
}

std::vector<BlockCoord> floors_except(const Maze& maze, std::initializer_list<std::optional<BlockCoord>> skip) {
    std::vector<BlockCoord> out;
    for (const BlockCoord c : maze.floor_blocks()) {
        bool skipped = false;
        for (const auto& s : skip) skipped = skipped || (s && *s == c);
        if (!skipped) out.push_back(c);
    }
    return out;
}

} // namespace

Maze::Maze(int block_width, int block_height, std::vector<Block> blocks, std::uint64_t seed)
    : width_(block_width), height_(block_height), blocks_(std::move(blocks)), seed_(seed) {
    if (width_ < 3 || height_ < 3 || width_ % 2 == 0 || height_ % 2 == 0) {
        fail(ErrorKind::InvalidArgument, "maze block dimensions must be odd and >= 3, got " +
                                             std::to_string(width_) + "x" + std::to_string(height_));
    }
    if (blocks_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
        fail(ErrorKind::InvalidArgument, "maze block array does not match its dimensions");
    }
    for (int x = 0; x < width_; ++x) {
        if (at(x, 0) != Block::Wall || at(x, height_ - 1) != Block::Wall) {
            fail(ErrorKind::InvalidArgument, "maze border must be wall (column " + std::to_string(x) + ")");
        }
    }
    for (int y = 0; y < height_; ++y) {
        if (at(0, y) != Block::Wall || at(width_ - 1, y) != Block::Wall) {
            fail(ErrorKind::InvalidArgument, "maze border must be wall (row " + std::to_string(y) + ")");
        }
    }
}

std::vector<BlockCoord> Maze::floor_blocks() const {
    std::vector<BlockCoord> out;
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x)
            if (at(x, y) == Block::Floor) out.push_back({x, y});
    return out;
}

std::size_t Maze::floor_count() const noexcept {
    return static_cast<std::size_t>(std::count(blocks_.begin(), blocks_.end(), Block::Floor));
}

Maze generate_maze(std::uint64_t seed, int cell_cols, int cell_rows, int max_block_dim) {
    if (cell_cols < 1 || cell_rows < 1) {
        fail(ErrorKind::InvalidArgument, "cell dimensions must be positive");
    }
    if (cell_cols > (max_block_dim - 1) / 2 || cell_rows > (max_block_dim - 1) / 2) {
        fail(ErrorKind::InvalidArgument, "maze of " + std::to_string(cell_cols) + "x" + std::to_string(cell_rows) +
                                             " cells exceeds the maximum block dimension " +
                                             std::to_string(max_block_dim));
    }
    const int width = 2 * cell_cols + 1;
    const int height = 2 * cell_rows + 1;
    std::vector<Block> blocks(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), Block::Wall);
    auto block_at = [&](int x, int y) -> Block& {
        return blocks[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    };

    Rng rng(seed);
    std::vector<char> visited(static_cast<std::size_t>(cell_cols) * static_cast<std::size_t>(cell_rows), 0);
    auto visited_at = [&](int i, int j) -> char& {
        return visited[static_cast<std::size_t>(j) * static_cast<std::size_t>(cell_cols) + static_cast<std::size_t>(i)];
    };

    const BlockCoord start{static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cell_cols))),
                           static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cell_rows)))};
    std::vector<BlockCoord> stack{start};
    visited_at(start.x, start.y) = 1;
    block_at(2 * start.x + 1, 2 * start.y + 1) = Block::Floor;

    std::vector<BlockCoord> open;
    open.reserve(4);
    while (!stack.empty()) {
        const BlockCoord cur = stack.back();
        open.clear();
        for (const BlockCoord d : kDirs) {
            const int i = cur.x + d.x;
            const int j = cur.y + d.y;
            if (i >= 0 && j >= 0 && i < cell_cols && j < cell_rows && !visited_at(i, j)) open.push_back({i, j});
        }
        if (open.empty()) {
            stack.pop_back();
            continue;
        }
        const BlockCoord next = open[static_cast<std::size_t>(rng.uniform_index(open.size()))];
        visited_at(next.x, next.y) = 1;
        block_at(2 * next.x + 1, 2 * next.y + 1) = Block::Floor;
        block_at(cur.x + next.x + 1, cur.y + next.y + 1) = Block::Floor; // corridor between the two cells
        stack.push_back(next);
    }
    return Maze(width, height, std::move(blocks), seed);
}

std::vector<BlockCoord> floor_neighbours(const Maze& maze, BlockCoord c) {
    std::vector<BlockCoord> out;
    for (const BlockCoord d : kDirs) {
        const BlockCoord n{c.x + d.x, c.y + d.y};
        if (maze.is_floor(n)) out.push_back(n);
    }
    return out;
}

std::size_t floor_edge_count(const Maze& maze) {
    std::size_t edges = 0;
    for (int y = 0; y < maze.block_height(); ++y) {
        for (int x = 0; x < maze.block_width(); ++x) {
            if (!maze.is_floor(x, y)) continue;
            edges += maze.is_floor(x + 1, y) ? 1 : 0;
            edges += maze.is_floor(x, y + 1) ? 1 : 0;
        }
    }
    return edges;
}

std::vector<int> bfs_distance_field(const Maze& maze, BlockCoord from) {
    std::vector<int> dist(maze.blocks().size(), -1);
    if (!maze.is_floor(from)) return dist;
    std::deque<BlockCoord> queue{from};
    dist[maze.index(from.x, from.y)] = 0;
    while (!queue.empty()) {
        const BlockCoord c = queue.front();
        queue.pop_front();
        const int next = dist[maze.index(c.x, c.y)] + 1;
        for (const BlockCoord d : kDirs) {
            const BlockCoord n{c.x + d.x, c.y + d.y};
            if (!maze.is_floor(n)) continue;
            int& slot = dist[maze.index(n.x, n.y)];
            if (slot < 0) {
                slot = next;
                queue.push_back(n);
            }
        }
    }
    return dist;
}

bool is_connected(const Maze& maze) {
    const auto floors = maze.floor_blocks();
    if (floors.empty()) return true;
    const auto dist = bfs_distance_field(maze, floors.front());
    return std::all_of(floors.begin(), floors.end(),
                       [&](BlockCoord c) { return dist[maze.index(c.x, c.y)] >= 0; });
}

bool is_perfect(const Maze& maze) {
    const std::size_t nodes = maze.floor_count();
    return nodes > 0 && is_connected(maze) && floor_edge_count(maze) == nodes - 1;
}

std::size_t corridor_count(const Maze& maze) {
    std::size_t n = 0;
    for (const BlockCoord c : maze.floor_blocks()) {
        if ((c.x % 2 == 1) != (c.y % 2 == 1)) ++n;
    }
    return n;
}

bool is_exposed_wall(const Maze& maze, int x, int y) {
    if (maze.is_floor(x, y) || !maze.in_bounds(x, y)) return false;
    for (const BlockCoord d : kDirs) {
        if (maze.is_floor(x + d.x, y + d.y)) return true;
    }
    return false;
}

TextureIds zero_textures(const Maze& maze) {
    TextureIds t;
    t.ids.assign(maze.blocks().size(), kNoTexture);
    for (int y = 0; y < maze.block_height(); ++y)
        for (int x = 0; x < maze.block_width(); ++x)
            if (is_exposed_wall(maze, x, y)) t.ids[maze.index(x, y)] = 0;
    return t;
}

TextureIds assign_textures(const Maze& maze, std::uint64_t texture_seed) {
    Rng rng(derive_seed(maze.seed(), kTextureStream, texture_seed));
    TextureIds t;
    t.ids.assign(maze.blocks().size(), kNoTexture);
    for (int y = 0; y < maze.block_height(); ++y)
        for (int x = 0; x < maze.block_width(); ++x)
            if (is_exposed_wall(maze, x, y))
                t.ids[maze.index(x, y)] = static_cast<std::uint16_t>(rng.uniform_index(kTextureCount));
    return t;
}

int default_apple_count(const Maze& maze) { return static_cast<int>(maze.floor_count() / 6); }

BlockCoord static_goal(const Maze& maze) {
    const auto floors = maze.floor_blocks();
    if (floors.size() < 2) fail(ErrorKind::InvalidArgument, "maze needs at least two Floor blocks");
    Rng rng(derive_seed(maze.seed(), kGoalStream));
    return pick(rng, floors);
}

BlockCoord static_spawn(const Maze& maze) {
    const auto options = floors_except(maze, {static_goal(maze)});
    Rng rng(derive_seed(maze.seed(), kSpawnStream));
    return pick(rng, options);
}

MapAnnotations annotate(const Maze& maze, StageFlags flags, int apple_count, std::uint64_t episode_seed) {
    const std::size_t floors = maze.floor_count();
    if (apple_count < 0 || floors < 2 || static_cast<std::size_t>(apple_count) > floors - 2) {
        fail(ErrorKind::InvalidArgument, "insufficient Floor blocks: " + std::to_string(floors) + " floors cannot hold " +
                                             std::to_string(apple_count) + " apples plus goal and spawn");
    }
    MapAnnotations a;
    if (flags.spawn_static) a.spawn = static_spawn(maze);
    if (flags.goal_static) {
        a.goal = static_goal(maze);
    } else {
        Rng rng(derive_seed(episode_seed, kGoalStream));
        a.goal = pick(rng, floors_except(maze, {a.spawn}));
    }

    std::vector<BlockCoord> order = maze.floor_blocks();
    Rng apple_rng(derive_seed(maze.seed(), kAppleStream));
    apple_rng.shuffle(std::span<BlockCoord>(order));
    for (const BlockCoord c : order) {
        if (static_cast<int>(a.apples.size()) == apple_count) break;
        if (c == a.goal || (a.spawn && c == *a.spawn)) continue;
        a.apples.push_back(c);
    }
    std::sort(a.apples.begin(), a.apples.end());
    a.textures = zero_textures(maze);
    return a;
}

std::string serialize_map(const Maze& maze) {
    std::string out;
    out.reserve(static_cast<std::size_t>((maze.block_width() + 1) * maze.block_height()));
    for (int y = 0; y < maze.block_height(); ++y) {
        for (int x = 0; x < maze.block_width(); ++x) out.push_back(maze.is_floor(x, y) ? '.' : '#');
        out.push_back('\n');
    }
    return out;
}

std::string serialize_map(const Maze& maze, const MapAnnotations& annotations) {
    std::string out = serialize_map(maze);
    const auto put = [&](BlockCoord c, char ch) {
        out[static_cast<std::size_t>(c.y) * static_cast<std::size_t>(maze.block_width() + 1) +
            static_cast<std::size_t>(c.x)] = ch;
    };
    for (const BlockCoord c : annotations.apples) put(c, 'A');
    if (annotations.spawn) put(*annotations.spawn, 'S');
    put(annotations.goal, 'G');
    return out;
}

ParsedMap parse_map(std::string_view text) {
    while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.remove_suffix(1);
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back(text.substr(pos, end - pos));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (text.empty()) fail(ErrorKind::Parse, "empty map text");

    std::size_t width = 0;
    for (const auto l : lines) width = std::max(width, l.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].size() != width) {
            fail(ErrorKind::Parse, "line " + std::to_string(i + 1) + ": ragged row of length " +
                                       std::to_string(lines[i].size()) + ", expected " + std::to_string(width));
        }
    }

    ParsedMap out;
    std::vector<Block> blocks;
    blocks.reserve(width * lines.size());
    for (std::size_t y = 0; y < lines.size(); ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const char ch = lines[y][x];
            const BlockCoord c{static_cast<int>(x), static_cast<int>(y)};
            const auto where = "line " + std::to_string(y + 1) + ", column " + std::to_string(x + 1);
            switch (ch) {
            case '#': blocks.push_back(Block::Wall); continue;
            case '.': break;
            case 'G':
                if (out.goal) fail(ErrorKind::Parse, where + ": multiple goals");
                out.goal = c;
                break;
            case 'S':
                if (out.spawn) fail(ErrorKind::Parse, where + ": multiple spawns");
                out.spawn = c;
                break;
            case 'A': out.apples.push_back(c); break;
            default: fail(ErrorKind::Parse, where + ": unknown character '" + std::string(1, ch) + "'");
            }
            blocks.push_back(Block::Floor);
        }
    }
    try {
        out.maze = Maze(static_cast<int>(width), static_cast<int>(lines.size()), std::move(blocks));
    } catch (const Error& e) {
        fail(ErrorKind::Parse, e.what());
    }
    std::sort(out.apples.begin(), out.apples.end());
    return out;
}

MapAnnotations ParsedMap::annotations() const {
    if (!goal) fail(ErrorKind::Parse, "map text has no goal ('G')");
    MapAnnotations a;
    a.goal = *goal;
    a.spawn = spawn;
    a.apples = apples;
    a.textures = zero_textures(maze);
    return a;
}

MapAnnotations PlanningMap::annotations() const {
    MapAnnotations a;
    a.goal = goal;
    a.spawn = spawn;
    a.textures = zero_textures(maze);
    return a;
}

// Square map: a single 16-block ring. The spawn is at the middle of the top
// edge facing +x; the short arm runs east then south to the goal.
PlanningMap square_planning_map() {
    const auto parsed = parse_map("#######\n"
                                  "#..S..#\n"
                                  "#.###.#\n"
                                  "#.###.#\n"
                                  "#.###.#\n"
                                  "#....G#\n"
                                  "#######\n");
    return {"square", parsed.maze, *parsed.spawn, *parsed.goal, {4, 1}, {2, 1}};
}

// Goal map: a dead-end stem leads north into the only junction of a ring;
// the east arm reaches the goal in 6 blocks, the west arm in 14.
PlanningMap goal_planning_map() {
    const auto parsed = parse_map("#########\n"
                                  "#.......#\n"
                                  "#.#####.#\n"
                                  "#.#####G#\n"
                                  "#.#####.#\n"
                                  "#.......#\n"
                                  "###.#####\n"
                                  "###S#####\n"
                                  "#########\n");
    return {"goal", parsed.maze, *parsed.spawn, *parsed.goal, {4, 5}, {2, 5}};
}

Maze build_square_map() { return square_planning_map().maze; }
Maze build_goal_map() { return goal_planning_map().maze; }

} // namespace navbench
