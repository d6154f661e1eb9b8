#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>

#include "error.hpp"
#include "geometry.hpp"
#include "metrics.hpp"

namespace navbench {

SaliencyResult saliency(const AgentConfig& agent, const ParameterSet& params, const TrainConfig& loss_cfg,
                        const Maze& maze, const MapAnnotations& annotations, const EnvConfig& env_cfg,
                        const EpisodeLog& log) {
    loss_cfg.validate();
    if (env_cfg.render.width != agent.width || env_cfg.render.height != agent.height)
        fail(ErrorKind::Mismatch, "saliency: agent and environment frame sizes differ");
    if (!params.same_layout(zero_params(agent)))
        fail(ErrorKind::Mismatch, "saliency: parameters do not match the agent configuration");

    // Replay the logged actions to recover observations and targets.
    Environment env(maze, annotations, env_cfg, log.header.episode_seed);
    const DepthBuckets buckets =
        DepthBuckets::for_maze(maze, env_cfg.block_size(), env_cfg.agent_radius, agent.depth_classes);
    LoopClosureTracker loop{LoopClosureParams{}};
    std::vector<Observation> obs;
    std::vector<std::vector<int>> depth;
    std::vector<int> loop_labels;
    std::vector<double> rewards;
    std::vector<int> actions;
    for (const auto& rec : log.records) {
        if (env.done()) fail(ErrorKind::Mismatch, "saliency: log is longer than the episode");
        const Pose pose = env.pose();
        obs.push_back(env.observe());
        depth.push_back(grouped_depth_classes(
            depth_truth(maze, pose, agent.width, env_cfg.render.fov, env_cfg.block_size(), buckets), agent.depth_groups,
            buckets));
        loop_labels.push_back(loop.push({pose.x, pose.y}));
        const StepResult r = env.step(rec.action);
        if (r.pose != rec.pose || r.reward != rec.reward)
            fail(ErrorKind::Mismatch, "saliency: log does not replay at step " + std::to_string(rec.t));
        rewards.push_back(r.reward);
        actions.push_back(static_cast<int>(rec.action));
    }

    SaliencyResult res;
    res.width = agent.width;
    res.height = agent.height;
    const std::size_t plane = static_cast<std::size_t>(agent.width) * static_cast<std::size_t>(agent.height);
    const std::size_t third = static_cast<std::size_t>(agent.width) / 3;
    RecurrentState state = RecurrentState::zeros(agent);
    const std::size_t n = obs.size();
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(loss_cfg.t_max)) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(loss_cfg.t_max));
        Tape tape;
        const BoundParams bp = bind_params(tape, params, false);
        TapedState st = bind_state(tape, state);
        std::vector<StepRecord> steps;
        std::vector<Var> images;
        for (std::size_t i = start; i < stop; ++i) {
            const ObservationVars ov = bind_observation(tape, obs[i], true);
            images.push_back(ov.image);
            StepRecord s;
            s.out = forward(agent, bp, ov, st);
            s.action = actions[i];
            s.reward = rewards[i];
            s.depth_targets = depth[i];
            s.loop_label = loop_labels[i];
            steps.push_back(std::move(s));
        }
        state = read_state(st);
        double bootstrap = 0.0;
        if (stop < n) {
            TapedState probe = st;
            bootstrap = forward(agent, bp, bind_observation(tape, obs[stop]), probe).value.value()[0];
        }
        const auto returns = discounted_returns(std::span<const double>(rewards).subspan(start, stop - start),
                                                loss_cfg.gamma, bootstrap);
        tape.backward(assemble_loss(steps, returns, loss_cfg, agent).total);
        for (const Var& img : images) {
            const auto g = img.grad().data();
            SaliencyFrame f;
            f.mask.assign(plane, 0.0);
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < plane; ++p) f.mask[p] += std::abs(g[c * plane + p]);
            const double mx = *std::max_element(f.mask.begin(), f.mask.end());
            if (!(mx > 0.0)) {
                f.zero_gradient = true;
                std::fill(f.mask.begin(), f.mask.end(), 0.0);
                ++res.zero_frames;
            } else {
                double total = 0.0, centre = 0.0;
                for (std::size_t p = 0; p < plane; ++p) {
                    f.mask[p] /= mx;
                    total += f.mask[p];
                    const std::size_t col = p % static_cast<std::size_t>(agent.width);
                    if (col >= third && col < static_cast<std::size_t>(agent.width) - third) centre += f.mask[p];
                }
                f.central_mass = centre / total;
                if (f.central_mass > 0.5) ++res.central_majority_frames;
            }
            res.frames.push_back(std::move(f));
        }
    }
    if (res.zero_frames > 0)
        std::cerr << "note: " << res.zero_frames << " of " << res.frames.size()
                  << " frames had an all-zero input gradient; their masks are left at zero\n";
    return res;
}

Image apply_mask(const Image& image, const std::vector<double>& mask) {
    const std::size_t plane = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
    if (mask.size() != plane) fail(ErrorKind::InvalidArgument, "mask size does not match the image");
    Image out = image;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < plane; ++p) out.data[c * plane + p] *= mask[p];
    return out;
}

Image mask_image(const std::vector<double>& mask, int width, int height) {
    Image out(width, height);
    const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (mask.size() != plane) fail(ErrorKind::InvalidArgument, "mask size does not match the image");
    for (std::size_t c = 0; c < 3; ++c) std::copy(mask.begin(), mask.end(), out.data.begin() + static_cast<std::ptrdiff_t>(c * plane));
    return out;
}

namespace {

void put(Image& img, int x, int y, const std::array<double, 3>& rgb) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    for (int c = 0; c < 3; ++c) img.at(c, y, x) = rgb[static_cast<std::size_t>(c)];
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, const std::array<double, 3>& rgb) {
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) put(img, x, y, rgb);
}

// Bresenham.
void line(Image& img, int x0, int y0, int x1, int y1, const std::array<double, 3>& rgb) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put(img, x0, y0, rgb);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

} // namespace

Image render_topdown(const Maze& maze, const MapAnnotations& annotations, const std::vector<TrajectoryRecord>& records,
                     std::size_t begin, std::size_t end, double block_size, int pixels_per_block) {
    if (pixels_per_block < 2) fail(ErrorKind::InvalidArgument, "pixels per block must be >= 2");
    if (!(block_size > 0.0)) fail(ErrorKind::InvalidArgument, "block size must be positive");
    const int ppb = pixels_per_block;
    Image img(maze.block_width() * ppb, maze.block_height() * ppb);
    for (int by = 0; by < maze.block_height(); ++by)
        for (int bx = 0; bx < maze.block_width(); ++bx)
            fill_rect(img, bx * ppb, by * ppb, (bx + 1) * ppb, (by + 1) * ppb,
                      maze.is_floor({bx, by}) ? kFloorColour : kWallColour);
    const int q = ppb / 4;
    for (const BlockCoord a : annotations.apples)
        fill_rect(img, a.x * ppb + q, a.y * ppb + q, (a.x + 1) * ppb - q, (a.y + 1) * ppb - q, kAppleGreen);
    const BlockCoord g = annotations.goal;
    fill_rect(img, g.x * ppb, g.y * ppb, (g.x + 1) * ppb, (g.y + 1) * ppb, kGoalOrange);

    end = std::min(end, records.size());
    if (begin >= end) return img;
    const double s = ppb / block_size;
    auto px = [&](double v) { return static_cast<int>(std::floor(v * s)); };
    for (std::size_t i = begin + 1; i < end; ++i) {
        if (records[i].event == Event::Respawn) continue;
        const Pose& a = records[i - 1].pose;
        const Pose& b = records[i].pose;
        line(img, px(a.x), px(a.y), px(b.x), px(b.y), kTrailBlack);
    }
    put(img, px(records[begin].pose.x), px(records[begin].pose.y), kTrailBlack);
    const Pose& last = records[end - 1].pose;
    const double len = 0.6 * block_size;
    line(img, px(last.x), px(last.y), px(last.x + len * std::cos(last.heading)),
         px(last.y + len * std::sin(last.heading)), kHeadingRed);
    return img;
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    fail(ErrorKind::Parse, "CSV has no column '" + std::string(name) + "'");
}

CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    auto split = [](std::string_view line) {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            const std::size_t pos = line.find(',', start);
            out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
            if (pos == std::string_view::npos) return out;
            start = pos + 1;
        }
    };
    std::size_t line_no = 0, start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(start, nl - start);
        start = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            fail(ErrorKind::Parse, "CSV row " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                                       " fields, got " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) fail(ErrorKind::Parse, "CSV has no header row");
    return t;
}

namespace {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};

std::string num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.6g", v);
    return b;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = 0.0, hi = 1.0;
    void widen() {
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

std::string frame(const std::string& title, const std::string& x_label, const std::string& y_label, Range xr,
                  Range yr, bool x_ticks) {
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                    "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(kW) + "\" height=\"" +
                    num(kH) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kW / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + escape(title) + "</text>\n";
    const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y1) + "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fy = yr.lo + (yr.hi - yr.lo) * k / 4.0;
        const double py = y0 - (y0 - y1) * k / 4.0;
        s += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\" font-size=\"11\">" + num(fy) + "</text>\n";
        if (x_ticks) {
            const double fx = xr.lo + (xr.hi - xr.lo) * k / 4.0;
            const double pxv = x0 + (x1 - x0) * k / 4.0;
            s += "<text x=\"" + num(pxv) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\" font-size=\"11\">" + num(fx) + "</text>\n";
        }
    }
    if (!x_label.empty())
        s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kH - 10) + "\" text-anchor=\"middle\" font-size=\"12\">" + escape(x_label) + "</text>\n";
    s += "<text x=\"16\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " +
         num((y0 + y1) / 2) + ")\">" + escape(y_label) + "</text>\n";
    return s;
}

} // namespace

std::string line_plot_svg(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                          const std::string& y_label) {
    Range xr{1e300, -1e300}, yr{1e300, -1e300};
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) fail(ErrorKind::InvalidArgument, "plot points must be finite");
            xr.lo = std::min(xr.lo, x);
            xr.hi = std::max(xr.hi, x);
            yr.lo = std::min(yr.lo, y);
            yr.hi = std::max(yr.hi, y);
        }
    if (xr.lo > xr.hi) xr = {0, 1};
    if (yr.lo > yr.hi) yr = {0, 1};
    xr.widen();
    yr.widen();
    std::string svg = frame(title, x_label, y_label, xr, yr, true);
    const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* colour = kPalette[i % std::size(kPalette)];
        std::string pts;
        for (const auto& [x, y] : series[i].points) {
            const double px = x0 + (x - xr.lo) / (xr.hi - xr.lo) * (x1 - x0);
            const double py = y0 - (y - yr.lo) / (yr.hi - yr.lo) * (y0 - y1);
            pts += num(px) + "," + num(py) + " ";
        }
        if (!pts.empty()) pts.pop_back();
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        if (series[i].points.size() == 1) {
            svg += "<circle cx=\"" + pts.substr(0, pts.find(',')) + "\" cy=\"" + pts.substr(pts.find(',') + 1) +
                   "\" r=\"3\" fill=\"" + colour + "\"/>\n";
        }
        svg += "<text x=\"" + num(x1 - 4) + "\" y=\"" + num(y1 + 14 * (static_cast<double>(i) + 1)) +
               "\" text-anchor=\"end\" font-size=\"11\" fill=\"" + colour + "\">" + escape(series[i].name) + "</text>\n";
    }
    svg += "<!-- x-range " + num(xr.lo) + " " + num(xr.hi) + " y-range " + num(yr.lo) + " " + num(yr.hi) + " -->\n";
    return svg + "</svg>\n";
}

std::string bar_chart_svg(const std::vector<Bar>& bars, const std::string& title, const std::string& y_label) {
    Range yr{0.0, 0.0};
    for (const auto& b : bars) {
        if (!std::isfinite(b.mean) || !std::isfinite(b.std)) fail(ErrorKind::InvalidArgument, "bar values must be finite");
        yr.lo = std::min(yr.lo, b.mean - b.std);
        yr.hi = std::max(yr.hi, b.mean + b.std);
    }
    yr.widen();
    std::string svg = frame(title, "", y_label, {0, 1}, yr, false);
    const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
    auto py = [&](double v) { return y0 - (v - yr.lo) / (yr.hi - yr.lo) * (y0 - y1); };
    const double slot = bars.empty() ? 1.0 : (x1 - x0) / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const Bar& b = bars[i];
        const double cx = x0 + slot * (static_cast<double>(i) + 0.5);
        const double w = slot * 0.6;
        const double top = py(std::max(b.mean, 0.0)), bottom = py(std::min(b.mean, 0.0));
        svg += "<rect x=\"" + num(cx - w / 2) + "\" y=\"" + num(top) + "\" width=\"" + num(w) + "\" height=\"" +
               num(bottom - top) + "\" fill=\"" + kPalette[i % std::size(kPalette)] + "\"/>\n";
        svg += "<line x1=\"" + num(cx) + "\" y1=\"" + num(py(b.mean - b.std)) + "\" x2=\"" + num(cx) + "\" y2=\"" +
               num(py(b.mean + b.std)) + "\" stroke=\"black\"/>\n";
        for (double v : {b.mean - b.std, b.mean + b.std})
            svg += "<line x1=\"" + num(cx - w / 6) + "\" y1=\"" + num(py(v)) + "\" x2=\"" + num(cx + w / 6) + "\" y2=\"" +
                   num(py(v)) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(cx) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\" font-size=\"11\">" +
               escape(b.label) + "</text>\n";
    }
    return svg + "</svg>\n";
}

namespace {

double cell_number(const std::string& s, std::size_t row) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::Parse, "CSV data row " + std::to_string(row + 1) + ": '" + s + "' is not a number");
}

} // namespace

PlotSeries reward_series(const CsvTable& csv, const std::string& name) {
    const std::size_t sc = csv.column("global_step"), rc = csv.column("episode_reward");
    PlotSeries s{name, {}};
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        if (csv.rows[i][rc].empty()) continue;
        s.points.emplace_back(cell_number(csv.rows[i][sc], i), cell_number(csv.rows[i][rc], i));
    }
    return s;
}

Bar metric_bar(const CsvTable& csv, const std::string& column, const std::string& label) {
    const std::size_t c = csv.column(column);
    std::vector<std::optional<double>> v;
    for (std::size_t i = 0; i < csv.rows.size(); ++i)
        if (!csv.rows[i][c].empty()) v.push_back(cell_number(csv.rows[i][c], i));
    const Stat st = summarize(v);
    return {label, st.mean, st.std};
}

} // namespace navbench
