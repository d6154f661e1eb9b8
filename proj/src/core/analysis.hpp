#pragma once

#include <string>
#include <vector>

#include "agent.hpp"
#include "maze.hpp"
#include "raycast.hpp"
#include "trainer.hpp"
#include "world.hpp"

namespace navbench {

/// Per-pixel attention for one frame, row-major [height][width], in [0, 1].
struct SaliencyFrame {
    std::vector<double> mask;
    bool zero_gradient = false; // normalisation skipped, mask left at zero
    double central_mass = 0.0;  // share of mask mass in the middle third of columns
};

struct SaliencyResult {
    int width = 0;
    int height = 0;
    std::vector<SaliencyFrame> frames; // one per decision, in step order
    int zero_frames = 0;
    /// Frames with nonzero gradient whose central third holds over half the mass.
    int central_majority_frames = 0;
};

/// Replays the logged actions of an episode and takes the gradient of the
/// training loss (rollouts of loss_cfg.t_max steps, auxiliary targets
/// recomputed from the replay) with respect to every input frame. Each mask
/// is the channel sum of |dL/dI| divided by its maximum.
SaliencyResult saliency(const AgentConfig& agent, const ParameterSet& params, const TrainConfig& loss_cfg,
                        const Maze& maze, const MapAnnotations& annotations, const EnvConfig& env,
                        const EpisodeLog& log);

/// Image scaled channel-wise by a mask of the same size.
Image apply_mask(const Image& image, const std::vector<double>& mask);
/// Mask as a grey image.
Image mask_image(const std::vector<double>& mask, int width, int height);

/// Top-down colours.
inline constexpr std::array<double, 3> kGoalOrange{0xFF / 255.0, 0x8C / 255.0, 0x00 / 255.0};
inline constexpr std::array<double, 3> kTrailBlack{0.0, 0.0, 0.0};
inline constexpr std::array<double, 3> kHeadingRed{1.0, 0.0, 0.0};
inline constexpr std::array<double, 3> kAppleGreen{0x2E / 255.0, 0x8B / 255.0, 0x57 / 255.0};
inline constexpr std::array<double, 3> kFloorColour{1.0, 1.0, 1.0};
inline constexpr std::array<double, 3> kWallColour{0.6, 0.6, 0.6};

/// Plan view of the maze, `pixels_per_block` pixels per block: goal block
/// orange, apples green, the trail of records [begin, end) black and a red
/// heading tick at the last drawn pose. Segments across a respawn are not
/// joined.
Image render_topdown(const Maze& maze, const MapAnnotations& annotations, const std::vector<TrajectoryRecord>& records,
                     std::size_t begin, std::size_t end, double block_size, int pixels_per_block = 16);

/// Comma-separated table; lines starting with '#' are skipped.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::size_t column(std::string_view name) const;
};
CsvTable parse_csv(std::string_view text);

struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};
/// Line plot, one polyline per series.
std::string line_plot_svg(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                          const std::string& y_label);

struct Bar {
    std::string label;
    double mean = 0.0;
    double std = 0.0;
};
/// Bar chart with +-std whiskers.
std::string bar_chart_svg(const std::vector<Bar>& bars, const std::string& title, const std::string& y_label);

/// Episode reward against global step from a training CSV.
PlotSeries reward_series(const CsvTable& training_csv, const std::string& name);
/// Mean and std of one column of a metric report CSV, skipping empty cells.
Bar metric_bar(const CsvTable& report_csv, const std::string& column, const std::string& label);

} // namespace navbench
