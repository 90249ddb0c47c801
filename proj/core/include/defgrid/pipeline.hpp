#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defgrid/geometry.hpp"
#include "defgrid/keyframe.hpp"
#include "defgrid/metrics.hpp"
#include "defgrid/optimizer.hpp"

namespace defgrid {

/// Full run configuration; defaults are the method's published operating point.
struct RunConfig {
    std::vector<std::string> cloud_files;  // explicit ordered frame list
    std::string cloud_glob;                // or a lexicographic glob, not both
    std::string template_mesh;
    int template_frame = -1;  // -1: the selected keyframe
    std::string output_dir = "out";

    int levels = 10;
    bool multi_resolution = true;
    bool preconditioning = true;
    bool isometry = true;
    std::string precondition_order = "before_adam";  // or after_adam

    double alpha = 5.56;
    double isometry_weight = 250.0;
    double grid_lr = 5e-3;
    double grid_lr_growth = 1.10;
    double grid_lambda = 0.25;
    double grid_lambda_growth = 1.50;
    double mesh_lr = 1e-4;
    double mesh_lambda = 16.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    int epochs = 0;     // 0: auto from frame count
    int keyframe = -1;  // -1: coverage selection
    int keyframe_grid = 128;
    double keyframe_gamma = 0.001;

    std::uint64_t seed = 0;
    int threads = 0;  // 0: hardware concurrency
    int log_interval = 10;
    double noise_pct = 0.0;
    std::string save_grids;  // checkpoint path, empty: skip
    std::string load_grids;

    int eval_samples = 100000;
    double f_tau_half = 0.005;
    double f_tau_one = 0.01;
    std::string f_threshold_base = "diagonal";  // or "edge"
};

/// 2000 epochs up to 17 frames, then linear in the frame count, capped at 10000.
int resolve_epochs(const RunConfig& config, int frame_count);
int resolve_threads(int requested);

OptimSchedule make_schedule(const RunConfig& config, int frame_count);
EvalOptions make_eval_options(const RunConfig& config);
MetricParams make_metric_params(const RunConfig& config);

std::string config_to_json_string(const RunConfig& config);
RunConfig config_from_json_string(const std::string& text);

/// Ordered frame paths from the explicit list or the glob (exactly one of
/// which must be set).
std::vector<std::string> resolve_cloud_paths(const RunConfig& config);

struct RunOutput {
    RunConfig resolved;
    KeyframeReport keyframe_report;
    NormalizationTransform normalization;
    int anchor_frame = 0;
    RunResult result;
    std::size_t pruned_parameters = 0;
    std::size_t dense_parameters = 0;
    double wall_time_s = 0.0;
    std::vector<std::string> frame_files;
    std::string manifest_path;
    std::string history_path;
};

/// Full run: ingest, normalize, select keyframe, build pruned grids, optimize,
/// export per-frame meshes (input units), loss history and manifest.
RunOutput run_pipeline(const RunConfig& config);

/// Re-runs the experiment recorded in a manifest.
RunConfig config_from_manifest(const std::string& manifest_path);

struct EvalConfig {
    std::string pred_dir;
    std::string gt_dir;
    std::string tracks_dir;  // optional ground-truth material tracks (.xyz per frame)
    std::string out_json;
    std::string out_csv;
    MetricParams params;
    int threads = 0;
};

SequenceMetrics eval_pipeline(const EvalConfig& config);

/// Meshes (.obj/.ply) or tracks (.xyz) in a directory, lexicographic order.
std::vector<std::string> list_frames(const std::string& dir,
                                     std::initializer_list<const char*> extensions);

}  // namespace defgrid
