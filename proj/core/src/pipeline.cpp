#include "defgrid/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <json.hpp>

#include "defgrid/grid.hpp"
#include "defgrid/io.hpp"
#include "defgrid/parallel.hpp"
#include "defgrid/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace defgrid {

int resolve_epochs(const RunConfig& config, int frame_count) {
    if (config.epochs > 0) return config.epochs;
    if (frame_count <= 17) return 2000;
    const double scaled = 2000.0 * frame_count / 17.0;
    return std::min(10000, static_cast<int>(std::lround(scaled)));
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

OptimSchedule make_schedule(const RunConfig& config, int frame_count) {
    OptimSchedule s;
    s.grid_lr = config.grid_lr;
    s.grid_lr_growth = config.grid_lr_growth;
    s.grid_lambda = config.grid_lambda;
    s.grid_lambda_growth = config.grid_lambda_growth;
    s.mesh_lr = config.mesh_lr;
    s.mesh_lambda = config.mesh_lambda;
    s.beta1 = config.beta1;
    s.beta2 = config.beta2;
    s.epsilon = config.epsilon;
    s.max_epochs = resolve_epochs(config, frame_count);
    s.precondition = config.preconditioning;
    if (config.precondition_order == "after_adam") {
        s.precondition_after_adam = true;
    } else if (config.precondition_order != "before_adam") {
        throw ConfigError("precondition_order must be before_adam or after_adam");
    }
    return s;
}

EvalOptions make_eval_options(const RunConfig& config) {
    EvalOptions opts;
    opts.chamfer.alpha = config.alpha;
    opts.isometry_weight = config.isometry_weight;
    opts.use_isometry = config.isometry;
    opts.threads = resolve_threads(config.threads);
    return opts;
}

MetricParams make_metric_params(const RunConfig& config) {
    MetricParams p;
    p.samples = config.eval_samples;
    p.tau_half = config.f_tau_half;
    p.tau_one = config.f_tau_one;
    if (config.f_threshold_base == "diagonal") {
        p.threshold_on_diagonal = true;
    } else if (config.f_threshold_base == "edge") {
        p.threshold_on_diagonal = false;
    } else {
        throw ConfigError("f_threshold_base must be diagonal or edge");
    }
    p.seed = config.seed;
    return p;
}

namespace {

json config_to_json(const RunConfig& c) {
    return json{{"cloud_files", c.cloud_files},
                {"cloud_glob", c.cloud_glob},
                {"template_mesh", c.template_mesh},
                {"template_frame", c.template_frame},
                {"output_dir", c.output_dir},
                {"levels", c.levels},
                {"multi_resolution", c.multi_resolution},
                {"preconditioning", c.preconditioning},
                {"isometry", c.isometry},
                {"precondition_order", c.precondition_order},
                {"alpha", c.alpha},
                {"isometry_weight", c.isometry_weight},
                {"grid_lr", c.grid_lr},
                {"grid_lr_growth", c.grid_lr_growth},
                {"grid_lambda", c.grid_lambda},
                {"grid_lambda_growth", c.grid_lambda_growth},
                {"mesh_lr", c.mesh_lr},
                {"mesh_lambda", c.mesh_lambda},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"epsilon", c.epsilon},
                {"epochs", c.epochs},
                {"keyframe", c.keyframe},
                {"keyframe_grid", c.keyframe_grid},
                {"keyframe_gamma", c.keyframe_gamma},
                {"seed", c.seed},
                {"threads", c.threads},
                {"log_interval", c.log_interval},
                {"noise_pct", c.noise_pct},
                {"save_grids", c.save_grids},
                {"load_grids", c.load_grids},
                {"eval_samples", c.eval_samples},
                {"f_tau_half", c.f_tau_half},
                {"f_tau_one", c.f_tau_one},
                {"f_threshold_base", c.f_threshold_base}};
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    j.at("cloud_files").get_to(c.cloud_files);
    j.at("cloud_glob").get_to(c.cloud_glob);
    j.at("template_mesh").get_to(c.template_mesh);
    j.at("template_frame").get_to(c.template_frame);
    j.at("output_dir").get_to(c.output_dir);
    j.at("levels").get_to(c.levels);
    j.at("multi_resolution").get_to(c.multi_resolution);
    j.at("preconditioning").get_to(c.preconditioning);
    j.at("isometry").get_to(c.isometry);
    j.at("precondition_order").get_to(c.precondition_order);
    j.at("alpha").get_to(c.alpha);
    j.at("isometry_weight").get_to(c.isometry_weight);
    j.at("grid_lr").get_to(c.grid_lr);
    j.at("grid_lr_growth").get_to(c.grid_lr_growth);
    j.at("grid_lambda").get_to(c.grid_lambda);
    j.at("grid_lambda_growth").get_to(c.grid_lambda_growth);
    j.at("mesh_lr").get_to(c.mesh_lr);
    j.at("mesh_lambda").get_to(c.mesh_lambda);
    j.at("beta1").get_to(c.beta1);
    j.at("beta2").get_to(c.beta2);
    j.at("epsilon").get_to(c.epsilon);
    j.at("epochs").get_to(c.epochs);
    j.at("keyframe").get_to(c.keyframe);
    j.at("keyframe_grid").get_to(c.keyframe_grid);
    j.at("keyframe_gamma").get_to(c.keyframe_gamma);
    j.at("seed").get_to(c.seed);
    j.at("threads").get_to(c.threads);
    j.at("log_interval").get_to(c.log_interval);
    j.at("noise_pct").get_to(c.noise_pct);
    j.at("save_grids").get_to(c.save_grids);
    j.at("load_grids").get_to(c.load_grids);
    j.at("eval_samples").get_to(c.eval_samples);
    j.at("f_tau_half").get_to(c.f_tau_half);
    j.at("f_tau_one").get_to(c.f_tau_one);
    j.at("f_threshold_base").get_to(c.f_threshold_base);
    return c;
}

bool glob_match(const std::string& pattern, const std::string& name) {
    // '*' wildcards only
    std::size_t p = 0, n = 0, star = std::string::npos, mark = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = n;
        } else if (star != std::string::npos) {
            p = star + 1;
            n = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

json breakdown_to_json(const LossBreakdown& b) {
    return json{{"mesh_loss", b.mesh_loss},
                {"transform_loss", b.transform_loss},
                {"isometry_loss", b.isometry_loss},
                {"total", b.total},
                {"cd_max", b.cd_max},
                {"frame_cd", b.frame_cd},
                {"frame_confidence", b.frame_confidence}};
}

json metrics_to_json(const FrameMetrics& m) {
    json j{{"cd", m.cd},       {"cd_x1e5", m.cd_scaled}, {"nc", m.nc},
           {"f_half", m.f_half}, {"f_one", m.f_one}};
    if (m.corr) j["corr"] = *m.corr;
    return j;
}

}  // namespace

std::string config_to_json_string(const RunConfig& config) {
    return config_to_json(config).dump(2);
}

RunConfig config_from_json_string(const std::string& text) {
    try {
        return config_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config JSON: ") + e.what());
    }
}

std::vector<std::string> resolve_cloud_paths(const RunConfig& config) {
    const bool has_list = !config.cloud_files.empty();
    const bool has_glob = !config.cloud_glob.empty();
    if (has_list == has_glob) {
        throw ConfigError("give either an explicit frame list or a glob, not both");
    }
    if (has_list) return config.cloud_files;

    const fs::path pattern(config.cloud_glob);
    const fs::path dir = pattern.parent_path().empty() ? fs::path(".") : pattern.parent_path();
    const std::string leaf = pattern.filename().string();
    if (!fs::is_directory(dir)) {
        throw ConfigError("glob directory does not exist: " + dir.string());
    }
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (glob_match(leaf, entry.path().filename().string())) {
            out.push_back(entry.path().string());
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw ConfigError("glob matched no files: " + config.cloud_glob);
    return out;
}

RunConfig config_from_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open manifest: " + manifest_path);
    json j;
    try {
        in >> j;
        return config_from_json(j.at("config"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad manifest: ") + e.what());
    }
}

RunOutput run_pipeline(const RunConfig& config) {
    const auto t_start = std::chrono::steady_clock::now();
    RunOutput out;
    out.resolved = config;

    const auto cloud_paths = resolve_cloud_paths(config);
    if (cloud_paths.size() < 2) throw InputError("need at least 2 frames");
    if (config.template_mesh.empty()) {
        throw ConfigError("a template mesh is required (--template)");
    }

    std::vector<PointCloud> raw;
    raw.reserve(cloud_paths.size());
    for (const auto& p : cloud_paths) raw.push_back(read_point_cloud(p));
    if (config.noise_pct > 0.0) add_noise(raw, config.noise_pct, config.seed);

    TriMesh template_in = read_mesh(config.template_mesh);

    auto [seq, tf] = normalize_sequence(PointCloudSequence(std::move(raw)));
    out.normalization = tf;

    std::vector<Vec3> template_verts;
    template_verts.reserve(template_in.vertex_count());
    for (const Vec3& v : template_in.vertices) template_verts.push_back(tf.apply(v));
    const TriMesh mesh0(std::move(template_verts), template_in.triangles);

    out.keyframe_report = select_keyframe(seq, config.keyframe_grid, config.keyframe_gamma);
    const int selected = config.keyframe >= 0 ? config.keyframe : out.keyframe_report.chosen;
    out.anchor_frame = config.template_frame >= 0 ? config.template_frame : selected;
    if (out.anchor_frame < 0 || out.anchor_frame >= seq.frame_count()) {
        throw ConfigError("keyframe/template frame out of range");
    }
    if (out.anchor_frame != out.keyframe_report.chosen) {
        std::cerr << "warning: template frame " << out.anchor_frame
                  << " differs from the selected keyframe " << out.keyframe_report.chosen
                  << "\n";
    }

    GridSequence grids;
    if (!config.load_grids.empty()) {
        grids = load_grid_checkpoint(config.load_grids);
        if (grids.frame_count != seq.frame_count() || grids.keyframe != out.anchor_frame) {
            throw InputError("loaded grid checkpoint does not match this sequence");
        }
    } else {
        grids = GridSequence::build(seq, out.anchor_frame, config.levels,
                                    config.multi_resolution);
    }
    out.pruned_parameters = grids.parameter_count();
    out.dense_parameters = grids.dense_parameter_count();

    const OptimSchedule schedule = make_schedule(config, seq.frame_count());
    const EvalOptions eval_opts = make_eval_options(config);
    out.result = run_optimization(seq, mesh0, std::move(grids), schedule, eval_opts,
                                  config.log_interval);

    // exports
    fs::create_directories(fs::path(config.output_dir) / "frames");
    char name[64];
    for (int t = 0; t < seq.frame_count(); ++t) {
        const auto canonical = deform_points(out.result.grids, out.result.vertices, t);
        std::vector<Vec3> raw_units;
        raw_units.reserve(canonical.size());
        for (const Vec3& p : canonical) raw_units.push_back(tf.invert(p));
        std::snprintf(name, sizeof(name), "frame_%04d.obj", t);
        const std::string path = (fs::path(config.output_dir) / "frames" / name).string();
        write_obj(path, raw_units, mesh0.triangles);
        out.frame_files.push_back(path);
    }

    out.history_path = (fs::path(config.output_dir) / "loss_history.jsonl").string();
    {
        std::ofstream hist(out.history_path, std::ios::binary);
        for (const auto& rec : out.result.history) {
            json line = breakdown_to_json(rec.breakdown);
            line["epoch"] = rec.epoch;
            line["wall_time_s"] = rec.wall_time_s;
            hist << line.dump() << "\n";
        }
    }

    if (!config.save_grids.empty()) {
        save_grid_checkpoint(config.save_grids, out.result.grids);
    }

    out.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    out.manifest_path = (fs::path(config.output_dir) / "manifest.json").string();
    {
        RunConfig resolved = config;
        resolved.cloud_files = cloud_paths;
        resolved.cloud_glob.clear();
        resolved.epochs = schedule.max_epochs;
        resolved.keyframe = out.anchor_frame;
        resolved.template_frame = out.anchor_frame;
        resolved.threads = eval_opts.threads;
        out.resolved = resolved;

        json manifest;
        manifest["config"] = config_to_json(resolved);
        manifest["keyframe"] = {{"chosen", out.keyframe_report.chosen},
                                {"anchor", out.anchor_frame},
                                {"occupancy", out.keyframe_report.occupancy},
                                {"weights", out.keyframe_report.weights},
                                {"scores", out.keyframe_report.scores}};
        manifest["normalization"] = {{"center", {tf.center.x(), tf.center.y(), tf.center.z()}},
                                     {"scale", tf.scale}};
        manifest["parameters"] = {{"pruned", out.pruned_parameters},
                                  {"dense", out.dense_parameters},
                                  {"active_fraction",
                                   static_cast<double>(out.pruned_parameters) /
                                       static_cast<double>(out.dense_parameters)}};
        manifest["best_epoch"] = out.result.best_epoch;
        manifest["best_loss"] = out.result.best_loss;
        manifest["final"] = breakdown_to_json(out.result.history.back().breakdown);
        manifest["wall_time_s"] = out.wall_time_s;
        std::ofstream m(out.manifest_path, std::ios::binary);
        m << manifest.dump(2) << "\n";
    }
    return out;
}

std::vector<std::string> list_frames(const std::string& dir,
                                     std::initializer_list<const char*> extensions) {
    if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        for (const char* want : extensions) {
            if (ext == want) {
                out.push_back(entry.path().string());
                break;
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

SequenceMetrics eval_pipeline(const EvalConfig& config) {
    const auto pred_paths = list_frames(config.pred_dir, {".obj", ".ply"});
    const auto gt_paths = list_frames(config.gt_dir, {".obj", ".ply"});
    if (pred_paths.empty()) throw InputError("no predicted meshes in " + config.pred_dir);
    if (pred_paths.size() != gt_paths.size()) {
        throw InputError("prediction and ground-truth frame counts differ (" +
                         std::to_string(pred_paths.size()) + " vs " +
                         std::to_string(gt_paths.size()) + ")");
    }
    std::vector<std::string> track_paths;
    if (!config.tracks_dir.empty()) {
        track_paths = list_frames(config.tracks_dir, {".xyz"});
        if (track_paths.size() != pred_paths.size()) {
            throw InputError("track frame count differs from mesh frame count");
        }
    }

    const int threads = resolve_threads(config.threads);
    std::vector<FrameMetrics> frames(pred_paths.size());
    parallel_for(pred_paths.size(), threads, [&](std::size_t t) {
        const TriMesh pred = read_mesh(pred_paths[t]);
        const TriMesh gt = read_mesh(gt_paths[t]);
        MetricParams p = config.params;
        p.seed = config.params.seed ^ (0x9E3779B97F4A7C15ull * (t + 1));
        frames[t] = evaluate_frame(pred, gt, p);
        if (!track_paths.empty()) {
            const PointCloud gt_track = read_point_cloud(track_paths[t]);
            if (gt_track.size() != pred.vertex_count()) {
                throw InputError("track " + track_paths[t] +
                                 " does not match predicted vertex count");
            }
            const NormalizationTransform tf = unit_box_transform(gt);
            double acc = 0.0;
            for (std::size_t i = 0; i < gt_track.size(); ++i) {
                acc += (tf.apply(pred.vertices[i]) - tf.apply(gt_track.points[i])).norm();
            }
            frames[t].corr = acc / static_cast<double>(gt_track.size());
        }
    });

    SequenceMetrics metrics = summarize(std::move(frames));

    if (!config.out_json.empty()) {
        json j;
        j["frames"] = json::array();
        for (const auto& f : metrics.frames) j["frames"].push_back(metrics_to_json(f));
        j["mean"] = metrics_to_json(metrics.mean);
        std::ofstream o(config.out_json, std::ios::binary);
        o << j.dump(2) << "\n";
    }
    if (!config.out_csv.empty()) {
        std::ofstream o(config.out_csv, std::ios::binary);
        o << "frame,CD_x1e5,NC,F_0.5pct,F_1pct,Corr\n";
        char buf[256];
        for (std::size_t t = 0; t < metrics.frames.size(); ++t) {
            const auto& f = metrics.frames[t];
            std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,", t, f.cd_scaled, f.nc,
                          f.f_half, f.f_one);
            o << buf;
            if (f.corr) {
                std::snprintf(buf, sizeof(buf), "%.9g", *f.corr);
                o << buf;
            }
            o << "\n";
        }
        const auto& m = metrics.mean;
        std::snprintf(buf, sizeof(buf), "mean,%.9g,%.9g,%.9g,%.9g,", m.cd_scaled, m.nc, m.f_half,
                      m.f_one);
        o << buf;
        if (m.corr) {
            std::snprintf(buf, sizeof(buf), "%.9g", *m.corr);
            o << buf;
        }
        o << "\n";
    }
    return metrics;
}

}  // namespace defgrid
