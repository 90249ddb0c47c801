#include "cli_app.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "defgrid/gradients.hpp"
#include "defgrid/grid.hpp"
#include "defgrid/io.hpp"
#include "defgrid/laplacian.hpp"
#include "defgrid/rng.hpp"
#include "defgrid/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace defgrid::cli {

void attach_run_options(CLI::App& cmd, RunConfig& c) {
    cmd.add_option("--clouds", c.cloud_files, "Ordered point cloud frames (.ply/.xyz)");
    cmd.add_option("--cloud-glob", c.cloud_glob, "Glob for frames, sorted lexicographically");
    cmd.add_option("--template", c.template_mesh, "Template mesh (.obj/.ply), required");
    cmd.add_option("--template-frame", c.template_frame,
                   "Frame the template corresponds to (-1: selected keyframe)");
    cmd.add_option("--out", c.output_dir, "Output directory");
    cmd.add_option("--levels", c.levels, "Grid level count");
    cmd.add_option("--multi-resolution", c.multi_resolution,
                   "Use all levels (off: finest level only)");
    cmd.add_option("--preconditioning", c.preconditioning,
                   "Smooth grid gradients (off scales grid lr by 0.1)");
    cmd.add_option("--isometry", c.isometry, "Enable the isometry term");
    cmd.add_option("--precondition-order", c.precondition_order,
                   "before_adam or after_adam");
    cmd.add_option("--alpha", c.alpha, "Robust Chamfer kernel sharpness");
    cmd.add_option("--isometry-weight", c.isometry_weight, "Isometry term weight");
    cmd.add_option("--grid-lr", c.grid_lr, "Base grid learning rate (level 1)");
    cmd.add_option("--grid-lr-growth", c.grid_lr_growth, "Per-level learning rate growth");
    cmd.add_option("--grid-lambda", c.grid_lambda, "Base grid smoothing strength");
    cmd.add_option("--grid-lambda-growth", c.grid_lambda_growth, "Per-level lambda growth");
    cmd.add_option("--mesh-lr", c.mesh_lr, "Template vertex learning rate");
    cmd.add_option("--mesh-lambda", c.mesh_lambda, "Template smoothing strength");
    cmd.add_option("--beta1", c.beta1, "Adam beta1");
    cmd.add_option("--beta2", c.beta2, "Adam beta2");
    cmd.add_option("--adam-eps", c.epsilon, "Adam epsilon");
    cmd.add_option("--epochs", c.epochs, "Epochs (0: auto from frame count)");
    cmd.add_option("--keyframe", c.keyframe, "Keyframe override (-1: coverage selection)");
    cmd.add_option("--keyframe-grid", c.keyframe_grid, "Keyframe occupancy grid resolution");
    cmd.add_option("--keyframe-gamma", c.keyframe_gamma, "Keyframe center weighting");
    cmd.add_option("--seed", c.seed, "Random seed");
    cmd.add_option("--threads", c.threads, "Worker cap (0: hardware)");
    cmd.add_option("--log-interval", c.log_interval, "Epochs between history records");
    cmd.add_option("--noise-pct", c.noise_pct,
                   "Gaussian input noise, % of bounding-box diagonal");
    cmd.add_option("--save-grids", c.save_grids, "Write final grid checkpoint here");
    cmd.add_option("--load-grids", c.load_grids, "Initialize grids from a checkpoint");
    cmd.add_option("--eval-samples", c.eval_samples, "Surface samples per mesh in metrics");
    cmd.add_option("--f-tau-half", c.f_tau_half, "First F-score threshold fraction");
    cmd.add_option("--f-tau-one", c.f_tau_one, "Second F-score threshold fraction");
    cmd.add_option("--f-threshold-base", c.f_threshold_base,
                   "F-score threshold base: diagonal or edge");
}

std::string config_to_toml(CLI::App& cmd) {
    return cmd.config_to_str(/*default_also=*/true, /*write_description=*/false);
}

namespace {

int cmd_run(CLI::App& cmd, RunConfig& config, const std::string& from_manifest) {
    if (!from_manifest.empty()) {
        config = config_from_manifest(from_manifest);
    }
    (void)cmd;
    RunOutput out = run_pipeline(config);
    std::cout << "keyframe " << out.anchor_frame << " (selected "
              << out.keyframe_report.chosen << ")\n"
              << "parameters " << out.pruned_parameters << " / " << out.dense_parameters
              << " dense (" << 100.0 * out.pruned_parameters / out.dense_parameters << "%)\n"
              << "best loss " << out.result.best_loss << " at epoch " << out.result.best_epoch
              << "\n"
              << "wrote " << out.frame_files.size() << " frames, " << out.history_path << ", "
              << out.manifest_path << "\n";
    return kOk;
}

struct SynthOptions {
    std::string kind = "rigid-sphere";
    int frames = 8;
    int points = 2000;
    std::uint64_t seed = 0;
    std::string out = "synth";
    double degrees_per_frame = 5.0;
    std::vector<double> translation = {0.02, 0.0, 0.0};
    double max_bend_degrees = 45.0;
    std::vector<double> scale = {1.1, 1.0, 0.9};
};

int cmd_synth(const SynthOptions& opt) {
    SyntheticScene scene;
    if (opt.kind == "rigid-sphere") {
        scene = make_rigid_sphere_scene(opt.frames, opt.points, opt.degrees_per_frame,
                                        Vec3(opt.translation[0], opt.translation[1],
                                             opt.translation[2]),
                                        opt.seed);
    } else if (opt.kind == "bending-bar") {
        scene = make_bending_bar_scene(opt.frames, opt.points, opt.max_bend_degrees, opt.seed);
    } else if (opt.kind == "scaling-cube") {
        scene = make_scaling_cube_scene(opt.frames, opt.points,
                                        Vec3(opt.scale[0], opt.scale[1], opt.scale[2]), opt.seed);
    } else {
        throw ConfigError("unknown synthetic kind: " + opt.kind);
    }
    write_scene(opt.out, scene);

    auto [seq, tf] = normalize_sequence(PointCloudSequence(scene.clouds));
    const KeyframeReport report = select_keyframe(seq);
    write_obj((fs::path(opt.out) / "template.obj").string(),
              scene.gt_meshes[static_cast<std::size_t>(report.chosen)]);

    json meta{{"kind", opt.kind},         {"frames", opt.frames}, {"points", opt.points},
              {"seed", opt.seed},         {"keyframe", report.chosen},
              {"degrees_per_frame", opt.degrees_per_frame},
              {"max_bend_degrees", opt.max_bend_degrees}};
    std::ofstream m((fs::path(opt.out) / "meta.json").string(), std::ios::binary);
    m << meta.dump(2) << "\n";

    std::cout << "wrote " << scene.gt_meshes.size() << " frames to " << opt.out
              << " (keyframe " << report.chosen << ")\n";
    return kOk;
}

int cmd_eval(const EvalConfig& config) {
    const SequenceMetrics metrics = eval_pipeline(config);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "mean: CD %.4g (x1e-5: %.4g)  NC %.4f  F-0.5%% %.4f  F-1%% %.4f",
                  metrics.mean.cd, metrics.mean.cd_scaled, metrics.mean.nc, metrics.mean.f_half,
                  metrics.mean.f_one);
    std::cout << buf;
    if (metrics.mean.corr) std::cout << "  Corr " << *metrics.mean.corr;
    std::cout << "\n";
    return kOk;
}

int cmd_keyframe(const RunConfig& config, const std::string& out_json) {
    std::vector<PointCloud> raw;
    for (const auto& p : resolve_cloud_paths(config)) raw.push_back(read_point_cloud(p));
    auto [seq, tf] = normalize_sequence(PointCloudSequence(std::move(raw)));
    const KeyframeReport report = select_keyframe(seq, config.keyframe_grid,
                                                  config.keyframe_gamma);
    json j{{"chosen", report.chosen},
           {"occupancy", report.occupancy},
           {"weights", report.weights},
           {"scores", report.scores}};
    if (!out_json.empty()) {
        std::ofstream o(out_json, std::ios::binary);
        o << j.dump(2) << "\n";
    }
    std::cout << j.dump(2) << "\n";
    return kOk;
}

json check_grad(std::uint64_t seed) {
    FdInstanceSpec spec;
    spec.seed = seed;
    const FdReport report = finite_difference_check(spec);
    const double cayley_err = cayley_jacobian_max_rel_error(seed + 1, 200);
    json failures = json::array();
    for (const auto& f : report.failures) {
        failures.push_back({{"entry", f.entry},
                            {"analytic", f.analytic},
                            {"numeric", f.numeric},
                            {"error", f.error}});
    }
    return json{{"name", "grad"},
                {"pass", report.pass && cayley_err < 1e-6},
                {"checked", report.checked},
                {"max_rel_error", report.max_rel_error},
                {"cayley_jacobian_max_rel_error", cayley_err},
                {"failures", failures}};
}

json check_precond(std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    double worst_residual = 0.0;
    double worst_constant = 0.0;
    bool damping_ok = true;
    for (int level = 1; level <= 5; ++level) {
        const GridLevel dense = GridLevel::dense(level);
        const LaplacianOperator op = build_grid_laplacian(dense, 0.25 * std::pow(1.5, level - 1));
        const int n = op.node_count();
        Eigen::MatrixXd g(n, 6);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < 6; ++c) g(i, c) = uniform_range(gen, -1.0, 1.0);
        }
        const Eigen::MatrixXd x = op.smooth(g);
        const Eigen::MatrixXd once = x + op.lambda() * (op.laplacian() * x);
        const Eigen::MatrixXd twice = once + op.lambda() * (op.laplacian() * once);
        worst_residual = std::max(worst_residual, (twice - g).norm() / g.norm());
        const Eigen::MatrixXd cg = Eigen::MatrixXd::Constant(n, 6, 0.37);
        worst_constant = std::max(worst_constant, (op.smooth(cg) - cg).cwiseAbs().maxCoeff());
        if (x.norm() > g.norm()) damping_ok = false;
    }
    const bool pass = worst_residual < 1e-8 && worst_constant < 1e-9 && damping_ok;
    return json{{"name", "precond"},
                {"pass", pass},
                {"max_relative_residual", worst_residual},
                {"max_constant_drift", worst_constant},
                {"norm_nonexpansive", damping_ok}};
}

json check_interp(std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<Vec3> pts;
    for (int i = 0; i < 500; ++i) {
        pts.emplace_back(uniform_range(gen, -1.0, 1.0), uniform_range(gen, -1.0, 1.0),
                         uniform_range(gen, -1.0, 1.0));
    }
    const PointCloud cloud(pts);
    const DeformationGrid grid = build_pruned_pair(10, cloud, cloud);

    double worst_partition = 0.0;
    for (int q = 0; q < 10000; ++q) {
        const Vec3 x(uniform_range(gen, -1.2, 1.2), uniform_range(gen, -1.2, 1.2),
                     uniform_range(gen, -1.2, 1.2));
        const Vec3 xc = clamp_to_domain(x);
        for (const auto& level : grid.levels) {
            const LevelStencil st = make_stencil(level, xc);
            double sum = 0.0;
            for (int c = 0; c < st.count; ++c) sum += st.weights[c];
            worst_partition = std::max(worst_partition, std::abs(sum - 1.0));
        }
    }

    double worst_identity = 0.0;
    for (int q = 0; q < 1000; ++q) {
        const Vec3 x(uniform_range(gen, -1.0, 1.0), uniform_range(gen, -1.0, 1.0),
                     uniform_range(gen, -1.0, 1.0));
        worst_identity = std::max(worst_identity, (apply_grid_step(grid, x) - x).norm());
    }

    double worst_ortho = 0.0;
    for (int q = 0; q < 10000; ++q) {
        const Vec3 z(uniform_range(gen, -10.0, 10.0), uniform_range(gen, -10.0, 10.0),
                     uniform_range(gen, -10.0, 10.0));
        const Mat3 r = cayley_rotation(z);
        worst_ortho = std::max(worst_ortho,
                               (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff());
        worst_ortho = std::max(worst_ortho, std::abs(r.determinant() - 1.0));
    }

    const bool pass = worst_partition < 1e-12 && worst_identity == 0.0 && worst_ortho < 1e-9;
    return json{{"name", "interp"},
                {"pass", pass},
                {"max_partition_error", worst_partition},
                {"max_identity_error", worst_identity},
                {"max_cayley_error", worst_ortho}};
}

int cmd_check(const std::string& kind, std::uint64_t seed, const std::string& out_json) {
    json report;
    if (kind == "grad") report = check_grad(seed);
    else if (kind == "precond") report = check_precond(seed);
    else if (kind == "interp") report = check_interp(seed);
    else throw ConfigError("unknown check kind: " + kind);

    if (!out_json.empty()) {
        std::ofstream o(out_json, std::ios::binary);
        o << report.dump(2) << "\n";
    }
    std::cout << report.dump(2) << "\n";
    return report.at("pass").get<bool>() ? kOk : kCheckFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Deformation-grid surface tracking from point cloud sequences"};
    app.require_subcommand(1);

    RunConfig run_config;
    std::string from_manifest;
    CLI::App* run = app.add_subcommand("run", "Optimize a sequence and export per-frame meshes");
    attach_run_options(*run, run_config);
    run->add_option("--from-manifest", from_manifest, "Re-run the experiment a manifest records");
    run->set_config("--config", "", "Read options from a TOML file");

    SynthOptions synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene");
    synth_cmd->add_option("--kind", synth.kind, "rigid-sphere | bending-bar | scaling-cube");
    synth_cmd->add_option("--frames", synth.frames, "Transition count T (frames 0..T)");
    synth_cmd->add_option("--points", synth.points, "Points per frame");
    synth_cmd->add_option("--seed", synth.seed, "Random seed");
    synth_cmd->add_option("--out", synth.out, "Output directory");
    synth_cmd->add_option("--degrees-per-frame", synth.degrees_per_frame,
                          "rigid-sphere rotation per frame");
    synth_cmd->add_option("--translation", synth.translation, "rigid-sphere shift per frame")
        ->expected(3);
    synth_cmd->add_option("--max-bend", synth.max_bend_degrees, "bending-bar final tip angle");
    synth_cmd->add_option("--scale", synth.scale, "scaling-cube per-frame axis factors")
        ->expected(3);

    EvalConfig eval_config;
    std::uint64_t eval_seed = 0;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Compare predicted meshes to ground truth");
    eval_cmd->add_option("--pred", eval_config.pred_dir, "Predicted mesh directory")->required();
    eval_cmd->add_option("--gt", eval_config.gt_dir, "Ground-truth mesh directory")->required();
    eval_cmd->add_option("--tracks", eval_config.tracks_dir, "Ground-truth track directory");
    eval_cmd->add_option("--out-json", eval_config.out_json, "Metrics JSON path");
    eval_cmd->add_option("--out-csv", eval_config.out_csv, "Metrics CSV path");
    eval_cmd->add_option("--samples", eval_config.params.samples, "Surface samples per mesh");
    eval_cmd->add_option("--seed", eval_seed, "Sampling seed");
    eval_cmd->add_option("--threads", eval_config.threads, "Worker cap (0: hardware)");

    std::string check_kind;
    std::uint64_t check_seed = 7;
    std::string check_out;
    CLI::App* check_cmd = app.add_subcommand("check", "Run verification harnesses");
    check_cmd->add_option("kind", check_kind, "grad | precond | interp")->required();
    check_cmd->add_option("--seed", check_seed, "Instance seed");
    check_cmd->add_option("--out", check_out, "Report JSON path");

    RunConfig key_config;
    std::string key_out;
    CLI::App* key_cmd = app.add_subcommand("keyframe", "Report coverage-weighted keyframe scores");
    key_cmd->add_option("--clouds", key_config.cloud_files, "Ordered point cloud frames");
    key_cmd->add_option("--cloud-glob", key_config.cloud_glob, "Glob for frames");
    key_cmd->add_option("--keyframe-grid", key_config.keyframe_grid, "Occupancy resolution");
    key_cmd->add_option("--keyframe-gamma", key_config.keyframe_gamma, "Center weighting");
    key_cmd->add_option("--out", key_out, "Report JSON path");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(*run, run_config, from_manifest);
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (eval_cmd->parsed()) {
            eval_config.params.seed = eval_seed;
            return cmd_eval(eval_config);
        }
        if (check_cmd->parsed()) return cmd_check(check_kind, check_seed, check_out);
        if (key_cmd->parsed()) return cmd_keyframe(key_config, key_out);
        return kConfigError;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kInputError;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    }
}

}  // namespace defgrid::cli
