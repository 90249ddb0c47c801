#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "defgrid/geometry.hpp"
#include "defgrid/grid.hpp"
#include "defgrid/nn_index.hpp"

namespace defgrid {

struct RobustChamferParams {
    double alpha = 5.56;
};

/// Bidirectional mean of squared nearest-neighbor distances, each term
/// attenuated by exp(-alpha d^2). Symmetric in (p, q).
double robust_chamfer(std::span<const Vec3> p, std::span<const Vec3> q,
                      const RobustChamferParams& params = {});

/// Epoch-dependent catch-up exponent delta = 1 - sqrt(e / e_max).
struct ConfidenceState {
    int epoch = 0;
    int max_epochs = 1;

    double delta() const;
};

/// Cumulative confidence products along an outward frame order:
/// w_k = prod_{j<=k} (1 / (1 + max(0, cd_j - cd_max)))^delta.
std::vector<double> confidence_weights(double delta, double cd_max,
                                       std::span<const double> ordered_frame_cds);

struct LossBreakdown {
    double mesh_loss = 0.0;
    double transform_loss = 0.0;
    double isometry_loss = 0.0;
    double total = 0.0;
    double cd_max = 0.0;
    std::vector<double> frame_cd;          // CD_R(X_hat_t, P_t); keyframe slot = mesh_loss
    std::vector<double> frame_confidence;  // 1 at the keyframe
};

/// Nearest-neighbor pairings and detached robust weights of one Chamfer term
/// between a moving set and a fixed set, both directions.
struct ChamferCache {
    std::vector<int> nn_in_fixed;    // per moving point
    std::vector<double> w_moving;
    std::vector<int> nn_in_moving;   // per fixed point
    std::vector<double> w_fixed;
    double value = 0.0;
};

struct EvalOptions {
    RobustChamferParams chamfer;
    double isometry_weight = 250.0;
    bool use_isometry = true;
    int threads = 1;
};

/// Full forward state of one loss evaluation; retained for the backward pass
/// and for frozen re-evaluations.
struct ForwardEval {
    int keyframe = 0;
    int frame_count = 0;
    std::vector<std::vector<Vec3>> mesh_pos;     // per frame; [keyframe] is the template copy
    std::vector<std::vector<Vec3>> transported;  // per frame; empty at the keyframe
    std::vector<ChamferCache> mesh_term;         // per frame
    std::vector<ChamferCache> cloud_term;        // per frame
    ChamferCache init_term;
    std::vector<double> cd_mesh, cd_cloud;       // per frame
    double cd_max = 0.0;
    double delta = 0.0;
    std::vector<double> confidence;              // per frame
    LossBreakdown breakdown;
};

/// Evaluates the total objective over a sequence. Target-cloud NN indices are
/// built once at construction; indices over moving sets are rebuilt per call.
class SequenceEvaluator {
public:
    SequenceEvaluator(const PointCloudSequence& seq, const TriMesh& topology, EvalOptions opts);

    const ForwardEval& evaluate(const GridSequence& grids, std::span<const Vec3> verts,
                                const ConfidenceState& conf);

    /// Re-evaluates the objective with correspondences, robust weights,
    /// cd_max, and confidence weights frozen from the last evaluate() call:
    /// the function the backward pass differentiates.
    double evaluate_frozen(const GridSequence& grids, std::span<const Vec3> verts) const;

    const ForwardEval& last() const { return eval_; }
    const PointCloudSequence& sequence() const { return *seq_; }
    const TriMesh& topology() const { return *topo_; }
    const EvalOptions& options() const { return opts_; }
    const GridSequence& last_grids() const { return *last_grids_; }

private:
    void deform_chain(const GridSequence& grids, std::span<const Vec3> verts, int direction_sign);
    void frame_terms(const GridSequence& grids, int frame);

    const PointCloudSequence* seq_;
    const TriMesh* topo_;
    EvalOptions opts_;
    std::vector<NnIndex> frame_index_;
    ForwardEval eval_;
    const GridSequence* last_grids_ = nullptr;
};

/// CD_R between the template vertices and the keyframe cloud.
double mesh_loss(std::span<const Vec3> verts, std::span<const Vec3> keyframe_cloud,
                 const RobustChamferParams& params = {});

struct TransformLossDiagnostics {
    std::vector<double> frame_cd;
    std::vector<double> frame_cloud_cd;
    std::vector<double> frame_confidence;
    double cd_max = 0.0;
};

double transform_loss(const GridSequence& grids, const TriMesh& topology,
                      std::span<const Vec3> verts, const PointCloudSequence& seq,
                      const ConfidenceState& conf, TransformLossDiagnostics* diag = nullptr,
                      const RobustChamferParams& params = {});

/// max over transitions of CD_R(one-step transported cloud, target cloud);
/// a pure value outside any differentiation path.
double compute_cd_max(const GridSequence& grids, const PointCloudSequence& seq,
                      const RobustChamferParams& params = {});

/// Mean absolute frame-to-frame edge-length change of the deformed template,
/// consecutive pairs enumerated outward from the keyframe.
double isometry_loss(const GridSequence& grids, const TriMesh& topology,
                     std::span<const Vec3> verts);

/// Same quantity on explicit per-frame vertex positions.
double isometry_from_positions(const TriMesh& topology,
                               std::span<const std::vector<Vec3>> positions, int keyframe);

LossBreakdown total_loss(const GridSequence& grids, const TriMesh& topology,
                         std::span<const Vec3> verts, const PointCloudSequence& seq,
                         const ConfidenceState& conf, const EvalOptions& opts = {});

}  // namespace defgrid
