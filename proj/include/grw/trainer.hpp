#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "grw/adapters.hpp"
#include "grw/grw_loss.hpp"
#include "grw/synthgen.hpp"
#include "grw/tensor.hpp"

namespace grw {

// Toy pipeline: per-frame MLP encoder -> learnable affine embedding -> small
// attention head, optionally regularized by the order-contrastive smoothing
// loss attached either at the final embedding or at a batch-standardized
// intermediate layer. The classification path is identical for every
// placement; the placement only decides where (and whether) the smoothing
// loss taps in.

enum class Placement { final_layer, intermediate, none };

const char* placement_name(Placement p);  // "final", "intermediate", "none"
Placement placement_from_name(const std::string& name);

struct ModelConfig {
    std::vector<int> encoder_hidden = {32};  // at least one hidden layer
    int embed_dim = 16;                      // d, >= 2
    int head_blocks = 2;                     // 1 or 2
    int classes = 3;
    Placement placement = Placement::final_layer;

    void validate() const;
};

struct Model {
    ModelConfig cfg;
    int input_dim = 0;
    std::vector<Tensor> enc_w;  // hidden layers then the linear embedding layer
    std::vector<Tensor> enc_b;
    AffineNormalizer affine;  // d -> d, feeds both the head and the final-site loss
    TemporalHead head;
};

Model init_model(const ModelConfig& cfg, int input_dim, std::uint64_t seed);

// Stable parameter order: encoder (w, b per layer), affine, then head.
// The first backbone_param_count() entries form the backbone learning-rate
// group; the rest belong to the head group.
std::vector<Tensor*> model_params(Model& m);
int backbone_param_count(const Model& m);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double lr_backbone_start = 0.015;  // cosine-decayed per epoch
    double lr_backbone_end = 1e-3;
    double lr_head_start = 0.0075;
    double lr_head_end = 1e-3;
    double momentum = 0.9;
    GrwConfig grw;  // lambda = 0 switches the smoothing term off entirely
    std::uint64_t seed = 0;

    void validate() const;
};

// Thrown when a training step produces a non-finite loss.
struct divergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EvalStats {
    double accuracy = 0.0;
    double mean_sq_accel = 0.0;  // mean over clips of mean ||second difference||^2
    double mean_sq_speed = 0.0;  // mean over clips of mean ||first difference||^2
};

struct EpochRow {
    int epoch = 0;
    double train_total = 0.0;
    double train_ce = 0.0;
    double train_smooth = 0.0;  // 0 when the smoothing term is off
    double test_accuracy = 0.0;
    double mean_sq_accel = 0.0;
    double mean_sq_speed = 0.0;
    double lr_backbone = 0.0;
    double lr_head = 0.0;
};

struct PcaResult {
    Tensor coords;                    // N x k projections
    Tensor components;                // d x k eigenvectors, each with its
                                      // largest-magnitude coordinate positive
    std::vector<double> eigenvalues;  // all d, descending
    int rank = 0;                     // eigenvalues above 1e-12 * largest
};

// Eigendecomposition of the sample covariance (cyclic Jacobi), top-k
// projection of the centered data. Needs >= 2 rows and >= 2 columns.
PcaResult pca_project(const Tensor& x, int components = 2);

struct RunMetrics {
    std::vector<EpochRow> epochs;
    EvalStats final_eval;
    PcaResult pca;  // per-frame test embeddings at the smoothing site
    std::vector<int> pca_clip;
    std::vector<int> pca_frame;
    std::vector<int> pca_label;
};

// Momentum descent over shuffled batches with two cosine-decayed
// learning-rate groups. Deterministic given (seed, config, dataset);
// placement = none and lambda = 0 take bit-identical trajectories.
RunMetrics train(Model& model, const DatasetSplit& data, const TrainConfig& cfg);

EvalStats evaluate(const Model& model, const std::vector<MotionClip>& clips);

// Per-frame embeddings at the smoothing site, clips stacked in order:
// the affine output for final/none, the batch-standardized last hidden
// layer for intermediate. (N * M) x d_site.
Tensor site_embeddings(const Model& model, const std::vector<MotionClip>& clips);

std::string metrics_csv(const RunMetrics& m);
std::string pca_csv(const RunMetrics& m);

// Versioned checkpoint: model config + every parameter tensor, little-endian.
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

// config.json (caller-provided resolved config), metrics.csv, pca.csv,
// checkpoint.bin under `dir` (created if missing).
void write_run_dir(const std::string& dir, const Model& m, const std::string& config_json,
                   const RunMetrics& metrics);

struct SweepRow {
    std::string axis;
    double value = 0.0;
    double test_accuracy = 0.0;
    double mean_sq_accel = 0.0;
    double mean_sq_speed = 0.0;
    double train_total = 0.0;
};

// One fresh train + evaluate per value of axis "T", "alpha", or "lambda",
// all other settings and the seed held fixed.
std::vector<SweepRow> ablation_sweep(const std::string& axis, const std::vector<double>& values,
                                     const ModelConfig& mcfg, const TrainConfig& tcfg,
                                     const DatasetSplit& data);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace grw
