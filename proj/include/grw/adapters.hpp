#pragma once

#include <cstdint>
#include <vector>

#include "grw/rng.hpp"
#include "grw/tensor.hpp"

namespace grw {

// Two ways of turning model activations into an embedding sequence the
// smoothing loss can consume: pooling + standardization for intermediate
// layers, and a learnable affine map + small attention head for the final one.

// ---- intermediate placement --------------------------------------------------

// Mean over the trailing (flattened-space) axis of a channels x time x space
// tensor, leaving channels x time.
Tensor global_pool(const Tensor& x);
Var global_pool(Var x);

// Per-channel standardization over the whole batch and all time steps:
// subtract the mean, divide by sqrt(var + eps) (no learnable shift/scale),
// then multiply by 1/sqrt(C) so a time-step vector has mean squared norm ~1.
// Each batch entry is channels x time; at least two samples per channel.
std::vector<Tensor> batch_standardize(const std::vector<Tensor>& batch, double eps = 1e-5);

// Same operation in the layout the trainer uses: x is samples x channels
// (all frames of the batch stacked), statistics per column. One fused node.
Var batch_standardize(Var x, double eps = 1e-5);

// ---- final placement -----------------------------------------------------------

struct AffineNormalizer {
    Tensor weight;  // d_out x d_in
    Tensor bias;    // d_out

    static AffineNormalizer identity(int d);
    static AffineNormalizer init(int d_out, int d_in, Rng& rng);
};

// Per-time-step affine map of an N x d_in sequence: rows z_t -> W z_t + b.
Tensor affine_embed(const Tensor& z, const AffineNormalizer& norm);
Var affine_embed(Var z, Var weight, Var bias);

// ---- attention head --------------------------------------------------------------

struct TemporalHeadConfig {
    int dim = 16;    // token width d
    int classes = 3;
    int blocks = 2;  // 1 or 2

    void validate() const;
};

// One block: single-head self-attention and a 2-layer MLP with x4 expansion,
// both with residual paths.
struct AttentionBlock {
    Tensor wq, wk, wv, wo;  // d x d
    Tensor w1;              // 4d x d
    Tensor b1;              // 4d
    Tensor w2;              // d x 4d
    Tensor b2;              // d
};

struct TemporalHead {
    TemporalHeadConfig cfg;
    std::vector<AttentionBlock> blocks;
    Tensor wc;  // classes x d
    Tensor bc;  // classes
};

TemporalHead init_head(const TemporalHeadConfig& cfg, Rng& rng);

// Stable parameter order, matching HeadVars::all(); used by optimizers.
std::vector<Tensor*> head_params(TemporalHead& head);

// Tape-resident view of the head's parameters.
struct BlockVars {
    Var wq, wk, wv, wo, w1, b1, w2, b2;
};
struct HeadVars {
    int dim = 0;
    std::vector<BlockVars> blocks;
    Var wc, bc;

    std::vector<Var> all() const;
};

HeadVars lift_head(Tape& t, const TemporalHead& head, bool trainable);

// Attention over time (softmax rows, scaled by 1/sqrt(d)), residual, MLP,
// residual, repeated per block; mean-pool over time; linear classifier.
// No positional encoding: temporal order is the smoothing loss's concern,
// so the head reads geometry only. Returns a length-classes logit vector.
Var head_forward(Var z, const HeadVars& head);
Tensor head_forward(const Tensor& z, const TemporalHead& head);

}  // namespace grw
