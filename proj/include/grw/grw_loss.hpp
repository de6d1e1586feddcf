#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "grw/rng.hpp"
#include "grw/tensor.hpp"

namespace grw {

// An embedding sequence is a rank-2 tensor, time steps x dimensions. A window
// (sub-clip) is a contiguous T-row slice of one.

// Frame ordering of a length-T window: row i of the reordered window is row
// perm[i] of the original. perm[0] == 0 always (the first frame is pinned).
using Permutation = std::vector<int>;

struct GrwConfig {
    int T = 5;             // window length in frames
    double alpha = 0.5;    // weight of the speed-control term
    double lambda = 0.1;   // weight of the smoothing term in the total objective
    int k = 1000;          // ordering sample budget when enumeration is too big
    std::uint64_t seed = 0;

    void validate() const;  // T >= 3, alpha >= 0, lambda >= 0, k >= 1
};

// All orderings are enumerated while (T-1)! stays within max(k, kOrderingEnumCap);
// past that the denominator is sampled.
inline constexpr std::uint64_t kOrderingEnumCap = 1000;

struct LossBreakdown {
    double contrastive = 0.0;  // mean ordering loss over windows, always >= 0
    double omega = 0.0;        // -alpha * mean speed log-density (as it enters smooth)
    double smooth = 0.0;       // contrastive + omega
    double ce = 0.0;
    double total = 0.0;        // ce + lambda * smooth
};

// Differentiable counterpart of the smoothing part of the breakdown.
struct SmoothTerms {
    Var contrastive;
    Var omega;
    Var smooth;
};

// ---- windowing and finite differences --------------------------------------
// Splits a sequence into floor(N/T) disjoint T-row windows; trailing rows are
// dropped. Requires N >= T and T >= 3.
std::vector<Tensor> split_subclips(const Tensor& z, int T);
std::vector<Var> split_subclips(Var z, int T);

Tensor velocities(const Tensor& window);       // rows z[t+1] - z[t]
Var velocities(Var window);
Tensor accelerations(const Tensor& window);    // rows z[t+2] - 2 z[t+1] + z[t]
Var accelerations(Var window);

// Log density of i.i.d. standard-normal rows, additive constants dropped:
// -0.5 * sum of squared entries.
double log_density(const Tensor& m);
Var log_density(Var m);

// ---- orderings ---------------------------------------------------------------

// All (T-1)! orderings of a T-frame window, identity first, lexicographic.
// Throws when (T-1)! exceeds 1e6; sample instead at that scale.
std::vector<Permutation> enumerate_orderings(int T);

// Identity, then k orderings drawn uniformly without replacement from the
// non-identity set. When k covers that whole set this returns exactly
// enumerate_orderings(T). Deterministic given the rng state.
std::vector<Permutation> sample_orderings(int T, int k, Rng& rng);

// Enumerates or samples per the budget rule above.
std::vector<Permutation> choose_orderings(const GrwConfig& cfg, Rng& rng);

Tensor apply_ordering(const Tensor& window, const Permutation& perm);
Var apply_ordering(Var window, const Permutation& perm);

// ---- loss terms ----------------------------------------------------------------

// log_sum_exp over orderings of the acceleration log-densities, minus the
// identity's. orderings[0] must be the identity and all entries distinct.
// Always >= 0. The Var form records one fused node that works on the window's
// Gram matrix, so its cost does not scale with d per ordering.
double contrastive_order_loss(const Tensor& window, const std::vector<Permutation>& orderings);
Var contrastive_order_loss(Var window, const std::vector<Permutation>& orderings);
Var contrastive_order_loss(Var window, std::shared_ptr<const std::vector<Permutation>> orderings);

// Same value built from the generic primitives; exists to cross-check the
// fused node and as a readable statement of the formula.
Var contrastive_order_loss_composed(Var window, const std::vector<Permutation>& orderings);

// Speed control term: log_density(velocities(window)).
double omega(const Tensor& window);
Var omega(Var window);

// ---- assembled losses ------------------------------------------------------------

// Mean over every window of every sequence of
//   contrastive_order_loss(w) - alpha * omega(w),
// with one shared ordering set per call.
SmoothTerms smooth_terms(const std::vector<Var>& sequences,
                         std::shared_ptr<const std::vector<Permutation>> orderings,
                         const GrwConfig& cfg);

Var smooth_loss(Var z, const GrwConfig& cfg, Rng& rng);
LossBreakdown smooth_loss(const Tensor& z, const GrwConfig& cfg, Rng& rng);
LossBreakdown smooth_loss(const Tensor& z, const GrwConfig& cfg);  // rng from cfg.seed

// total = ce + lambda * smooth, with ce the mean softmax cross-entropy.
Var total_loss(Var logits, const std::vector<int>& labels, Var z, const GrwConfig& cfg,
               Rng& rng);
LossBreakdown total_loss(const Tensor& logits, const std::vector<int>& labels, const Tensor& z,
                         const GrwConfig& cfg, Rng& rng);
LossBreakdown total_loss(const Tensor& logits, const std::vector<int>& labels, const Tensor& z,
                         const GrwConfig& cfg);

// smooth_loss of s*z: the loss under an inverse-temperature rescaling of the
// embedding. Requires s > 0.
LossBreakdown scaled_loss(const Tensor& z, double s, const GrwConfig& cfg);

// n! capped so it never overflows; saturates at 2^63.
std::uint64_t saturating_factorial(int n);

}  // namespace grw
