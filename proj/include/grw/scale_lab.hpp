#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace grw {

// One-dimensional study of how far apart a smoothness-optimal embedding
// spreads its frames. Everything here works on monotone scalar configurations
// with the first frame pinned at zero, using the alpha = 1 objective
// L = L_a + L_v over all frame orderings that fix the first position.

struct Config1D {
    std::vector<double> z;  // non-decreasing, z[0] == 0

    double extent() const { return z.empty() ? 0.0 : z.back(); }
    int frames() const { return static_cast<int>(z.size()); }
    void validate() const;
};

struct Loss1D {
    double accel = 0.0;  // ordering term: lse over orderings minus the identity's
    double vel = 0.0;    // 0.5 * sum of squared steps
    double total = 0.0;  // accel + vel
};

// Velocity part alone; no enumeration, any T >= 2.
double velocity_loss_1d(const Config1D& cfg);

// Full objective by streaming enumeration of all (T-1)! orderings.
// Supported for T <= 12; memory stays O(T).
Loss1D loss_1d(const Config1D& cfg);

// Analytic dL/dz (same enumeration, two streaming passes).
std::vector<double> loss_1d_gradient(const Config1D& cfg);

// z_t = (t-1) * R / (T-1)
Config1D uniform_config(int T, double R);

// L(cfg) >= extent^2 / (2(T-1)) - tol, the uniform lower bound.
bool check_lower_bound(const Config1D& cfg, double tol = 1e-10);

struct MinimizeOptions {
    int restarts = 20;
    int steps = 5000;
    std::uint64_t seed = 0;
};

struct MinimizeResult {
    Config1D config;
    double extent = 0.0;   // R at the minimizer
    double loss = 0.0;
    bool converged = false;  // best restart hit the loss-delta floor in budget
    int steps_used = 0;      // steps taken by the winning restart
    int restarts = 0;
};

// Gradient descent in unconstrained coordinates u with z = cumsum(softplus(u)),
// which bakes in monotonicity and the pinned first frame. Momentum plus a
// bold-driver step size (grow on improvement, halve and revert on overshoot);
// converged when the accepted-loss delta stays under 1e-10. Best of
// `restarts` seeded runs; non-convergence is reported, not fatal.
MinimizeResult minimize_config(int T, const MinimizeOptions& opts = {});

struct ScaleStudyRow {
    int T = 0;
    double r_star = 0.0;
    double l_star = 0.0;
    double ratio = 0.0;          // r_star / (T * sqrt(log T))
    double bound_uniform = 0.0;  // loss of the uniform config at R = T-1
    bool lower_bound_ok = false;
    bool converged = false;
    int restarts = 0;
};

std::vector<ScaleStudyRow> scaling_study(int t_min, int t_max, const MinimizeOptions& opts = {});

// Header: T,R_star,L_star,ratio,bound_uniform,lower_bound_ok
std::string scale_study_csv(const std::vector<ScaleStudyRow>& rows);

}  // namespace grw
