#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace grw {

// Batch gradient verification for the smoothing and total losses: analytic
// tape gradients against central finite differences over a (T, d) grid of
// random draws. The `corrupt` hook perturbs one analytic entry so the
// checker itself can be shown to fail (negative control).

struct GradCheckOptions {
    int t_min = 3;
    int t_max = 7;
    std::vector<int> dims = {1, 4, 16};
    int draws = 20;
    double eps = 1e-5;
    double tol = 1e-5;
    std::uint64_t seed = 0;
    bool corrupt = false;

    void validate() const;  // 3 <= t_min <= t_max <= 10, dims/draws/eps/tol positive
};

struct GradCheckCell {
    int T = 0;
    int d = 0;
    double max_rel_smooth = 0.0;  // worst over draws and coordinates
    double max_rel_total = 0.0;
    bool ok = true;
};

struct GradCheckSummary {
    GradCheckOptions opts;
    std::vector<GradCheckCell> cells;
    double max_rel_err = 0.0;
    bool pass = false;
};

GradCheckSummary run_grad_checks(const GradCheckOptions& opts = {});

// Human-readable table echoing eps/tol, one row per (T, d), PASS/FAIL tail.
std::string grad_check_report(const GradCheckSummary& s);

}  // namespace grw
