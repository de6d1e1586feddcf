#include "grw/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "grw/grw_loss.hpp"
#include "grw/rng.hpp"
#include "grw/tensor.hpp"

namespace grw {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("gradcheck: " + msg); }

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    return std::fabs(analytic - numeric) / denom;
}

// One random draw: joint gradient of total_loss(logits, labels, z) with
// respect to both inputs, plus the gradient of smooth_loss(z) alone. Every
// loss evaluation reseeds its ordering stream identically, so the sampled
// orderings match between the analytic pass and every finite-difference
// probe.
struct DrawResult {
    double rel_smooth = 0.0;
    double rel_total = 0.0;
};

DrawResult check_one_draw(int T, int d, const GradCheckOptions& opts, std::uint64_t draw_seed) {
    GrwConfig cfg;
    cfg.T = T;

    const int rows = 2 * T;  // two windows, exercises the window mean
    const int batch = 4, classes = 3;
    Rng rng(draw_seed);
    const Tensor z = randn({rows, d}, rng);
    const Tensor logits = randn({batch, classes}, rng);
    std::vector<int> labels(batch);
    for (int& l : labels) l = static_cast<int>(uniform_u64(rng, classes));
    const std::uint64_t order_seed = rng();

    const auto smooth_val = [&](const Tensor& zz) {
        Rng r(order_seed);
        return smooth_loss(zz, cfg, r).smooth;
    };
    const auto total_val = [&](const Tensor& ll, const Tensor& zz) {
        Rng r(order_seed);
        return total_loss(ll, labels, zz, cfg, r).total;
    };

    // analytic gradients
    Tensor g_smooth, g_total_z, g_total_logits;
    {
        Tape t;
        Var zv = t.leaf(z, true);
        Rng r(order_seed);
        t.backward(smooth_loss(zv, cfg, r));
        g_smooth = zv.grad();
    }
    {
        Tape t;
        Var zv = t.leaf(z, true);
        Var lv = t.leaf(logits, true);
        Rng r(order_seed);
        t.backward(total_loss(lv, labels, zv, cfg, r));
        g_total_z = zv.grad();
        g_total_logits = lv.grad();
    }
    if (opts.corrupt) {
        g_smooth.data()[0] += 0.01 * (1.0 + std::fabs(g_smooth.data()[0]));
        g_total_z.data()[0] += 0.01 * (1.0 + std::fabs(g_total_z.data()[0]));
    }

    DrawResult res;
    const auto probe = [&](const Tensor& x, std::size_t i, auto&& f) {
        Tensor hi = x, lo = x;
        hi.data()[i] += opts.eps;
        lo.data()[i] -= opts.eps;
        return (f(hi) - f(lo)) / (2.0 * opts.eps);
    };
    for (std::size_t i = 0; i < z.numel(); ++i) {
        const double n_s = probe(z, i, smooth_val);
        const double n_t = probe(z, i, [&](const Tensor& zz) { return total_val(logits, zz); });
        res.rel_smooth = std::max(res.rel_smooth, rel_err(g_smooth.data()[i], n_s));
        res.rel_total = std::max(res.rel_total, rel_err(g_total_z.data()[i], n_t));
    }
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        const double n_t = probe(logits, i, [&](const Tensor& ll) { return total_val(ll, z); });
        res.rel_total = std::max(res.rel_total, rel_err(g_total_logits.data()[i], n_t));
    }
    return res;
}

}  // namespace

void GradCheckOptions::validate() const {
    if (t_min < 3) fail("t_min must be >= 3");
    if (t_min > t_max) fail("t_min must not exceed t_max");
    if (t_max > 10) fail("t_max must be <= 10");
    if (dims.empty()) fail("dims must be non-empty");
    for (int d : dims)
        if (d < 1) fail("dims must be positive");
    if (draws < 1) fail("draws must be >= 1");
    if (!(eps > 0.0)) fail("eps must be positive");
    if (!(tol > 0.0)) fail("tol must be positive");
}

GradCheckSummary run_grad_checks(const GradCheckOptions& opts) {
    opts.validate();
    GradCheckSummary s;
    s.opts = opts;
    for (int T = opts.t_min; T <= opts.t_max; ++T) {
        for (int d : opts.dims) {
            GradCheckCell cell;
            cell.T = T;
            cell.d = d;
            for (int draw = 0; draw < opts.draws; ++draw) {
                const std::string tag = "gradcheck/T=" + std::to_string(T) +
                                        "/d=" + std::to_string(d) +
                                        "/draw=" + std::to_string(draw);
                const DrawResult r = check_one_draw(T, d, opts, derive_seed(opts.seed, tag));
                cell.max_rel_smooth = std::max(cell.max_rel_smooth, r.rel_smooth);
                cell.max_rel_total = std::max(cell.max_rel_total, r.rel_total);
            }
            cell.ok = cell.max_rel_smooth < opts.tol && cell.max_rel_total < opts.tol;
            s.max_rel_err = std::max({s.max_rel_err, cell.max_rel_smooth, cell.max_rel_total});
            s.cells.push_back(cell);
        }
    }
    s.pass = std::all_of(s.cells.begin(), s.cells.end(),
                         [](const GradCheckCell& c) { return c.ok; });
    return s;
}

std::string grad_check_report(const GradCheckSummary& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "grad check: eps=%g tol=%g draws=%d seed=%llu\n", s.opts.eps,
                  s.opts.tol, s.opts.draws, static_cast<unsigned long long>(s.opts.seed));
    std::string out = buf;
    for (const GradCheckCell& c : s.cells) {
        std::snprintf(buf, sizeof buf, "  T=%-2d d=%-3d max_rel smooth=%.3e total=%.3e  %s\n",
                      c.T, c.d, c.max_rel_smooth, c.max_rel_total, c.ok ? "ok" : "FAIL");
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "max_rel_err=%.3e  %s\n", s.max_rel_err,
                  s.pass ? "PASS" : "FAIL");
    out += buf;
    return out;
}

}  // namespace grw
