#include "grw/scale_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "grw/csv.hpp"
#include "grw/rng.hpp"

namespace grw {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

constexpr int kMaxEnumFrames = 12;  // 11! ~ 4e7 ordering visits per pass

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Visits every ordering of positions {0..T-1} with 0 pinned first,
// lexicographically, identity first. O(T) memory.
template <class F>
void for_each_ordering(int T, F&& f) {
    std::vector<int> p(static_cast<std::size_t>(T));
    std::iota(p.begin(), p.end(), 0);
    do {
        f(p);
    } while (std::next_permutation(p.begin() + 1, p.end()));
}

double quad(const std::vector<double>& z, const std::vector<int>& p) {
    double s = 0.0;
    for (std::size_t t = 0; t + 2 < p.size(); ++t) {
        const double a = z[static_cast<std::size_t>(p[t + 2])] -
                         2.0 * z[static_cast<std::size_t>(p[t + 1])] +
                         z[static_cast<std::size_t>(p[t])];
        s += a * a;
    }
    return s;
}

struct OnlineLse {
    double m = -std::numeric_limits<double>::infinity();
    double s = 0.0;

    void add(double x) {
        if (x <= m) {
            s += std::exp(x - m);
        } else {
            s = s * std::exp(m - x) + 1.0;
            m = x;
        }
    }
    double value() const { return m + std::log(s); }
};

void check_enumerable(int T) {
    if (T < 3) fail("the ordering term needs at least 3 frames");
    if (T > kMaxEnumFrames)
        fail("T = " + std::to_string(T) + " exceeds the enumeration limit of " +
             std::to_string(kMaxEnumFrames));
}

}  // namespace

void Config1D::validate() const {
    if (z.size() < 2) fail("a 1-D configuration needs at least 2 frames");
    if (z[0] != 0.0) fail("the first frame must sit at 0");
    for (std::size_t i = 0; i + 1 < z.size(); ++i)
        if (z[i + 1] < z[i]) fail("frames must be non-decreasing");
    for (double v : z)
        if (!std::isfinite(v)) fail("non-finite frame");
}

double velocity_loss_1d(const Config1D& cfg) {
    cfg.validate();
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cfg.z.size(); ++i) {
        const double v = cfg.z[i + 1] - cfg.z[i];
        s += v * v;
    }
    return 0.5 * s;
}

Loss1D loss_1d(const Config1D& cfg) {
    cfg.validate();
    const int T = cfg.frames();
    check_enumerable(T);
    OnlineLse lse;
    double ell_id = 0.0;
    bool first = true;
    for_each_ordering(T, [&](const std::vector<int>& p) {
        const double ell = -0.5 * quad(cfg.z, p);
        if (first) {
            ell_id = ell;
            first = false;
        }
        lse.add(ell);
    });
    Loss1D out;
    out.accel = lse.value() - ell_id;
    out.vel = velocity_loss_1d(cfg);
    out.total = out.accel + out.vel;
    return out;
}

std::vector<double> loss_1d_gradient(const Config1D& cfg) {
    cfg.validate();
    const int T = cfg.frames();
    check_enumerable(T);

    OnlineLse lse;
    for_each_ordering(T, [&](const std::vector<int>& p) { lse.add(-0.5 * quad(cfg.z, p)); });
    const double l = lse.value();

    std::vector<double> grad(static_cast<std::size_t>(T), 0.0);
    bool first = true;
    for_each_ordering(T, [&](const std::vector<int>& p) {
        const double ell = -0.5 * quad(cfg.z, p);
        const double g = std::exp(ell - l) - (first ? 1.0 : 0.0);
        first = false;
        if (g == 0.0) return;
        for (std::size_t t = 0; t + 2 < p.size(); ++t) {
            const std::size_t i0 = static_cast<std::size_t>(p[t]);
            const std::size_t i1 = static_cast<std::size_t>(p[t + 1]);
            const std::size_t i2 = static_cast<std::size_t>(p[t + 2]);
            const double a = cfg.z[i2] - 2.0 * cfg.z[i1] + cfg.z[i0];
            const double e = g * a;
            grad[i0] -= e;
            grad[i1] += 2.0 * e;
            grad[i2] -= e;
        }
    });
    for (std::size_t i = 0; i + 1 < cfg.z.size(); ++i) {
        const double v = cfg.z[i + 1] - cfg.z[i];
        grad[i + 1] += v;
        grad[i] -= v;
    }
    return grad;
}

Config1D uniform_config(int T, double R) {
    if (T < 2) fail("a 1-D configuration needs at least 2 frames");
    if (R < 0.0) fail("extent must be non-negative");
    Config1D cfg;
    cfg.z.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t)
        cfg.z[static_cast<std::size_t>(t)] = static_cast<double>(t) * R / static_cast<double>(T - 1);
    return cfg;
}

bool check_lower_bound(const Config1D& cfg, double tol) {
    const double l = loss_1d(cfg).total;
    const double r = cfg.extent();
    const double bound = r * r / (2.0 * static_cast<double>(cfg.frames() - 1));
    return l >= bound - tol;
}

namespace {

struct RestartResult {
    std::vector<double> z;
    double loss = std::numeric_limits<double>::infinity();
    bool converged = false;
    int steps = 0;
};

std::vector<double> positions_from(const std::vector<double>& u) {
    std::vector<double> z(u.size() + 1, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) z[i + 1] = z[i] + softplus(u[i]);
    return z;
}

RestartResult run_restart(int T, int max_steps, Rng rng) {
    const int m = T - 1;
    std::vector<double> u(static_cast<std::size_t>(m));
    // half the starts hug the uniform unit spacing, half scatter widely
    const double unit = std::log(std::exp(1.0) - 1.0);  // softplus(unit) == 1
    const bool near_uniform = uniform_u64(rng, 2) == 0;
    for (double& v : u) v = near_uniform ? unit + 0.3 * gauss(rng) : 1.5 * gauss(rng);

    auto eval = [](const std::vector<double>& uu, Config1D& cfg) {
        cfg.z = positions_from(uu);
        return loss_1d(cfg).total;
    };

    Config1D cfg;
    double loss = eval(u, cfg);
    std::vector<double> dz, du(static_cast<std::size_t>(m)), vel(static_cast<std::size_t>(m), 0.0);
    bool grad_fresh = false;
    double lr = 0.05;
    const double mu = 0.9;
    int streak = 0;
    RestartResult res;

    int step = 0;
    for (; step < max_steps; ++step) {
        if (!grad_fresh) {
            dz = loss_1d_gradient(cfg);
            // chain through z = cumsum(softplus(u)): du_j = sigmoid(u_j) * sum_{i>j} dz_i
            double suffix = 0.0;
            for (int j = m - 1; j >= 0; --j) {
                suffix += dz[static_cast<std::size_t>(j) + 1];
                du[static_cast<std::size_t>(j)] = sigmoid(u[static_cast<std::size_t>(j)]) * suffix;
            }
            grad_fresh = true;
        }
        std::vector<double> u_next(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            vel[static_cast<std::size_t>(j)] =
                mu * vel[static_cast<std::size_t>(j)] - lr * du[static_cast<std::size_t>(j)];
            u_next[static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(j)] + vel[static_cast<std::size_t>(j)];
        }
        Config1D cfg_next;
        const double loss_next = eval(u_next, cfg_next);
        if (!std::isfinite(loss_next) || loss_next > loss) {
            // overshoot: stay put, shorten the step, drop the momentum
            lr *= 0.5;
            std::fill(vel.begin(), vel.end(), 0.0);
            streak = 0;
            if (lr < 1e-14) break;  // the step size collapsed; nothing left to gain
            continue;
        }
        const double delta = loss - loss_next;
        u = std::move(u_next);
        cfg = std::move(cfg_next);
        loss = loss_next;
        lr = std::min(lr * 1.02, 1.0);
        grad_fresh = false;
        if (delta < 1e-10) {
            if (++streak >= 3) {
                res.converged = true;
                ++step;
                break;
            }
        } else {
            streak = 0;
        }
    }
    res.z = cfg.z;
    res.loss = loss;
    res.steps = step;
    if (lr < 1e-14) res.converged = true;  // stalled at machine precision
    return res;
}

}  // namespace

MinimizeResult minimize_config(int T, const MinimizeOptions& opts) {
    check_enumerable(T);
    if (opts.restarts < 1) fail("need at least one restart");
    if (opts.steps < 1) fail("need a positive step budget");

    MinimizeResult best;
    best.loss = std::numeric_limits<double>::infinity();
    best.restarts = opts.restarts;
    for (int r = 0; r < opts.restarts; ++r) {
        const std::uint64_t s =
            derive_seed(opts.seed, "scale/T=" + std::to_string(T) + "/restart=" + std::to_string(r));
        RestartResult run = run_restart(T, opts.steps, Rng(s));
        if (run.loss < best.loss) {
            best.loss = run.loss;
            best.config.z = run.z;
            best.converged = run.converged;
            best.steps_used = run.steps;
        }
    }
    best.extent = best.config.extent();
    return best;
}

std::vector<ScaleStudyRow> scaling_study(int t_min, int t_max, const MinimizeOptions& opts) {
    if (t_min < 3 || t_min > t_max || t_max > kMaxEnumFrames)
        fail("study range must satisfy 3 <= T_min <= T_max <= " + std::to_string(kMaxEnumFrames));
    std::vector<ScaleStudyRow> rows;
    for (int T = t_min; T <= t_max; ++T) {
        const MinimizeResult res = minimize_config(T, opts);
        ScaleStudyRow row;
        row.T = T;
        row.r_star = res.extent;
        row.l_star = res.loss;
        row.ratio = res.extent / (static_cast<double>(T) * std::sqrt(std::log(static_cast<double>(T))));
        row.bound_uniform = loss_1d(uniform_config(T, static_cast<double>(T - 1))).total;
        row.lower_bound_ok = check_lower_bound(res.config);
        row.converged = res.converged;
        row.restarts = res.restarts;
        rows.push_back(row);
    }
    return rows;
}

std::string scale_study_csv(const std::vector<ScaleStudyRow>& rows) {
    std::string out = csv_row({"T", "R_star", "L_star", "ratio", "bound_uniform", "lower_bound_ok"});
    for (const ScaleStudyRow& r : rows)
        out += csv_row({std::to_string(r.T), csv_num(r.r_star), csv_num(r.l_star), csv_num(r.ratio),
                        csv_num(r.bound_uniform), r.lower_bound_ok ? "1" : "0"});
    return out;
}

}  // namespace grw
