#include "grw/grw_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_set>

namespace grw {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void check_sequence(const Tensor& z) {
    if (z.rank() != 2) fail("embedding sequence must be rank-2 (time x dim)");
    if (z.rows() < 1 || z.cols() < 1) fail("embedding sequence must be non-empty");
}

void check_permutation(const Permutation& p, int T) {
    if (static_cast<int>(p.size()) != T) fail("ordering length does not match the window");
    if (p[0] != 0) fail("ordering must pin position 0");
    std::vector<char> seen(static_cast<std::size_t>(T), 0);
    for (int v : p) {
        if (v < 0 || v >= T || seen[static_cast<std::size_t>(v)]) fail("ordering is not a bijection");
        seen[static_cast<std::size_t>(v)] = 1;
    }
}

bool is_identity(const Permutation& p) {
    for (int i = 0; i < static_cast<int>(p.size()); ++i)
        if (p[static_cast<std::size_t>(i)] != i) return false;
    return true;
}

void check_orderings(const std::vector<Permutation>& ords, int T) {
    if (ords.size() < 2) fail("need at least two orderings (identity plus one alternative)");
    if (!is_identity(ords[0])) fail("orderings[0] must be the identity");
    std::set<Permutation> uniq;
    for (const Permutation& p : ords) {
        check_permutation(p, T);
        if (!uniq.insert(p).second) fail("orderings must be distinct");
    }
}

// T x T Gram matrix of T consecutive rows starting at base.
std::vector<double> gram_rows(const double* base, int T, int d) {
    std::vector<double> g(static_cast<std::size_t>(T) * T);
    for (int i = 0; i < T; ++i) {
        const double* ri = base + static_cast<std::size_t>(i) * d;
        for (int j = i; j < T; ++j) {
            const double* rj = base + static_cast<std::size_t>(j) * d;
            double s = 0.0;
            for (int c = 0; c < d; ++c) s += ri[c] * rj[c];
            g[static_cast<std::size_t>(i) * T + j] = s;
            g[static_cast<std::size_t>(j) * T + i] = s;
        }
    }
    return g;
}

std::vector<double> gram(const Tensor& z) {
    return gram_rows(z.data(), z.rows(), z.cols());
}

// Sum over the window of the squared second difference under an ordering,
// read off the Gram matrix: with (a,b,c) consecutive positions,
// ||z_c - 2 z_b + z_a||^2 = G_aa + 4 G_bb + G_cc - 4 G_ab - 4 G_bc + 2 G_ac.
double quad_sum(const std::vector<double>& g, int T, const Permutation& p) {
    double s = 0.0;
    for (int t = 0; t + 2 < T; ++t) {
        const int a = p[static_cast<std::size_t>(t)];
        const int b = p[static_cast<std::size_t>(t) + 1];
        const int c = p[static_cast<std::size_t>(t) + 2];
        s += g[static_cast<std::size_t>(a) * T + a] + 4.0 * g[static_cast<std::size_t>(b) * T + b] +
             g[static_cast<std::size_t>(c) * T + c] - 4.0 * g[static_cast<std::size_t>(a) * T + b] -
             4.0 * g[static_cast<std::size_t>(b) * T + c] + 2.0 * g[static_cast<std::size_t>(a) * T + c];
    }
    return s;
}

std::vector<double> ordering_log_densities(const std::vector<double>& g, int T,
                                           const std::vector<Permutation>& ords) {
    std::vector<double> ell(ords.size());
    for (std::size_t m = 0; m < ords.size(); ++m) ell[m] = -0.5 * quad_sum(g, T, ords[m]);
    return ell;
}

double lse_vec(const std::vector<double>& v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Contrastive value of one T x d window laid out at base.
double contrastive_fwd(const double* base, int T, int d, const std::vector<Permutation>& ords) {
    const std::vector<double> g = gram_rows(base, T, d);
    const std::vector<double> ell = ordering_log_densities(g, T, ords);
    return lse_vec(ell) - ell[0];
}

// Adds u * d(contrastive)/dZ for the window at base into dz (same layout).
// d(loss)/dZ = -M Z with M the softmax-minus-identity weighted sum of the
// per-ordering second-difference outer products.
void contrastive_bwd(const double* base, int T, int d, const std::vector<Permutation>& ords,
                     double u, double* dz) {
    const std::vector<double> g = gram_rows(base, T, d);
    const std::vector<double> ell = ordering_log_densities(g, T, ords);
    const double l = lse_vec(ell);
    std::vector<double> m(static_cast<std::size_t>(T) * T, 0.0);
    for (std::size_t i = 0; i < ords.size(); ++i) {
        const double w = u * (std::exp(ell[i] - l) - (i == 0 ? 1.0 : 0.0));
        if (w == 0.0) continue;
        const Permutation& p = ords[i];
        for (int t2 = 0; t2 + 2 < T; ++t2) {
            const int a = p[static_cast<std::size_t>(t2)];
            const int b = p[static_cast<std::size_t>(t2) + 1];
            const int c = p[static_cast<std::size_t>(t2) + 2];
            m[static_cast<std::size_t>(a) * T + a] += w;
            m[static_cast<std::size_t>(b) * T + b] += 4.0 * w;
            m[static_cast<std::size_t>(c) * T + c] += w;
            m[static_cast<std::size_t>(a) * T + b] -= 2.0 * w;
            m[static_cast<std::size_t>(b) * T + a] -= 2.0 * w;
            m[static_cast<std::size_t>(b) * T + c] -= 2.0 * w;
            m[static_cast<std::size_t>(c) * T + b] -= 2.0 * w;
            m[static_cast<std::size_t>(a) * T + c] += w;
            m[static_cast<std::size_t>(c) * T + a] += w;
        }
    }
    for (int i = 0; i < T; ++i) {
        double* drow = dz + static_cast<std::size_t>(i) * d;
        for (int kk = 0; kk < T; ++kk) {
            const double mik = m[static_cast<std::size_t>(i) * T + kk];
            if (mik == 0.0) continue;
            const double* zrow = base + static_cast<std::size_t>(kk) * d;
            for (int j = 0; j < d; ++j) drow[j] -= mik * zrow[j];
        }
    }
}

// log_density(velocities(.)) of n consecutive rows at base.
double omega_fwd(const double* base, int n, int d) {
    double s = 0.0;
    for (int t = 0; t + 1 < n; ++t)
        for (int j = 0; j < d; ++j) {
            const double v = base[static_cast<std::size_t>(t + 1) * d + j] -
                             base[static_cast<std::size_t>(t) * d + j];
            s += v * v;
        }
    return -0.5 * s;
}

// Adds u * d(omega_fwd)/dZ into dz: d(-1/2 sum_t ||z_{t+1}-z_t||^2)/dz_i = v_i - v_{i-1}.
void omega_bwd(const double* base, int n, int d, double u, double* dz) {
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
            double g = 0.0;
            if (i + 1 < n)
                g += base[static_cast<std::size_t>(i + 1) * d + j] -
                     base[static_cast<std::size_t>(i) * d + j];
            if (i > 0)
                g -= base[static_cast<std::size_t>(i) * d + j] -
                     base[static_cast<std::size_t>(i - 1) * d + j];
            dz[static_cast<std::size_t>(i) * d + j] += u * g;
        }
}

// Fused contrastive node; validation is the caller's job.
Var contrastive_node(Var window, std::shared_ptr<const std::vector<Permutation>> ords) {
    Tape& t = *window.tape;
    const Tensor& z = t.value(window.id);
    const int zid = window.id;
    return t.record(Tensor::scalar(contrastive_fwd(z.data(), z.rows(), z.cols(), *ords)), {zid},
                    [zid, ords](Tape& tp, const Tensor& up) {
                        const Tensor& z2 = tp.value(zid);
                        Tensor dz = Tensor::zeros(z2.shape());
                        contrastive_bwd(z2.data(), z2.rows(), z2.cols(), *ords, up[0], dz.data());
                        tp.accumulate(zid, dz);
                    });
}

// The batched forms below keep the tape small on the training hot path: one
// node covers every disjoint T-row window of a sequence, emitting element c
// for window c, instead of a slice + term node per window.

Var contrastive_windows_node(Var z, int T,
                             std::shared_ptr<const std::vector<Permutation>> ords) {
    Tape& t = *z.tape;
    const Tensor& zv = t.value(z.id);
    const int C = zv.rows() / T, d = zv.cols();
    Tensor out = Tensor::zeros({C});
    for (int c = 0; c < C; ++c)
        out[static_cast<std::size_t>(c)] =
            contrastive_fwd(zv.data() + static_cast<std::size_t>(c) * T * d, T, d, *ords);
    const int zid = z.id;
    return t.record(std::move(out), {zid}, [zid, T, ords](Tape& tp, const Tensor& up) {
        const Tensor& z2 = tp.value(zid);
        const int d2 = z2.cols();
        Tensor dz = Tensor::zeros(z2.shape());
        for (int c = 0; c < static_cast<int>(up.numel()); ++c) {
            if (up[static_cast<std::size_t>(c)] == 0.0) continue;
            const std::size_t off = static_cast<std::size_t>(c) * T * d2;
            contrastive_bwd(z2.data() + off, T, d2, *ords, up[static_cast<std::size_t>(c)],
                            dz.data() + off);
        }
        tp.accumulate(zid, dz);
    });
}

Var omega_windows_node(Var z, int T) {
    Tape& t = *z.tape;
    const Tensor& zv = t.value(z.id);
    const int C = zv.rows() / T, d = zv.cols();
    Tensor out = Tensor::zeros({C});
    for (int c = 0; c < C; ++c)
        out[static_cast<std::size_t>(c)] =
            omega_fwd(zv.data() + static_cast<std::size_t>(c) * T * d, T, d);
    const int zid = z.id;
    return t.record(std::move(out), {zid}, [zid, T](Tape& tp, const Tensor& up) {
        const Tensor& z2 = tp.value(zid);
        const int d2 = z2.cols();
        Tensor dz = Tensor::zeros(z2.shape());
        for (int c = 0; c < static_cast<int>(up.numel()); ++c) {
            if (up[static_cast<std::size_t>(c)] == 0.0) continue;
            const std::size_t off = static_cast<std::size_t>(c) * T * d2;
            omega_bwd(z2.data() + off, T, d2, up[static_cast<std::size_t>(c)], dz.data() + off);
        }
        tp.accumulate(zid, dz);
    });
}

// mean over the concatenation of rank-1 vars, summed in argument order; the
// value and gradient match mean(concat_scalars(...)) of the same elements.
Var mean_concat(const std::vector<Var>& parts) {
    Tape& t = *parts[0].tape;
    std::vector<int> ids;
    ids.reserve(parts.size());
    double s = 0.0;
    std::size_t n = 0;
    for (Var p : parts) {
        const Tensor& v = t.value(p.id);
        for (std::size_t i = 0; i < v.numel(); ++i) s += v[i];
        n += v.numel();
        ids.push_back(p.id);
    }
    if (n == 0) fail("mean of an empty tensor");
    const double inv = 1.0 / static_cast<double>(n);
    return t.record(Tensor::scalar(s * inv), ids, [ids, inv](Tape& tp, const Tensor& g) {
        for (int id : ids)
            tp.accumulate(id, Tensor::full(tp.value(id).shape(), g[0] * inv));
    });
}

}  // namespace

void GrwConfig::validate() const {
    if (T < 3) fail("window length must be at least 3 (accelerations need three frames)");
    if (alpha < 0.0) fail("alpha must be non-negative");
    if (lambda < 0.0) fail("lambda must be non-negative");
    if (k < 1) fail("ordering sample budget must be positive");
}

std::uint64_t saturating_factorial(int n) {
    const std::uint64_t cap = std::uint64_t{1} << 63;
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) {
        if (f > cap / static_cast<std::uint64_t>(i)) return cap;
        f *= static_cast<std::uint64_t>(i);
    }
    return f;
}

// ---- windowing -----------------------------------------------------------------

std::vector<Tensor> split_subclips(const Tensor& z, int T) {
    check_sequence(z);
    if (T < 3) fail("window length must be at least 3");
    const int n = z.rows(), d = z.cols();
    if (n < T) fail("sequence has " + std::to_string(n) + " frames, needs at least " +
                    std::to_string(T));
    const int count = n / T;
    std::vector<Tensor> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int c = 0; c < count; ++c) {
        Tensor w = Tensor::zeros({T, d});
        for (int i = 0; i < T; ++i)
            for (int j = 0; j < d; ++j) w.at(i, j) = z.at(c * T + i, j);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<Var> split_subclips(Var z, int T) {
    const Tensor& v = z.value();
    check_sequence(v);
    if (T < 3) fail("window length must be at least 3");
    if (v.rows() < T)
        fail("sequence has " + std::to_string(v.rows()) + " frames, needs at least " +
             std::to_string(T));
    const int count = v.rows() / T;
    std::vector<Var> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int c = 0; c < count; ++c) out.push_back(slice_rows(z, c * T, T));
    return out;
}

Tensor velocities(const Tensor& window) {
    check_sequence(window);
    if (window.rows() < 2) fail("velocities need at least 2 frames");
    const int n = window.rows(), d = window.cols();
    Tensor out = Tensor::zeros({n - 1, d});
    for (int i = 0; i + 1 < n; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) = window.at(i + 1, j) - window.at(i, j);
    return out;
}

Var velocities(Var window) { return diff_rows(window); }

Tensor accelerations(const Tensor& window) {
    check_sequence(window);
    if (window.rows() < 3) fail("accelerations need at least 3 frames");
    const int n = window.rows(), d = window.cols();
    Tensor out = Tensor::zeros({n - 2, d});
    for (int i = 0; i + 2 < n; ++i)
        for (int j = 0; j < d; ++j)
            out.at(i, j) = window.at(i + 2, j) - 2.0 * window.at(i + 1, j) + window.at(i, j);
    return out;
}

Var accelerations(Var window) { return diff_rows(diff_rows(window)); }

double log_density(const Tensor& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.numel(); ++i) s += m[i] * m[i];
    return -0.5 * s;
}

Var log_density(Var m) { return scale(sum(mul(m, m)), -0.5); }

// ---- orderings -------------------------------------------------------------------

std::vector<Permutation> enumerate_orderings(int T) {
    if (T < 2) fail("orderings need at least 2 frames");
    const std::uint64_t total = saturating_factorial(T - 1);
    if (total > 1000000ull)
        fail("(T-1)! = " + std::to_string(total) + " is beyond the enumeration limit; sample instead");
    Permutation tail(static_cast<std::size_t>(T - 1));
    for (int i = 0; i < T - 1; ++i) tail[static_cast<std::size_t>(i)] = i + 1;
    std::vector<Permutation> out;
    out.reserve(static_cast<std::size_t>(total));
    do {
        Permutation p(static_cast<std::size_t>(T));
        p[0] = 0;
        std::copy(tail.begin(), tail.end(), p.begin() + 1);
        out.push_back(std::move(p));
    } while (std::next_permutation(tail.begin(), tail.end()));
    return out;
}

namespace {

// rank -> lexicographic permutation of {1..m} via the factorial number system
Permutation unrank_tail(std::uint64_t rank, int m) {
    std::vector<int> pool(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) pool[static_cast<std::size_t>(i)] = i + 1;
    Permutation tail;
    tail.reserve(static_cast<std::size_t>(m));
    for (int left = m; left > 0; --left) {
        const std::uint64_t f = saturating_factorial(left - 1);
        const std::size_t idx = static_cast<std::size_t>(rank / f);
        rank %= f;
        tail.push_back(pool[idx]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    return tail;
}

}  // namespace

std::vector<Permutation> sample_orderings(int T, int k, Rng& rng) {
    if (T < 2) fail("orderings need at least 2 frames");
    if (k < 1) fail("ordering sample budget must be positive");
    const int m = T - 1;
    const std::uint64_t total = saturating_factorial(m);
    if (total != (std::uint64_t{1} << 63) && static_cast<std::uint64_t>(k) >= total - 1)
        return enumerate_orderings(T);

    std::vector<Permutation> out;
    out.reserve(static_cast<std::size_t>(k) + 1);
    Permutation identity(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i) identity[static_cast<std::size_t>(i)] = i;
    out.push_back(identity);

    if (total != (std::uint64_t{1} << 63)) {
        // draw distinct lexicographic ranks, skipping rank 0 (the identity)
        std::unordered_set<std::uint64_t> seen;
        while (seen.size() < static_cast<std::size_t>(k)) {
            const std::uint64_t r = 1 + uniform_u64(rng, total - 1);
            if (!seen.insert(r).second) continue;
            Permutation p(static_cast<std::size_t>(T));
            p[0] = 0;
            const Permutation tail = unrank_tail(r, m);
            std::copy(tail.begin(), tail.end(), p.begin() + 1);
            out.push_back(std::move(p));
        }
    } else {
        // factorial beyond 64 bits: shuffle directly, collisions are vanishingly rare
        std::set<Permutation> seen;
        while (seen.size() < static_cast<std::size_t>(k)) {
            Permutation p(static_cast<std::size_t>(T));
            for (int i = 0; i < T; ++i) p[static_cast<std::size_t>(i)] = i;
            for (int i = T - 1; i > 1; --i) {
                const int j = 1 + static_cast<int>(uniform_u64(rng, static_cast<std::uint64_t>(i)));
                std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
            }
            if (is_identity(p)) continue;
            if (seen.insert(p).second) out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<Permutation> choose_orderings(const GrwConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::uint64_t threshold = std::max<std::uint64_t>(static_cast<std::uint64_t>(cfg.k),
                                                            kOrderingEnumCap);
    if (saturating_factorial(cfg.T - 1) <= threshold) return enumerate_orderings(cfg.T);
    return sample_orderings(cfg.T, cfg.k, rng);
}

Tensor apply_ordering(const Tensor& window, const Permutation& perm) {
    check_sequence(window);
    check_permutation(perm, window.rows());
    const int n = window.rows(), d = window.cols();
    Tensor out = Tensor::zeros({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) = window.at(perm[static_cast<std::size_t>(i)], j);
    return out;
}

Var apply_ordering(Var window, const Permutation& perm) {
    check_permutation(perm, window.value().rows());
    return gather_rows(window, perm);
}

// ---- loss terms --------------------------------------------------------------------

double contrastive_order_loss(const Tensor& window, const std::vector<Permutation>& orderings) {
    check_sequence(window);
    if (window.rows() < 3) fail("contrastive ordering loss needs at least 3 frames");
    check_orderings(orderings, window.rows());
    const std::vector<double> g = gram(window);
    const std::vector<double> ell = ordering_log_densities(g, window.rows(), orderings);
    return lse_vec(ell) - ell[0];
}

Var contrastive_order_loss(Var window, const std::vector<Permutation>& orderings) {
    return contrastive_order_loss(
        window, std::make_shared<const std::vector<Permutation>>(orderings));
}

Var contrastive_order_loss(Var window, std::shared_ptr<const std::vector<Permutation>> orderings) {
    const Tensor& z = window.value();
    check_sequence(z);
    if (z.rows() < 3) fail("contrastive ordering loss needs at least 3 frames");
    check_orderings(*orderings, z.rows());
    return contrastive_node(window, std::move(orderings));
}

Var contrastive_order_loss_composed(Var window, const std::vector<Permutation>& orderings) {
    const Tensor& z = window.value();
    check_sequence(z);
    if (z.rows() < 3) fail("contrastive ordering loss needs at least 3 frames");
    check_orderings(orderings, z.rows());
    std::vector<Var> ells;
    ells.reserve(orderings.size());
    for (const Permutation& p : orderings)
        ells.push_back(log_density(accelerations(apply_ordering(window, p))));
    return sub(log_sum_exp(concat_scalars(ells), 0), ells[0]);
}

double omega(const Tensor& window) { return log_density(velocities(window)); }

Var omega(Var window) {
    // fused log_density(velocities(window)): one node instead of four, since
    // this sits on the training hot path once per window
    Tape& t = *window.tape;
    const Tensor& z = t.value(window.id);
    check_sequence(z);
    if (z.rows() < 2) fail("velocities need at least 2 frames");
    const int zid = window.id;
    return t.record(Tensor::scalar(omega_fwd(z.data(), z.rows(), z.cols())), {zid},
                    [zid](Tape& tp, const Tensor& up) {
                        const Tensor& z2 = tp.value(zid);
                        Tensor dz = Tensor::zeros(z2.shape());
                        omega_bwd(z2.data(), z2.rows(), z2.cols(), up[0], dz.data());
                        tp.accumulate(zid, dz);
                    });
}

// ---- assembled losses ----------------------------------------------------------------

SmoothTerms smooth_terms(const std::vector<Var>& sequences,
                         std::shared_ptr<const std::vector<Permutation>> orderings,
                         const GrwConfig& cfg) {
    cfg.validate();
    if (sequences.empty()) fail("smooth loss needs at least one sequence");
    check_orderings(*orderings, cfg.T);
    Tape* tape = sequences[0].tape;
    std::vector<Var> contrastives;
    std::vector<Var> omegas;
    for (Var z : sequences) {
        if (z.tape != tape) fail("sequences must live on the same tape");
        const Tensor& zv = z.value();
        check_sequence(zv);
        if (zv.rows() < cfg.T)
            fail("sequence has " + std::to_string(zv.rows()) + " frames, needs at least " +
                 std::to_string(cfg.T));
        contrastives.push_back(contrastive_windows_node(z, cfg.T, orderings));
        omegas.push_back(omega_windows_node(z, cfg.T));
    }
    SmoothTerms terms;
    terms.contrastive = mean_concat(contrastives);
    terms.omega = scale(mean_concat(omegas), -cfg.alpha);
    terms.smooth = add(terms.contrastive, terms.omega);
    return terms;
}

Var smooth_loss(Var z, const GrwConfig& cfg, Rng& rng) {
    auto orderings = std::make_shared<const std::vector<Permutation>>(choose_orderings(cfg, rng));
    return smooth_terms({z}, std::move(orderings), cfg).smooth;
}

LossBreakdown smooth_loss(const Tensor& z, const GrwConfig& cfg, Rng& rng) {
    Tape t;
    Var zv = t.constant(z);
    auto orderings = std::make_shared<const std::vector<Permutation>>(choose_orderings(cfg, rng));
    const SmoothTerms terms = smooth_terms({zv}, std::move(orderings), cfg);
    LossBreakdown b;
    b.contrastive = terms.contrastive.value().item();
    b.omega = terms.omega.value().item();
    b.smooth = terms.smooth.value().item();
    b.ce = 0.0;
    b.total = cfg.lambda * b.smooth;
    return b;
}

LossBreakdown smooth_loss(const Tensor& z, const GrwConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "orderings"));
    return smooth_loss(z, cfg, rng);
}

Var total_loss(Var logits, const std::vector<int>& labels, Var z, const GrwConfig& cfg,
               Rng& rng) {
    Var ce = cross_entropy_mean(logits, labels);
    // lambda = 0 switches the smoothing term off entirely: nothing is recorded
    // on the tape and the rng is left untouched.
    if (cfg.lambda == 0.0) return ce;
    return add(ce, scale(smooth_loss(z, cfg, rng), cfg.lambda));
}

LossBreakdown total_loss(const Tensor& logits, const std::vector<int>& labels, const Tensor& z,
                         const GrwConfig& cfg, Rng& rng) {
    LossBreakdown b = smooth_loss(z, cfg, rng);
    Tape t;
    b.ce = cross_entropy_mean(t.constant(logits), labels).value().item();
    b.total = b.ce + cfg.lambda * b.smooth;
    return b;
}

LossBreakdown total_loss(const Tensor& logits, const std::vector<int>& labels, const Tensor& z,
                         const GrwConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "orderings"));
    return total_loss(logits, labels, z, cfg, rng);
}

LossBreakdown scaled_loss(const Tensor& z, double s, const GrwConfig& cfg) {
    if (!(s > 0.0)) fail("temperature scale must be positive");
    Tensor zs = z;
    for (std::size_t i = 0; i < zs.numel(); ++i) zs[i] *= s;
    return smooth_loss(zs, cfg);
}

}  // namespace grw
