// End-to-end acceptance gate: every shipped guarantee, one PASS/FAIL line
// each, nonzero exit if anything fails. Budgets are wall-clock on one core.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "grw/adapters.hpp"
#include "grw/gradcheck.hpp"
#include "grw/grw_loss.hpp"
#include "grw/rng.hpp"
#include "grw/scale_lab.hpp"
#include "grw/synthgen.hpp"
#include "grw/tensor.hpp"
#include "grw/trainer.hpp"

using namespace grw;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s: %s — %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

double median3(double a, double b, double c) {
    std::vector<double> v{a, b, c};
    std::sort(v.begin(), v.end());
    return v[1];
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

bool same_bits(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel()) return false;
    return std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

// ---- 1. toy smoothing experiment -------------------------------------------

void toy_smoothing_experiment() {
    const double t0 = now_seconds();
    const DatasetSplit data = gen_dataset(DataConfig{});  // 1000 train / 100 test

    std::vector<double> acc_base, acc_grw, accel_base, accel_grw;
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
        for (const bool smoothing : {false, true}) {
            TrainConfig tc;  // default lrs, 30 epochs, T=5, alpha=0.5
            tc.seed = seed;
            tc.grw.lambda = smoothing ? 0.1 : 0.0;
            Model m = init_model(ModelConfig{}, data.train[0].frames.cols(), seed);
            const RunMetrics r = train(m, data, tc);
            (smoothing ? acc_grw : acc_base).push_back(r.final_eval.accuracy);
            (smoothing ? accel_grw : accel_base).push_back(r.final_eval.mean_sq_accel);
        }
    }
    const double elapsed = now_seconds() - t0;
    const double med_acc_b = median3(acc_base[0], acc_base[1], acc_base[2]);
    const double med_acc_g = median3(acc_grw[0], acc_grw[1], acc_grw[2]);
    const double med_accel_b = median3(accel_base[0], accel_base[1], accel_base[2]);
    const double med_accel_g = median3(accel_grw[0], accel_grw[1], accel_grw[2]);

    const bool acc_ok = med_acc_g >= med_acc_b;
    const bool accel_ok = med_accel_g <= 0.5 * med_accel_b;
    const bool time_ok = elapsed <= 900.0;
    report("toy smoothing experiment", acc_ok && accel_ok && time_ok,
           fmt("3 seeds, 1000/100 clips: median accuracy smoothed=%.3f vs baseline=%.3f; "
               "median mean-sq accel smoothed=%.4f vs baseline=%.4f (ratio %.3f, need <= 0.5); "
               "%.0f s (budget 900)",
               med_acc_g, med_acc_b, med_accel_g, med_accel_b, med_accel_g / med_accel_b,
               elapsed));
}

// ---- 2. hand-computable loss ------------------------------------------------

void hand_computable_loss() {
    Tensor clip = Tensor::zeros({3, 1});
    clip.at(1, 0) = 1.0;
    clip.at(2, 0) = 2.0;
    GrwConfig cfg;
    cfg.T = 3;
    cfg.alpha = 0.5;
    const double smooth = smooth_loss(clip, cfg).smooth;
    const double want = 0.511047;
    report("hand-enumerable loss value", std::fabs(smooth - want) <= 1e-6,
           fmt("ramp clip, T=3, alpha=1/2: smooth=%.9f vs %.6f +- 1e-6", smooth, want));
}

// ---- 3. gradient correctness --------------------------------------------------

void gradient_correctness() {
    const double t0 = now_seconds();
    const GradCheckSummary s = run_grad_checks(GradCheckOptions{});  // T 3..7 x d {1,4,16} x 20
    const double elapsed = now_seconds() - t0;
    report("gradient correctness", s.pass && elapsed <= 120.0,
           fmt("central differences over %zu (T,d) cells, 20 draws each: max rel err %.2e "
               "(tol 1e-5); %.1f s (budget 120)",
               s.cells.size(), s.max_rel_err, elapsed));
}

// ---- 4. ordering machinery ------------------------------------------------------

void ordering_machinery() {
    const std::size_t n5 = enumerate_orderings(5).size();
    const std::size_t n6 = enumerate_orderings(6).size();
    const bool counts_ok = n5 == 24 && n6 == 120;

    // softmax over the full enumeration is an exact distribution
    double worst_sum_gap = 0.0;
    Rng rng(21);
    for (int T : {5, 6}) {
        const auto orderings = enumerate_orderings(T);
        for (int rep = 0; rep < 5; ++rep) {
            const Tensor w = randn({T, 3}, rng);
            std::vector<double> ell;
            for (const Permutation& p : orderings)
                ell.push_back(log_density(accelerations(apply_ordering(w, p))));
            const double m = *std::max_element(ell.begin(), ell.end());
            double z = 0.0;
            for (double e : ell) z += std::exp(e - m);
            const double lse = m + std::log(z);
            double sum = 0.0;
            for (double e : ell) sum += std::exp(e - lse);
            worst_sum_gap = std::max(worst_sum_gap, std::fabs(sum - 1.0));
        }
    }

    // a budget one short of the full count must still match full enumeration
    GrwConfig nearly;
    nearly.T = 6;
    nearly.k = 119;  // (6-1)! - 1
    GrwConfig full;
    full.T = 6;
    full.k = 120;
    double worst_budget_gap = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        const Tensor z = randn({12, 4}, rng);
        worst_budget_gap = std::max(
            worst_budget_gap, std::fabs(smooth_loss(z, nearly).smooth - smooth_loss(z, full).smooth));
    }

    report("ordering machinery", counts_ok && worst_sum_gap <= 1e-12 && worst_budget_gap <= 1e-12,
           fmt("counts %zu/%zu (want 24/120); softmax sum off by %.1e (tol 1e-12); "
               "budget (T-1)!-1 vs full enumeration differs by %.1e (tol 1e-12)",
               n5, n6, worst_sum_gap, worst_budget_gap));
}

// ---- 5. translation invariance ----------------------------------------------------

void translation_invariance() {
    Rng rng(31);
    GrwConfig cfg;  // T=5
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const int rows = 5 + static_cast<int>(uniform_u64(rng, 11));
        const int d = 1 + static_cast<int>(uniform_u64(rng, 6));
        const Tensor z = randn({rows, d}, rng, 2.0);
        const Tensor b = randn({d}, rng, 5.0);
        Tensor shifted = z;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < d; ++j) shifted.at(i, j) += b.data()[j];
        worst = std::max(worst,
                         std::fabs(smooth_loss(z, cfg).smooth - smooth_loss(shifted, cfg).smooth));
    }
    report("translation invariance", worst <= 1e-10,
           fmt("50 random (clip, offset) pairs: worst |delta| = %.2e (tol 1e-10)", worst));
}

// ---- 6. uniform-config closed forms ----------------------------------------------

void uniform_config_closed_forms() {
    double worst_vel = 0.0;
    for (int T = 3; T <= 20; ++T) {
        const double vel = velocity_loss_1d(uniform_config(T, static_cast<double>(T - 1)));
        worst_vel = std::max(worst_vel, std::fabs(vel - 0.5 * (T - 1)));
    }
    bool accel_ok = true;
    double worst_margin = 0.0;
    for (int T = 3; T <= 10; ++T) {
        const Loss1D l = loss_1d(uniform_config(T, static_cast<double>(T - 1)));
        const double bound = std::log(static_cast<double>(saturating_factorial(T - 1)));
        accel_ok = accel_ok && l.accel <= bound + 1e-12;
        worst_margin = std::max(worst_margin, l.accel - bound);
    }
    report("uniform-spacing closed forms", worst_vel <= 1e-12 && accel_ok,
           fmt("speed term equals (T-1)/2 within %.1e for T in 3..20 (tol 1e-12); "
               "ordering term stays under ln((T-1)!) for T in 3..10 (worst margin %.1e)",
               worst_vel, worst_margin));
}

// ---- 7. lower bound and extent scaling ---------------------------------------------

void lower_bound_and_scaling() {
    const double t0 = now_seconds();
    Rng rng(41);
    bool bound_ok = true;
    for (int rep = 0; rep < 1000; ++rep) {
        const int T = 3 + static_cast<int>(uniform_u64(rng, 10));  // 3..12
        Config1D cfg;
        cfg.z.push_back(0.0);
        const double scale = std::exp(3.0 * (uniform_double(rng) - 0.5));
        for (int i = 1; i < T; ++i)
            cfg.z.push_back(cfg.z.back() + scale * (0.01 + uniform_double(rng)));
        bound_ok = bound_ok && check_lower_bound(cfg);
    }

    const std::vector<ScaleStudyRow> rows = scaling_study(3, 10);
    bool rows_ok = !rows.empty();
    double lo = 1e300, hi = 0.0, min_extent = 1e300;
    for (const ScaleStudyRow& r : rows) {
        rows_ok = rows_ok && r.lower_bound_ok;
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
        min_extent = std::min(min_extent, r.r_star);
    }
    const double elapsed = now_seconds() - t0;
    const bool band_ok = hi / lo < 3.0;
    const bool collapse_ok = min_extent > 0.1;
    report("uniform lower bound and extent scaling", bound_ok && rows_ok && band_ok &&
               collapse_ok && elapsed <= 600.0,
           fmt("bound holds for 1000 random configs and all 8 optimizer outputs; "
               "extent/(T sqrt(ln T)) in [%.4f, %.4f] (max/min %.3f < 3); min extent %.3f > 0.1; "
               "%.0f s (budget 600)",
               lo, hi, hi / lo, min_extent, elapsed));
}

// ---- 8. smoothing overhead ------------------------------------------------------------

void smoothing_overhead() {
    DataConfig dc;
    dc.train_count = 32;
    dc.test_count = 1;
    dc.seed = 3;
    const DatasetSplit data = gen_dataset(dc);
    const ModelConfig mc;
    Model m = init_model(mc, data.train[0].frames.cols(), 7);
    const int B = 32;
    const int M = data.train[0].frames.rows();

    Tensor x = Tensor::zeros({B * M, m.input_dim});
    std::vector<int> labels;
    for (int i = 0; i < B; ++i) {
        labels.push_back(static_cast<int>(data.train[i].label));
        for (int t = 0; t < M; ++t)
            for (int j = 0; j < m.input_dim; ++j)
                x.at(i * M + t, j) = data.train[i].frames.at(t, j);
    }
    GrwConfig gc;  // T=5: 24 orderings, enumerated
    Rng rng(11);
    std::vector<Tensor> embeds;
    for (int i = 0; i < B; ++i) embeds.push_back(randn({M, mc.embed_dim}, rng));

    const auto model_step = [&] {
        Tape tape;
        std::vector<Var> ew, eb;
        for (std::size_t i = 0; i < m.enc_w.size(); ++i) {
            ew.push_back(tape.leaf(m.enc_w[i], true));
            eb.push_back(tape.leaf(m.enc_b[i], true));
        }
        Var aw = tape.leaf(m.affine.weight, true);
        Var ab = tape.leaf(m.affine.bias, true);
        HeadVars hv = lift_head(tape, m.head, true);
        Var cur = tape.constant(x);
        for (std::size_t i = 0; i + 1 < ew.size(); ++i)
            cur = relu(add_rowvec(matmul(cur, transpose(ew[i])), eb[i]));
        Var z = add_rowvec(matmul(cur, transpose(ew.back())), eb.back());
        Var emb = affine_embed(z, aw, ab);
        std::vector<Var> per;
        for (int i = 0; i < B; ++i) per.push_back(head_forward(slice_rows(emb, i * M, M), hv));
        tape.backward(cross_entropy_mean(stack_rows(per), labels));
    };
    const auto orderings =
        std::make_shared<const std::vector<Permutation>>(enumerate_orderings(gc.T));
    const auto smooth_step = [&] {
        Tape tape;
        std::vector<Var> seqs;
        for (int i = 0; i < B; ++i) seqs.push_back(tape.leaf(embeds[i], true));
        tape.backward(smooth_terms(seqs, orderings, gc).smooth);
    };

    const auto timed = [&](const auto& f) {
        std::vector<double> t;
        for (int i = 0; i < 3; ++i) f();
        for (int i = 0; i < 30; ++i) {
            const double s = now_seconds();
            f();
            t.push_back(now_seconds() - s);
        }
        std::sort(t.begin(), t.end());
        return t[t.size() / 2];
    };
    const double model_ms = timed(model_step) * 1e3;
    const double smooth_ms = timed(smooth_step) * 1e3;
    const double ratio = smooth_ms / model_ms;
    report("smoothing overhead", ratio <= 0.05,
           fmt("batch of 32 clips x %d frames: smoothing fwd+bwd %.3f ms vs model fwd+bwd "
               "%.3f ms (%.1f%%, need <= 5%%)",
               M, smooth_ms, model_ms, 100.0 * ratio));
}

// ---- 9. switch-off equivalence -----------------------------------------------------------

void switch_off_equivalence() {
    DataConfig dc;
    dc.train_count = 60;
    dc.test_count = 20;
    dc.M = 10;
    dc.seed = 13;
    const DatasetSplit data = gen_dataset(dc);
    ModelConfig disabled_cfg;
    disabled_cfg.placement = Placement::none;  // the smoothing-disabled build

    TrainConfig tc;
    tc.epochs = 5;
    tc.seed = 9;

    Model zero_lambda = init_model(ModelConfig{}, data.train[0].frames.cols(), 9);
    Model disabled = init_model(disabled_cfg, data.train[0].frames.cols(), 9);
    TrainConfig tc_zero = tc;
    tc_zero.grw.lambda = 0.0;
    const RunMetrics ra = train(zero_lambda, data, tc_zero);
    const RunMetrics rb = train(disabled, data, tc);

    bool ok = ra.epochs.size() == rb.epochs.size();
    for (std::size_t i = 0; ok && i < ra.epochs.size(); ++i) {
        const EpochRow &a = ra.epochs[i], &b = rb.epochs[i];
        ok = std::memcmp(&a.train_total, &b.train_total, sizeof(double)) == 0 &&
             a.test_accuracy == b.test_accuracy &&
             std::memcmp(&a.mean_sq_accel, &b.mean_sq_accel, sizeof(double)) == 0;
    }
    auto pa = model_params(zero_lambda);
    auto pb = model_params(disabled);
    ok = ok && pa.size() == pb.size();
    for (std::size_t i = 0; ok && i < pa.size(); ++i) ok = same_bits(*pa[i], *pb[i]);
    report("switch-off equivalence", ok,
           "lambda=0 training is bitwise-identical to the smoothing-disabled configuration: "
           "every epoch metric and every learned parameter");
}

}  // namespace

// An exception inside a criterion fails that line, not the whole gate.
void guarded(const char* name, void (*criterion)()) {
    try {
        criterion();
    } catch (const std::exception& e) {
        report(name, false, std::string("threw: ") + e.what());
    }
}

int main() {
    std::printf("acceptance gate: temporal-smoothing regularizer\n");
    const double t0 = now_seconds();

    guarded("hand-enumerable loss value", hand_computable_loss);
    guarded("ordering machinery", ordering_machinery);
    guarded("translation invariance", translation_invariance);
    guarded("uniform-spacing closed forms", uniform_config_closed_forms);
    guarded("gradient correctness", gradient_correctness);
    guarded("smoothing overhead", smoothing_overhead);
    guarded("switch-off equivalence", switch_off_equivalence);
    guarded("uniform lower bound and extent scaling", lower_bound_and_scaling);
    guarded("toy smoothing experiment", toy_smoothing_experiment);

    std::printf("%d criterion(s) failed; total wall time %.0f s\n", g_failures,
                now_seconds() - t0);
    return g_failures == 0 ? 0 : 1;
}
