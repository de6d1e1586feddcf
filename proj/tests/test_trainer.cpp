#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "grw/rng.hpp"
#include "grw/synthgen.hpp"
#include "grw/trainer.hpp"

using namespace grw;

namespace {

DatasetSplit small_data(int train, int test, int m, std::uint64_t seed) {
    DataConfig cfg;
    cfg.train_count = train;
    cfg.test_count = test;
    cfg.M = m;
    cfg.seed = seed;
    return gen_dataset(cfg);
}

ModelConfig small_model() {
    ModelConfig mc;
    mc.encoder_hidden = {24};
    mc.embed_dim = 8;
    mc.head_blocks = 1;
    return mc;
}

TrainConfig small_train(int epochs, int batch) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.lr_backbone_start = 0.02;
    tc.lr_backbone_end = 0.002;
    tc.lr_head_start = 0.01;
    tc.lr_head_end = 0.001;
    tc.grw.T = 5;
    return tc;
}

bool same_bits(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.numel(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

bool same_rows(const EpochRow& a, const EpochRow& b) {
    return a.epoch == b.epoch && a.train_total == b.train_total && a.train_ce == b.train_ce &&
           a.train_smooth == b.train_smooth && a.test_accuracy == b.test_accuracy &&
           a.mean_sq_accel == b.mean_sq_accel && a.mean_sq_speed == b.mean_sq_speed;
}

}  // namespace

TEST_CASE("placement names round-trip") {
    for (Placement p : {Placement::final_layer, Placement::intermediate, Placement::none})
        CHECK(placement_from_name(placement_name(p)) == p);
    CHECK_THROWS(placement_from_name("middle"));
}

TEST_CASE("config validation") {
    ModelConfig mc;
    mc.encoder_hidden = {};
    CHECK_THROWS(mc.validate());
    mc = ModelConfig{};
    mc.embed_dim = 1;
    CHECK_THROWS(mc.validate());
    mc = ModelConfig{};
    mc.head_blocks = 3;
    CHECK_THROWS(mc.validate());
    mc = ModelConfig{};
    mc.classes = 1;
    CHECK_THROWS(mc.validate());
    CHECK_NOTHROW(ModelConfig{}.validate());

    TrainConfig tc;
    tc.epochs = 0;
    CHECK_THROWS(tc.validate());
    tc = TrainConfig{};
    tc.batch_size = 0;
    CHECK_THROWS(tc.validate());
    tc = TrainConfig{};
    tc.lr_backbone_end = 0.0;
    CHECK_THROWS(tc.validate());
    tc = TrainConfig{};
    tc.lr_head_start = 1e-5;  // below its end value
    CHECK_THROWS(tc.validate());
    tc = TrainConfig{};
    tc.momentum = 1.0;
    CHECK_THROWS(tc.validate());
    tc = TrainConfig{};
    tc.grw.T = 2;
    CHECK_THROWS(tc.validate());
    CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("model initialization: shapes, parameter order, determinism") {
    ModelConfig mc;
    mc.encoder_hidden = {32};
    mc.embed_dim = 16;
    mc.head_blocks = 2;
    Model m = init_model(mc, 24, 9);
    REQUIRE(m.enc_w.size() == 2);
    CHECK(m.enc_w[0].shape() == std::vector<int>{32, 24});
    CHECK(m.enc_w[1].shape() == std::vector<int>{16, 32});
    CHECK(m.enc_b[0].shape() == std::vector<int>{32});
    CHECK(m.affine.weight.shape() == std::vector<int>{16, 16});
    CHECK(m.head.blocks.size() == 2);
    CHECK(m.head.wc.shape() == std::vector<int>{3, 16});

    // encoder (2 layers -> 4) + affine (2) + head (8 per block * 2 + classifier 2)
    CHECK(model_params(m).size() == 24);
    CHECK(backbone_param_count(m) == 6);

    Model m2 = init_model(mc, 24, 9);
    CHECK(same_bits(m.enc_w[0], m2.enc_w[0]));
    CHECK(same_bits(m.head.blocks[1].w2, m2.head.blocks[1].w2));
    Model m3 = init_model(mc, 24, 10);
    CHECK(!same_bits(m.enc_w[0], m3.enc_w[0]));

    CHECK_THROWS(init_model(mc, 0, 1));
}

TEST_CASE("pca: axis-aligned data reduces to centering with variance-ordered columns") {
    const Tensor x({4, 2}, {1.0, 0.0, -1.0, 0.0, 0.0, 2.0, 0.0, -2.0});
    const PcaResult p = pca_project(x, 2);
    // higher variance along the second input axis -> it becomes component 0
    CHECK(std::abs(p.components.at(0, 0)) < 1e-12);
    CHECK(p.components.at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.components.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(p.components.at(1, 1)) < 1e-12);
    for (int i = 0; i < 4; ++i) {
        CHECK(p.coords.at(i, 0) == doctest::Approx(x.at(i, 1)).epsilon(1e-12));
        CHECK(p.coords.at(i, 1) == doctest::Approx(x.at(i, 0)).epsilon(1e-12));
    }
    CHECK(p.rank == 2);
    CHECK(p.eigenvalues[0] == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
    CHECK(p.eigenvalues[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("pca: isotropic noise spreads variance evenly over components") {
    Rng rng(derive_seed(50, "iso"));
    const Tensor x = randn({5000, 16}, rng);
    const PcaResult p = pca_project(x, 2);
    double total = 0.0;
    for (double ev : p.eigenvalues) total += ev;
    const double evr = (p.eigenvalues[0] + p.eigenvalues[1]) / total;
    CHECK(evr > 0.8 * 2.0 / 16.0);
    CHECK(evr < 1.2 * 2.0 / 16.0);
    CHECK(p.rank == 16);
}

TEST_CASE("pca: dropped eigenvalues account for the reconstruction error") {
    Rng rng(derive_seed(51, "recon"));
    Tensor x = randn({200, 6}, rng);
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < 6; ++j) x.at(i, j) *= 1.0 + j;  // anisotropic columns
    const PcaResult p = pca_project(x, 2);

    std::vector<double> mean(6, 0.0);
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < 6; ++j) mean[static_cast<std::size_t>(j)] += x.at(i, j);
    for (double& v : mean) v /= x.rows();
    double err = 0.0;
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < 6; ++j) {
            double recon = 0.0;
            for (int c = 0; c < 2; ++c) recon += p.coords.at(i, c) * p.components.at(j, c);
            const double diff = (x.at(i, j) - mean[static_cast<std::size_t>(j)]) - recon;
            err += diff * diff;
        }
    double dropped = 0.0;
    for (std::size_t i = 2; i < p.eigenvalues.size(); ++i) dropped += p.eigenvalues[i];
    CHECK(err == doctest::Approx((x.rows() - 1) * dropped).epsilon(1e-8));
}

TEST_CASE("pca: degenerate inputs report reduced rank") {
    const Tensor flat({3, 3}, {1, 2, 3, 1, 2, 3, 1, 2, 3});
    CHECK(pca_project(flat, 2).rank == 0);

    Tensor line = Tensor::zeros({10, 3});
    for (int i = 0; i < 10; ++i) {
        line.at(i, 0) = i;
        line.at(i, 1) = 2.0 * i;
        line.at(i, 2) = -i;
    }
    const PcaResult p = pca_project(line, 2);
    CHECK(p.rank == 1);
    CHECK(std::abs(p.eigenvalues[1]) < 1e-9 * p.eigenvalues[0]);

    CHECK_THROWS(pca_project(Tensor::zeros({1, 4}), 2));
    CHECK_THROWS(pca_project(Tensor::zeros({4, 1}), 1));
    CHECK_THROWS(pca_project(Tensor::zeros({4, 3}), 0));
    CHECK_THROWS(pca_project(Tensor::zeros({4, 3}), 4));
}

TEST_CASE("checkpoint round trip preserves every parameter bit") {
    ModelConfig mc = small_model();
    mc.placement = Placement::intermediate;
    Model m = init_model(mc, 24, 123);
    save_model(m, "trainer_tmp_model.bin");
    Model back = load_model("trainer_tmp_model.bin");
    CHECK(back.input_dim == 24);
    CHECK(back.cfg.placement == Placement::intermediate);
    CHECK(back.cfg.encoder_hidden == mc.encoder_hidden);
    std::vector<Tensor*> pa = model_params(m), pb = model_params(back);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(same_bits(*pa[i], *pb[i]));

    const DatasetSplit data = small_data(6, 6, 6, 2);
    const EvalStats ea = evaluate(m, data.test), eb = evaluate(back, data.test);
    CHECK(ea.accuracy == eb.accuracy);
    CHECK(ea.mean_sq_accel == eb.mean_sq_accel);

    {
        std::ifstream f("trainer_tmp_model.bin", std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        bytes.resize(bytes.size() / 2);
        std::ofstream g("trainer_tmp_trunc.bin", std::ios::binary);
        g.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS(load_model("trainer_tmp_trunc.bin"));
    CHECK_THROWS(load_model("trainer_tmp_missing.bin"));
    std::remove("trainer_tmp_model.bin");
    std::remove("trainer_tmp_trunc.bin");
}

TEST_CASE("untrained model sits at chance accuracy, invariant to clip order") {
    const DatasetSplit data = small_data(6, 300, 8, 17);
    const Model m = init_model(small_model(), 24, 4);
    const EvalStats s = evaluate(m, data.test);
    CHECK(s.accuracy >= 0.0);
    CHECK(s.accuracy <= 1.0);
    CHECK(std::abs(s.accuracy - 1.0 / 3.0) <= 0.1);
    CHECK(s.mean_sq_accel >= 0.0);
    CHECK(s.mean_sq_speed >= 0.0);
    CHECK(std::isfinite(s.mean_sq_accel));

    std::vector<MotionClip> reversed(data.test.rbegin(), data.test.rend());
    CHECK(evaluate(m, reversed).accuracy == s.accuracy);
}

TEST_CASE("full-batch training lowers the loss after one step") {
    const DatasetSplit data = small_data(30, 6, 10, 5);
    TrainConfig tc = small_train(2, 30);
    Model m = init_model(small_model(), 24, 5);
    const RunMetrics r = train(m, data, tc);
    REQUIRE(r.epochs.size() == 2);
    CHECK(r.epochs[1].train_total < r.epochs[0].train_total);
    for (const EpochRow& row : r.epochs) {
        CHECK(row.test_accuracy >= 0.0);
        CHECK(row.test_accuracy <= 1.0);
        CHECK(std::isfinite(row.train_total));
    }
}

TEST_CASE("training is deterministic given seed and config") {
    const DatasetSplit data = small_data(24, 9, 10, 8);
    TrainConfig tc = small_train(3, 8);
    Model a = init_model(small_model(), 24, 3);
    Model b = init_model(small_model(), 24, 3);
    const RunMetrics ra = train(a, data, tc);
    const RunMetrics rb = train(b, data, tc);
    REQUIRE(ra.epochs.size() == rb.epochs.size());
    for (std::size_t i = 0; i < ra.epochs.size(); ++i) CHECK(same_rows(ra.epochs[i], rb.epochs[i]));
    CHECK(same_bits(ra.pca.coords, rb.pca.coords));
    std::vector<Tensor*> pa = model_params(a), pb = model_params(b);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(same_bits(*pa[i], *pb[i]));
}

TEST_CASE("lambda = 0 and placement = none take bit-identical trajectories") {
    const DatasetSplit data = small_data(24, 9, 10, 11);
    ModelConfig with_site = small_model();
    with_site.placement = Placement::final_layer;
    ModelConfig no_site = small_model();
    no_site.placement = Placement::none;

    TrainConfig zero = small_train(3, 8);
    zero.grw.lambda = 0.0;
    TrainConfig active = small_train(3, 8);
    active.grw.lambda = 0.1;  // ignored entirely when placement = none

    Model a = init_model(with_site, 24, 6);
    Model b = init_model(no_site, 24, 6);
    const RunMetrics ra = train(a, data, zero);
    const RunMetrics rb = train(b, data, active);

    REQUIRE(ra.epochs.size() == rb.epochs.size());
    for (std::size_t i = 0; i < ra.epochs.size(); ++i) {
        CHECK(same_rows(ra.epochs[i], rb.epochs[i]));
        CHECK(ra.epochs[i].train_smooth == 0.0);
        CHECK(rb.epochs[i].train_smooth == 0.0);
    }
    std::vector<Tensor*> pa = model_params(a), pb = model_params(b);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(same_bits(*pa[i], *pb[i]));
    CHECK(same_bits(ra.pca.coords, rb.pca.coords));
}

TEST_CASE("the smoothing gradient reaches encoder weights at both placements") {
    const DatasetSplit data = small_data(12, 6, 10, 13);
    for (Placement placement : {Placement::final_layer, Placement::intermediate}) {
        ModelConfig mc = small_model();
        mc.placement = placement;
        TrainConfig off = small_train(1, 12);
        off.grw.lambda = 0.0;
        TrainConfig on = small_train(1, 12);
        on.grw.lambda = 0.5;

        Model a = init_model(mc, 24, 21);
        Model b = init_model(mc, 24, 21);
        train(a, data, off);
        train(b, data, on);
        // one full-batch step each, identical except the lambda * smooth term:
        // a parameter delta is smoothing gradient that flowed to that tensor
        CHECK(!same_bits(a.enc_w[0], b.enc_w[0]));
        if (placement == Placement::final_layer) {
            CHECK(!same_bits(a.enc_w[1], b.enc_w[1]));
            CHECK(!same_bits(a.affine.weight, b.affine.weight));
        } else {
            // the intermediate tap sits before the embedding layer, so nothing
            // downstream of it sees the smoothing gradient in a single step
            CHECK(same_bits(a.enc_w[1], b.enc_w[1]));
            CHECK(same_bits(a.affine.weight, b.affine.weight));
        }
    }
}

TEST_CASE("exploding learning rate raises a divergence error") {
    const DatasetSplit data = small_data(12, 6, 10, 19);
    TrainConfig tc = small_train(6, 12);
    tc.lr_backbone_start = 1e9;
    tc.lr_backbone_end = 1e8;
    tc.lr_head_start = 1e9;
    tc.lr_head_end = 1e8;
    Model m = init_model(small_model(), 24, 2);
    CHECK_THROWS_AS(train(m, data, tc), divergence_error);
}

TEST_CASE("train-time validation: window longer than clips, empty splits") {
    const DatasetSplit data = small_data(9, 6, 4, 23);  // clips of 4 frames
    TrainConfig tc = small_train(1, 9);
    tc.grw.T = 5;  // longer than the clip
    Model m = init_model(small_model(), 24, 1);
    CHECK_THROWS(train(m, data, tc));

    tc.grw.lambda = 0.0;  // smoothing off: the same config trains fine
    Model m2 = init_model(small_model(), 24, 1);
    CHECK_NOTHROW(train(m2, data, tc));

    DatasetSplit empty = data;
    empty.train.clear();
    Model m3 = init_model(small_model(), 24, 1);
    CHECK_THROWS(train(m3, empty, small_train(1, 4)));
}

TEST_CASE("smoothing training lowers embedding acceleration versus baseline") {
    const DatasetSplit data = small_data(90, 30, 10, 33);
    ModelConfig mc = small_model();
    TrainConfig base = small_train(60, 32);
    base.grw.lambda = 0.0;
    TrainConfig smooth = small_train(60, 32);
    smooth.grw.lambda = 0.5;
    smooth.grw.T = 5;

    Model mb = init_model(mc, 24, 77);
    Model ms = init_model(mc, 24, 77);
    const RunMetrics rb = train(mb, data, base);
    const RunMetrics rs = train(ms, data, smooth);
    CHECK(rb.final_eval.accuracy >= 0.4);  // both runs must actually learn
    CHECK(rs.final_eval.accuracy >= 0.4);
    CHECK(rs.final_eval.mean_sq_accel < 0.5 * rb.final_eval.mean_sq_accel);
    CHECK(rs.epochs.back().train_smooth != 0.0);
    CHECK(rb.epochs.back().train_smooth == 0.0);
}

TEST_CASE("metrics and pca tables are well-formed") {
    const DatasetSplit data = small_data(12, 5, 8, 41);
    TrainConfig tc = small_train(2, 6);
    Model m = init_model(small_model(), 24, 14);
    const RunMetrics r = train(m, data, tc);

    std::istringstream metrics(metrics_csv(r));
    std::string line;
    REQUIRE(std::getline(metrics, line));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    CHECK(line ==
          "epoch,train_total,train_ce,train_smooth,test_acc,mean_sq_accel,mean_sq_speed,"
          "lr_backbone,lr_head");
    int rows = 0;
    while (std::getline(metrics, line))
        if (!line.empty() && line != "\r") ++rows;
    CHECK(rows == 2);

    std::istringstream pca(pca_csv(r));
    REQUIRE(std::getline(pca, line));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    CHECK(line == "clip,frame,label,pc1,pc2");
    rows = 0;
    while (std::getline(pca, line))
        if (!line.empty() && line != "\r") ++rows;
    CHECK(rows == 5 * 8);  // one row per test frame
    CHECK(r.pca.coords.rows() == 5 * 8);
    CHECK(static_cast<int>(r.pca_label.size()) == 5 * 8);
}

TEST_CASE("run directory contains config, metrics, pca, and checkpoint") {
    const DatasetSplit data = small_data(9, 4, 8, 47);
    TrainConfig tc = small_train(1, 9);
    Model m = init_model(small_model(), 24, 15);
    const RunMetrics r = train(m, data, tc);
    write_run_dir("trainer_tmp_run", m, "{\"note\":1}\n", r);
    for (const char* name : {"config.json", "metrics.csv", "pca.csv", "checkpoint.bin"}) {
        std::ifstream f(std::string("trainer_tmp_run/") + name, std::ios::binary);
        CHECK(bool(f));
    }
    const Model back = load_model("trainer_tmp_run/checkpoint.bin");
    CHECK(back.input_dim == m.input_dim);
    for (const char* name : {"config.json", "metrics.csv", "pca.csv", "checkpoint.bin"})
        std::remove((std::string("trainer_tmp_run/") + name).c_str());
    std::remove("trainer_tmp_run");
}

TEST_CASE("ablation sweep: lambda = 0 cell reproduces the baseline run") {
    const DatasetSplit data = small_data(18, 6, 10, 53);
    ModelConfig mc = small_model();
    TrainConfig tc = small_train(2, 9);
    tc.seed = 5;

    const std::vector<SweepRow> rows = ablation_sweep("lambda", {0.0, 0.1, 1.0}, mc, tc, data);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].value == 0.0);

    TrainConfig base = tc;
    base.grw.lambda = 0.0;
    Model m = init_model(mc, 24, tc.seed);
    const RunMetrics r = train(m, data, base);
    CHECK(rows[0].test_accuracy == r.final_eval.accuracy);
    CHECK(rows[0].mean_sq_accel == r.final_eval.mean_sq_accel);
    CHECK(rows[0].train_total == r.epochs.back().train_total);

    const std::vector<SweepRow> trows = ablation_sweep("T", {3.0, 5.0}, mc, tc, data);
    REQUIRE(trows.size() == 2);

    CHECK_THROWS(ablation_sweep("gamma", {1.0}, mc, tc, data));
    CHECK_THROWS(ablation_sweep("T", {3.5}, mc, tc, data));
    CHECK_THROWS(ablation_sweep("lambda", {}, mc, tc, data));

    std::istringstream csv(sweep_csv(rows));
    std::string line;
    REQUIRE(std::getline(csv, line));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    CHECK(line == "axis,value,test_acc,mean_sq_accel,mean_sq_speed,train_total");
}
