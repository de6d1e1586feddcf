#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "grw/rng.hpp"
#include "grw/synthgen.hpp"
#include "grw/tensor.hpp"
#include "json.hpp"

using namespace grw;

namespace {

double frame_coord(const MotionClip& c, int t, int point, int axis) {
    return c.frames.at(t, 3 * point + axis);
}

double pair_distance(const MotionClip& c, int t, int i, int j) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = frame_coord(c, t, i, a) - frame_coord(c, t, j, a);
        s += d * d;
    }
    return std::sqrt(s);
}

bool same_bits(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.numel(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("body generation: centered, non-collinear, deterministic") {
    Rng rng(derive_seed(1, "body"));
    for (int n : {4, 8, 12}) {
        const RigidBody body = gen_body(n, rng);
        REQUIRE(body.points.rows() == n);
        REQUIRE(body.points.cols() == 3);
        for (int c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (int i = 0; i < n; ++i) mean += body.points.at(i, c);
            CHECK(std::abs(mean / n) < 1e-12);
        }
        // all pairwise offsets from point 0 must not share one direction
        bool spread = false;
        for (int i = 1; i < n && !spread; ++i)
            for (int j = i + 1; j < n && !spread; ++j) {
                std::array<double, 3> u, v;
                for (int a = 0; a < 3; ++a) {
                    u[a] = body.points.at(i, a) - body.points.at(0, a);
                    v[a] = body.points.at(j, a) - body.points.at(0, a);
                }
                const double cx = u[1] * v[2] - u[2] * v[1];
                const double cy = u[2] * v[0] - u[0] * v[2];
                const double cz = u[0] * v[1] - u[1] * v[0];
                if (cx * cx + cy * cy + cz * cz > 1e-6) spread = true;
            }
        CHECK(spread);
    }
    CHECK_THROWS(gen_body(3, rng));

    Rng a(42), b(42);
    CHECK(same_bits(gen_body(8, a).points, gen_body(8, b).points));
}

TEST_CASE("axis rotations are orthogonal, orientation-preserving, and invertible") {
    for (int axis = 0; axis < 3; ++axis) {
        for (double angle : {0.3, -1.2, 2.9}) {
            const Tensor r = rotation_about_axis(axis, angle);
            const Tensor rinv = rotation_about_axis(axis, -angle);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    double dot = 0.0, prod = 0.0;
                    for (int k = 0; k < 3; ++k) {
                        dot += r.at(k, i) * r.at(k, j);
                        prod += r.at(i, k) * rinv.at(k, j);
                    }
                    const double want = i == j ? 1.0 : 0.0;
                    CHECK(std::abs(dot - want) < 1e-15);
                    CHECK(std::abs(prod - want) < 1e-15);
                }
            const double det =
                r.at(0, 0) * (r.at(1, 1) * r.at(2, 2) - r.at(1, 2) * r.at(2, 1)) -
                r.at(0, 1) * (r.at(1, 0) * r.at(2, 2) - r.at(1, 2) * r.at(2, 0)) +
                r.at(0, 2) * (r.at(1, 0) * r.at(2, 1) - r.at(1, 1) * r.at(2, 0));
            CHECK(det == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK_THROWS(rotation_about_axis(3, 0.1));
}

TEST_CASE("random orientations are uniform-protocol rotations") {
    Rng rng(derive_seed(2, "orient"));
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor r = random_rotation(rng);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double dot = 0.0;
                for (int k = 0; k < 3; ++k) dot += r.at(k, i) * r.at(k, j);
                CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
            }
        const double det = r.at(0, 0) * (r.at(1, 1) * r.at(2, 2) - r.at(1, 2) * r.at(2, 1)) -
                           r.at(0, 1) * (r.at(1, 0) * r.at(2, 2) - r.at(1, 2) * r.at(2, 0)) +
                           r.at(0, 2) * (r.at(1, 0) * r.at(2, 1) - r.at(1, 1) * r.at(2, 0));
        CHECK(det == doctest::Approx(1.0).epsilon(1e-12));
    }
    Rng a(7), b(7);
    CHECK(same_bits(random_rotation(a), random_rotation(b)));
}

TEST_CASE("clip generation: shapes, argument validation, vanishing-rate limit") {
    Rng rng(derive_seed(3, "clip"));
    const RigidBody body = gen_body(8, rng);
    const MotionClip clip = gen_clip(body, RotationLabel::pitch, rng, 12, 0.4, 0.01);
    CHECK(clip.frames.rows() == 12);
    CHECK(clip.frames.cols() == 24);
    CHECK(clip.label == RotationLabel::pitch);
    CHECK(clip.omega == 0.4);
    CHECK(clip.orientation.rows() == 3);

    CHECK_THROWS(gen_clip(body, RotationLabel::yaw, rng, 5, 0.0, 0.01));
    CHECK_THROWS(gen_clip(body, RotationLabel::yaw, rng, 0, 0.3, 0.01));
    CHECK_THROWS(gen_clip(body, RotationLabel::yaw, rng, 5, 0.3, -1.0));

    const MotionClip still = gen_clip(body, RotationLabel::roll, rng, 6, 1e-12, 0.0);
    for (int t = 1; t < 6; ++t)
        for (int j = 0; j < 24; ++j)
            CHECK(std::abs(still.frames.at(t, j) - still.frames.at(0, j)) < 1e-9);
}

TEST_CASE("noise-free motion is rigid: pairwise distances preserved") {
    Rng rng(derive_seed(4, "rigid"));
    const RigidBody body = gen_body(8, rng);
    const MotionClip clip = gen_clip(body, RotationLabel::yaw, rng, 10, 0.5, 0.0);
    for (int t = 0; t < 10; ++t)
        for (int i = 0; i < 8; ++i)
            for (int j = i + 1; j < 8; ++j) {
                double s = 0.0;
                for (int a = 0; a < 3; ++a) {
                    const double d = body.points.at(i, a) - body.points.at(j, a);
                    s += d * d;
                }
                CHECK(std::abs(pair_distance(clip, t, i, j) - std::sqrt(s)) < 1e-10);
            }
}

TEST_CASE("undoing the per-frame rotation recovers the body exactly") {
    Rng rng(derive_seed(5, "undo"));
    const RigidBody body = gen_body(8, rng);
    for (RotationLabel label : {RotationLabel::yaw, RotationLabel::pitch, RotationLabel::roll}) {
        const double omega = 0.37;
        const MotionClip clip = gen_clip(body, label, rng, 9, omega, 0.0);
        const Tensor& rinit = clip.orientation;
        for (int t = 0; t < 9; ++t) {
            const Tensor rback = rotation_about_axis(label_axis(label), -t * omega);
            for (int i = 0; i < 8; ++i) {
                // p = R_spin(-t*omega) * R_init^T * x_t
                std::array<double, 3> x = {frame_coord(clip, t, i, 0), frame_coord(clip, t, i, 1),
                                           frame_coord(clip, t, i, 2)};
                std::array<double, 3> y, p;
                for (int r = 0; r < 3; ++r)
                    y[r] = rinit.at(0, r) * x[0] + rinit.at(1, r) * x[1] + rinit.at(2, r) * x[2];
                for (int r = 0; r < 3; ++r)
                    p[r] = rback.at(r, 0) * y[0] + rback.at(r, 1) * y[1] + rback.at(r, 2) * y[2];
                for (int a = 0; a < 3; ++a) CHECK(std::abs(p[a] - body.points.at(i, a)) < 1e-10);
            }
        }
    }
}

TEST_CASE("single-frame marginals carry no label signal") {
    // two-sample comparison over 10^4 frames per label, aggregated per clip so
    // the samples entering the standard error are independent
    const int clips_per_label = 500;
    const int M = 20;
    Rng wrng(derive_seed(9, "w"));
    std::vector<double> w(24);
    double norm = 0.0;
    for (double& v : w) {
        v = gauss(wrng);
        norm += v * v;
    }
    for (double& v : w) v /= std::sqrt(norm);

    std::array<std::vector<double>, 3> proj_means, proj_sq_means;
    for (int li = 0; li < 3; ++li) {
        const RotationLabel label = label_from_index(li);
        for (int i = 0; i < clips_per_label; ++i) {
            Rng rng(derive_seed(123, std::string("marg/") + label_name(label) + "/" + std::to_string(i)));
            const RigidBody body = gen_body(8, rng);
            const double omega = (uniform_u64(rng, 2) ? 1.0 : -1.0) * (0.15 + 0.45 * uniform_double(rng));
            const MotionClip clip = gen_clip(body, label, rng, M, omega, 0.01);
            double m1 = 0.0, m2 = 0.0;
            for (int t = 0; t < M; ++t) {
                double p = 0.0;
                for (int j = 0; j < 24; ++j) p += w[static_cast<std::size_t>(j)] * clip.frames.at(t, j);
                m1 += p;
                m2 += p * p;
            }
            proj_means[static_cast<std::size_t>(li)].push_back(m1 / M);
            proj_sq_means[static_cast<std::size_t>(li)].push_back(m2 / M);
        }
    }

    auto mean_se = [](const std::vector<double>& xs) {
        double m = 0.0;
        for (double x : xs) m += x;
        m /= static_cast<double>(xs.size());
        double v = 0.0;
        for (double x : xs) v += (x - m) * (x - m);
        v /= static_cast<double>(xs.size() - 1);
        return std::pair<double, double>(m, std::sqrt(v / static_cast<double>(xs.size())));
    };

    for (const auto& stats : {proj_means, proj_sq_means}) {
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) {
                const auto [ma, sa] = mean_se(stats[static_cast<std::size_t>(a)]);
                const auto [mb, sb] = mean_se(stats[static_cast<std::size_t>(b)]);
                const double se = std::sqrt(sa * sa + sb * sb);
                CHECK(std::abs(ma - mb) <= 5.0 * se);
            }
    }
}

TEST_CASE("a linear classifier on shuffled single frames stays near chance") {
    DataConfig cfg;
    cfg.train_count = 600;
    cfg.test_count = 300;
    cfg.M = 8;
    cfg.seed = 31;
    const DatasetSplit data = gen_dataset(cfg);

    // one random frame per clip, so samples are independent
    Rng pick(derive_seed(cfg.seed, "frame-pick"));
    auto frames_of = [&](const std::vector<MotionClip>& clips, Tensor& x, std::vector<int>& y) {
        const int d = 3 * cfg.n;
        x = Tensor::zeros({static_cast<int>(clips.size()), d});
        y.clear();
        for (std::size_t i = 0; i < clips.size(); ++i) {
            const int t = static_cast<int>(uniform_u64(pick, static_cast<std::uint64_t>(cfg.M)));
            for (int j = 0; j < d; ++j) x.at(static_cast<int>(i), j) = clips[i].frames.at(t, j);
            y.push_back(static_cast<int>(clips[i].label));
        }
    };
    Tensor xtr, xte;
    std::vector<int> ytr, yte;
    frames_of(data.train, xtr, ytr);
    frames_of(data.test, xte, yte);

    Tensor w = Tensor::zeros({3, 24});
    Tensor b = Tensor::zeros({3});
    for (int step = 0; step < 60; ++step) {
        Tape tape;
        Var vw = tape.leaf(w), vb = tape.leaf(b);
        Var logits = add_rowvec(matmul(tape.constant(xtr), transpose(vw)), vb);
        Var loss = cross_entropy_mean(logits, ytr);
        tape.backward(loss);
        for (std::size_t i = 0; i < w.numel(); ++i) w.data()[i] -= 0.5 * vw.grad().data()[i];
        for (std::size_t i = 0; i < b.numel(); ++i) b.data()[i] -= 0.5 * vb.grad().data()[i];
    }

    auto accuracy = [&](const Tensor& x, const std::vector<int>& y) {
        int hits = 0;
        for (int i = 0; i < x.rows(); ++i) {
            int best = 0;
            double bv = -1e300;
            for (int c = 0; c < 3; ++c) {
                double v = b.data()[c];
                for (int j = 0; j < 24; ++j) v += w.at(c, j) * x.at(i, j);
                if (v > bv) {
                    bv = v;
                    best = c;
                }
            }
            if (best == y[static_cast<std::size_t>(i)]) ++hits;
        }
        return static_cast<double>(hits) / x.rows();
    };
    const double test_acc = accuracy(xte, yte);
    CHECK(test_acc <= 0.40);
    CHECK(test_acc >= 0.15);  // sanity: not anti-learning either
}

TEST_CASE("dataset generation: counts, balance, omega range, determinism") {
    DataConfig cfg;
    cfg.train_count = 50;
    cfg.test_count = 20;
    cfg.seed = 5;
    const DatasetSplit data = gen_dataset(cfg);
    REQUIRE(static_cast<int>(data.train.size()) == 50);
    REQUIRE(static_cast<int>(data.test.size()) == 20);

    for (const std::vector<int>& counts : {label_counts(data.train), label_counts(data.test)}) {
        int lo = counts[0], hi = counts[0];
        for (int c : counts) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        CHECK(hi - lo <= 1);
    }
    for (const MotionClip& c : data.train) {
        CHECK(c.frames.rows() == cfg.M);
        CHECK(c.frames.cols() == 3 * cfg.n);
        CHECK(std::abs(c.omega) >= cfg.omega_min);
        CHECK(std::abs(c.omega) <= cfg.omega_max);
        CHECK(c.frames.all_finite());
    }

    const DatasetSplit again = gen_dataset(cfg);
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        CHECK(same_bits(data.train[i].frames, again.train[i].frames));
        CHECK(data.train[i].label == again.train[i].label);
        CHECK(data.train[i].omega == again.train[i].omega);
    }
    for (std::size_t i = 0; i < data.test.size(); ++i)
        CHECK(same_bits(data.test[i].frames, again.test[i].frames));

    // train and test streams are distinct: first clips differ
    CHECK(!same_bits(data.train[0].frames, data.test[0].frames));

    DataConfig bad = cfg;
    bad.train_count = 0;
    CHECK_THROWS(bad.validate());
    bad = cfg;
    bad.test_count = 0;
    CHECK_THROWS(bad.validate());
    bad = cfg;
    bad.n = 3;
    CHECK_THROWS(bad.validate());
    bad = cfg;
    bad.M = 2;
    CHECK_THROWS(bad.validate());
    bad = cfg;
    bad.sigma_noise = -0.1;
    CHECK_THROWS(bad.validate());
    bad = cfg;
    bad.omega_min = 0.0;
    CHECK_THROWS(bad.validate());
    bad = cfg;
    bad.omega_max = 0.01;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("container round trip, byte determinism, sidecar, corruption checks") {
    DataConfig cfg;
    cfg.train_count = 12;
    cfg.test_count = 6;
    cfg.M = 5;
    cfg.seed = 77;
    const DatasetSplit data = gen_dataset(cfg);

    const std::string p1 = "synthgen_tmp_a.grwd";
    const std::string p2 = "synthgen_tmp_b.grwd";
    save_dataset(data, p1);
    save_dataset(data, p2);
    CHECK(read_file(p1) == read_file(p2));

    const DatasetSplit back = load_dataset(p1);
    CHECK(back.config.n == cfg.n);
    CHECK(back.config.M == cfg.M);
    CHECK(back.config.train_count == cfg.train_count);
    CHECK(back.config.test_count == cfg.test_count);
    CHECK(back.config.seed == cfg.seed);
    REQUIRE(back.train.size() == data.train.size());
    REQUIRE(back.test.size() == data.test.size());
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        CHECK(same_bits(back.train[i].frames, data.train[i].frames));
        CHECK(back.train[i].label == data.train[i].label);
    }
    for (std::size_t i = 0; i < data.test.size(); ++i)
        CHECK(same_bits(back.test[i].frames, data.test[i].frames));

    const nlohmann::json side = nlohmann::json::parse(read_file(p1 + ".json"));
    CHECK(side["train_count"] == 12);
    CHECK(side["test_count"] == 6);
    CHECK(side["n"] == 8);
    CHECK(side["frames_per_clip"] == 5);
    CHECK(side["train_label_counts"].size() == 3);

    const std::string bytes = read_file(p1);
    {
        std::ofstream f("synthgen_tmp_trunc.grwd", std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS(load_dataset("synthgen_tmp_trunc.grwd"));
    {
        std::string junk = bytes;
        junk[0] = 'X';
        std::ofstream f("synthgen_tmp_magic.grwd", std::ios::binary);
        f.write(junk.data(), static_cast<std::streamsize>(junk.size()));
    }
    CHECK_THROWS(load_dataset("synthgen_tmp_magic.grwd"));
    {
        std::string junk = bytes + "extra";
        std::ofstream f("synthgen_tmp_tail.grwd", std::ios::binary);
        f.write(junk.data(), static_cast<std::streamsize>(junk.size()));
    }
    CHECK_THROWS(load_dataset("synthgen_tmp_tail.grwd"));
    CHECK_THROWS(load_dataset("synthgen_tmp_missing.grwd"));

    for (const char* p : {"synthgen_tmp_a.grwd", "synthgen_tmp_a.grwd.json", "synthgen_tmp_b.grwd",
                          "synthgen_tmp_b.grwd.json", "synthgen_tmp_trunc.grwd",
                          "synthgen_tmp_magic.grwd", "synthgen_tmp_tail.grwd"})
        std::remove(p);
}
