#include "grw/synthgen.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "grw/wire.hpp"
#include "json.hpp"

namespace grw {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

// nose, tail, wingtips, stabilizers, fin, belly: extents ~4 x 2.4 x 1 so the
// three rotation axes produce visibly different motion
constexpr std::array<std::array<double, 3>, 8> kTemplate = {{
    {2.0, 0.0, 0.0},
    {-2.0, 0.0, 0.2},
    {0.2, 1.2, 0.0},
    {0.2, -1.2, 0.0},
    {-1.7, 0.5, 0.1},
    {-1.7, -0.5, 0.1},
    {-1.8, 0.0, 0.6},
    {0.3, 0.0, -0.4},
}};

bool is_collinear(const Tensor& p) {
    const int n = p.rows();
    // direction = longest offset from point 0; collinear iff every offset has
    // a negligible cross product with it
    double best = 0.0;
    std::array<double, 3> d = {0, 0, 0};
    for (int i = 1; i < n; ++i) {
        std::array<double, 3> o = {p.at(i, 0) - p.at(0, 0), p.at(i, 1) - p.at(0, 1),
                                   p.at(i, 2) - p.at(0, 2)};
        const double len2 = o[0] * o[0] + o[1] * o[1] + o[2] * o[2];
        if (len2 > best) {
            best = len2;
            d = o;
        }
    }
    if (best < 1e-18) return true;  // all points coincide
    for (int i = 1; i < n; ++i) {
        std::array<double, 3> o = {p.at(i, 0) - p.at(0, 0), p.at(i, 1) - p.at(0, 1),
                                   p.at(i, 2) - p.at(0, 2)};
        const double cx = o[1] * d[2] - o[2] * d[1];
        const double cy = o[2] * d[0] - o[0] * d[2];
        const double cz = o[0] * d[1] - o[1] * d[0];
        if (cx * cx + cy * cy + cz * cz > 1e-12 * best) return false;
    }
    return true;
}

// rows of `m` (3x3) times column p
std::array<double, 3> rotate_point(const Tensor& m, const std::array<double, 3>& p) {
    std::array<double, 3> out;
    for (int r = 0; r < 3; ++r)
        out[static_cast<std::size_t>(r)] = m.at(r, 0) * p[0] + m.at(r, 1) * p[1] + m.at(r, 2) * p[2];
    return out;
}

Tensor mat3_mul(const Tensor& a, const Tensor& b) {
    Tensor out = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            out.at(i, j) = a.at(i, 0) * b.at(0, j) + a.at(i, 1) * b.at(1, j) + a.at(i, 2) * b.at(2, j);
    return out;
}

constexpr char kMagic[4] = {'G', 'R', 'W', 'D'};
constexpr std::uint32_t kVersion = 1;

MotionClip make_clip(const DataConfig& cfg, const char* split, int index) {
    Rng rng(derive_seed(cfg.seed, std::string(split) + "/" + std::to_string(index)));
    const RigidBody body = gen_body(cfg.n, rng);
    const RotationLabel label = label_from_index(index % kNumLabels);
    double omega = cfg.omega_min + (cfg.omega_max - cfg.omega_min) * uniform_double(rng);
    if (uniform_u64(rng, 2) == 1) omega = -omega;
    return gen_clip(body, label, rng, cfg.M, omega, cfg.sigma_noise);
}

}  // namespace

int label_axis(RotationLabel label) {
    switch (label) {
        case RotationLabel::yaw: return 2;
        case RotationLabel::pitch: return 1;
        case RotationLabel::roll: return 0;
    }
    fail("unknown label");
}

const char* label_name(RotationLabel label) {
    switch (label) {
        case RotationLabel::yaw: return "yaw";
        case RotationLabel::pitch: return "pitch";
        case RotationLabel::roll: return "roll";
    }
    fail("unknown label");
}

RotationLabel label_from_index(int i) {
    if (i < 0 || i >= kNumLabels) fail("label index out of range");
    return static_cast<RotationLabel>(i);
}

RigidBody gen_body(int n, Rng& rng) {
    if (n < 4) fail("a body needs at least 4 landmark points");
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(n) * 3);
        for (int i = 0; i < n; ++i) {
            if (i < static_cast<int>(kTemplate.size())) {
                for (double c : kTemplate[static_cast<std::size_t>(i)]) data.push_back(c);
            } else {
                data.push_back(-2.0 + 4.0 * uniform_double(rng));
                data.push_back(-1.2 + 2.4 * uniform_double(rng));
                data.push_back(-0.6 + 1.2 * uniform_double(rng));
            }
        }
        for (double& c : data) c += 0.05 * gauss(rng);
        Tensor p({n, 3}, std::move(data));
        for (int c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (int i = 0; i < n; ++i) mean += p.at(i, c);
            mean /= n;
            for (int i = 0; i < n; ++i) p.at(i, c) -= mean;
        }
        if (!is_collinear(p)) return RigidBody{std::move(p)};
    }
    fail("could not draw a non-collinear body in 100 attempts");
}

Tensor rotation_about_axis(int axis, double angle) {
    if (axis < 0 || axis > 2) fail("axis must be 0, 1, or 2");
    const double c = std::cos(angle), s = std::sin(angle);
    switch (axis) {
        case 0: return Tensor({3, 3}, {1, 0, 0, 0, c, -s, 0, s, c});
        case 1: return Tensor({3, 3}, {c, 0, s, 0, 1, 0, -s, 0, c});
        default: return Tensor({3, 3}, {c, -s, 0, s, c, 0, 0, 0, 1});
    }
}

Tensor random_rotation(Rng& rng) {
    double w, x, y, z, norm2;
    do {
        w = gauss(rng);
        x = gauss(rng);
        y = gauss(rng);
        z = gauss(rng);
        norm2 = w * w + x * x + y * y + z * z;
    } while (norm2 < 1e-12);
    const double inv = 1.0 / std::sqrt(norm2);
    w *= inv;
    x *= inv;
    y *= inv;
    z *= inv;
    return Tensor({3, 3}, {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                           2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                           2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)});
}

MotionClip gen_clip(const RigidBody& body, RotationLabel label, Rng& rng, int M, double omega,
                    double sigma_noise) {
    if (body.points.rank() != 2 || body.points.cols() != 3) fail("body points must be n x 3");
    if (M < 1) fail("a clip needs at least one frame");
    if (omega == 0.0) fail("omega must be nonzero");
    if (sigma_noise < 0.0) fail("noise level must be non-negative");

    MotionClip clip;
    clip.label = label;
    clip.omega = omega;
    clip.orientation = random_rotation(rng);

    const int n = body.points.rows();
    const int axis = label_axis(label);
    clip.frames = Tensor::zeros({M, 3 * n});
    for (int t = 0; t < M; ++t) {
        const Tensor rt = mat3_mul(clip.orientation, rotation_about_axis(axis, t * omega));
        for (int i = 0; i < n; ++i) {
            const std::array<double, 3> p = {body.points.at(i, 0), body.points.at(i, 1),
                                             body.points.at(i, 2)};
            const std::array<double, 3> q = rotate_point(rt, p);
            for (int c = 0; c < 3; ++c) {
                double v = q[static_cast<std::size_t>(c)];
                if (sigma_noise > 0.0) v += sigma_noise * gauss(rng);
                clip.frames.at(t, 3 * i + c) = v;
            }
        }
    }
    return clip;
}

void DataConfig::validate() const {
    if (train_count < 1) fail("train_count must be positive");
    if (test_count < 1) fail("test_count must be positive");
    if (n < 4) fail("need at least 4 landmark points");
    if (M < 3) fail("need at least 3 frames per clip");
    if (sigma_noise < 0.0) fail("noise level must be non-negative");
    if (!(omega_min > 0.0) || omega_max < omega_min) fail("need 0 < omega_min <= omega_max");
}

DatasetSplit gen_dataset(const DataConfig& cfg) {
    cfg.validate();
    DatasetSplit split;
    split.config = cfg;
    split.train.reserve(static_cast<std::size_t>(cfg.train_count));
    split.test.reserve(static_cast<std::size_t>(cfg.test_count));
    for (int i = 0; i < cfg.train_count; ++i) split.train.push_back(make_clip(cfg, "train", i));
    for (int i = 0; i < cfg.test_count; ++i) split.test.push_back(make_clip(cfg, "test", i));
    return split;
}

std::vector<int> label_counts(const std::vector<MotionClip>& clips) {
    std::vector<int> counts(kNumLabels, 0);
    for (const MotionClip& c : clips) ++counts[static_cast<std::size_t>(c.label)];
    return counts;
}

void save_dataset(const DatasetSplit& split, const std::string& path) {
    const DataConfig& cfg = split.config;
    const int cells = cfg.M * 3 * cfg.n;
    if (static_cast<int>(split.train.size()) != cfg.train_count ||
        static_cast<int>(split.test.size()) != cfg.test_count)
        fail("split sizes disagree with the config");

    std::string out;
    out.reserve(64 + static_cast<std::size_t>(cfg.train_count + cfg.test_count) *
                         (1 + static_cast<std::size_t>(cells) * 8));
    out.append(kMagic, 4);
    wire::put_u32(out, kVersion);
    wire::put_u32(out, static_cast<std::uint32_t>(cfg.n));
    wire::put_u32(out, static_cast<std::uint32_t>(cfg.M));
    wire::put_u32(out, static_cast<std::uint32_t>(cfg.train_count));
    wire::put_u32(out, static_cast<std::uint32_t>(cfg.test_count));
    wire::put_u64(out, cfg.seed);
    for (const std::vector<MotionClip>* clips : {&split.train, &split.test}) {
        for (const MotionClip& c : *clips) {
            if (c.frames.rows() != cfg.M || c.frames.cols() != 3 * cfg.n)
                fail("clip shape disagrees with the config");
            out.push_back(static_cast<char>(static_cast<std::uint8_t>(c.label)));
            for (int t = 0; t < cfg.M; ++t)
                for (int j = 0; j < 3 * cfg.n; ++j) wire::put_f64(out, c.frames.at(t, j));
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) fail("write failed: " + path);
    f.close();

    const std::string sidecar = dataset_sidecar_json(split);
    std::ofstream j(path + ".json", std::ios::binary | std::ios::trunc);
    if (!j) fail("cannot open " + path + ".json for writing");
    j.write(sidecar.data(), static_cast<std::streamsize>(sidecar.size()));
    if (!j) fail("write failed: " + path + ".json");
}

DatasetSplit load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    wire::Reader r{buf};

    r.need(4);
    if (std::memcmp(buf.data(), kMagic, 4) != 0) fail("not a dataset file: bad magic");
    r.pos = 4;
    if (r.u32() != kVersion) fail("unsupported dataset version");
    DataConfig cfg;
    cfg.n = static_cast<int>(r.u32());
    cfg.M = static_cast<int>(r.u32());
    cfg.train_count = static_cast<int>(r.u32());
    cfg.test_count = static_cast<int>(r.u32());
    cfg.seed = r.u64();
    if (cfg.n < 1 || cfg.n > 1000000 || cfg.M < 1 || cfg.M > 1000000 || cfg.train_count < 0 ||
        cfg.test_count < 0)
        fail("dataset header out of range");

    DatasetSplit split;
    split.config = cfg;
    auto read_clips = [&](int count, std::vector<MotionClip>& dst) {
        dst.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            MotionClip c;
            const std::uint8_t raw = r.u8();
            if (raw >= kNumLabels) fail("bad label byte");
            c.label = static_cast<RotationLabel>(raw);
            std::vector<double> data(static_cast<std::size_t>(cfg.M) * 3 * static_cast<std::size_t>(cfg.n));
            for (double& v : data) v = r.f64();
            c.frames = Tensor({cfg.M, 3 * cfg.n}, std::move(data));
            c.orientation = Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
            dst.push_back(std::move(c));
        }
    };
    read_clips(cfg.train_count, split.train);
    read_clips(cfg.test_count, split.test);
    if (r.pos != buf.size()) fail("trailing bytes after the last clip");
    return split;
}

std::string dataset_sidecar_json(const DatasetSplit& split) {
    const DataConfig& cfg = split.config;
    nlohmann::ordered_json j;
    j["format"] = {{"magic", "GRWD"}, {"version", kVersion}};
    j["n"] = cfg.n;
    j["frames_per_clip"] = cfg.M;
    j["train_count"] = cfg.train_count;
    j["test_count"] = cfg.test_count;
    j["seed"] = cfg.seed;
    j["sigma_noise"] = cfg.sigma_noise;
    j["omega_min"] = cfg.omega_min;
    j["omega_max"] = cfg.omega_max;
    j["labels"] = {label_name(RotationLabel::yaw), label_name(RotationLabel::pitch),
                   label_name(RotationLabel::roll)};
    j["train_label_counts"] = label_counts(split.train);
    j["test_label_counts"] = label_counts(split.test);
    return j.dump(2) + "\n";
}

}  // namespace grw
