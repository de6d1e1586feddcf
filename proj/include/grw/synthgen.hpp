#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grw/rng.hpp"
#include "grw/tensor.hpp"

namespace grw {

// Synthetic rotating-rigid-body clips: a labeled rotation axis drives the
// motion, every single frame is a uniformly re-oriented point cloud whose
// marginal distribution carries no label information. Telling the classes
// apart requires looking across frames.

enum class RotationLabel : std::uint8_t { yaw = 0, pitch = 1, roll = 2 };

inline constexpr int kNumLabels = 3;

// Body-frame rotation axis: yaw spins about z, pitch about y, roll about x.
int label_axis(RotationLabel label);
const char* label_name(RotationLabel label);
RotationLabel label_from_index(int i);

struct RigidBody {
    Tensor points;  // n x 3, zero-centered, not all collinear
};

// Airplane-like template (distinct extents along all three body axes) plus
// Gaussian jitter, re-centered. Collinear draws are rejected and redrawn,
// at most 100 attempts. n >= 4; for n > 8 extra points fill the body's box.
RigidBody gen_body(int n, Rng& rng);

struct MotionClip {
    Tensor frames;       // M x (3n): frame t is flatten(R_t * P) + noise
    RotationLabel label = RotationLabel::yaw;
    Tensor orientation;  // 3 x 3 initial rotation R_init
    double omega = 0.0;  // radians per frame about the labeled body axis
};

// 3x3 rotation by `angle` about coordinate axis 0 (x), 1 (y), or 2 (z).
Tensor rotation_about_axis(int axis, double angle);

// Uniform random rotation via normalized-quaternion sampling.
Tensor random_rotation(Rng& rng);

// Frame t applies R_init * R_axis(t * omega) to the body, then adds
// N(0, sigma_noise^2) observation noise per coordinate. omega must be
// nonzero (arbitrarily small is fine), sigma_noise >= 0, M >= 1.
MotionClip gen_clip(const RigidBody& body, RotationLabel label, Rng& rng, int M, double omega,
                    double sigma_noise);

struct DataConfig {
    int train_count = 1000;
    int test_count = 100;
    int n = 8;   // landmark points per body
    int M = 20;  // frames per clip
    double sigma_noise = 0.01;
    double omega_min = 0.15;  // |omega| drawn uniformly from [min, max],
    double omega_max = 0.6;   // sign flipped by a fair coin
    std::uint64_t seed = 0;

    void validate() const;
};

struct DatasetSplit {
    std::vector<MotionClip> train;
    std::vector<MotionClip> test;
    DataConfig config;
};

// Labels round-robin (per-class counts differ by at most 1); every clip owns
// an RNG stream derived from (seed, split, index), so generation order does
// not matter and regeneration is reproducible.
DatasetSplit gen_dataset(const DataConfig& cfg);

std::vector<int> label_counts(const std::vector<MotionClip>& clips);

// Versioned binary container: header {magic "GRWD", version, n, M,
// train_count, test_count, seed}, then per-clip records {label: u8,
// frames: M*3n doubles}, all little-endian. Writes a generation-parameter
// sidecar next to it at `path`.json. Deterministic bytes for a given split.
void save_dataset(const DatasetSplit& split, const std::string& path);

// Reads frames and labels back. The per-clip orientation and omega are not
// part of the container; loaded clips carry an identity orientation and
// omega = 0. Config fields absent from the header keep their defaults.
DatasetSplit load_dataset(const std::string& path);

std::string dataset_sidecar_json(const DatasetSplit& split);

}  // namespace grw
