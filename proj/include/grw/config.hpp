#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grw/grw_loss.hpp"
#include "grw/scale_lab.hpp"
#include "grw/synthgen.hpp"
#include "grw/trainer.hpp"

namespace grw {

// Resolved run configuration: one JSON document with a global seed, an
// output directory, and one section per subsystem. Parsing is strict --
// unknown keys anywhere are an error -- and partial documents overlay the
// built-in defaults, so serialize() always emits every field.

struct GrwSection {
    int T = 5;
    double alpha = 0.5;
    double lambda = 0.1;
    int k = 1000;
    bool operator==(const GrwSection&) const = default;
};

struct ModelSection {
    std::vector<int> encoder_hidden = {32};
    int embed_dim = 16;
    int head_blocks = 2;
    int classes = 3;
    std::string placement = "final";  // final | intermediate | none
    bool operator==(const ModelSection&) const = default;
};

struct TrainSection {
    int epochs = 30;
    int batch_size = 32;
    double lr_backbone_start = 0.015;
    double lr_backbone_end = 1e-3;
    double lr_head_start = 0.0075;
    double lr_head_end = 1e-3;
    double momentum = 0.9;
    bool operator==(const TrainSection&) const = default;
};

struct DataSection {
    int train = 1000;
    int test = 100;
    int points = 8;
    int frames = 20;
    double noise = 0.01;
    double omega_min = 0.15;
    double omega_max = 0.6;
    bool operator==(const DataSection&) const = default;
};

struct ScaleSection {
    int t_min = 3;
    int t_max = 10;
    int restarts = 20;
    int steps = 5000;
    bool operator==(const ScaleSection&) const = default;
};

struct RootConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "runs";
    GrwSection grw;
    ModelSection model;
    TrainSection train;
    DataSection data;
    ScaleSection scale;
    bool operator==(const RootConfig&) const = default;

    // Materialize the library configs, wiring the global seed through.
    GrwConfig grw_config() const;
    ModelConfig model_config() const;  // throws on an unknown placement name
    TrainConfig train_config() const;
    DataConfig data_config() const;
    MinimizeOptions minimize_options() const;
};

// Strict parse overlaying `base`; keys absent from the document keep their
// base values, unknown keys or wrong types throw std::runtime_error.
RootConfig parse_config(const std::string& json_text, const RootConfig& base = {});

// Every field, fixed key order, 2-space indent; parse(serialize(c)) == c.
std::string serialize_config(const RootConfig& cfg);

}  // namespace grw
