#include "grw/config.hpp"

#include <stdexcept>
#include <string>

#include "json.hpp"

namespace grw {

using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("config: " + msg); }

// Strict section walker: every key in `j` must be consumed by `assign`.
template <typename Assign>
void walk(const ordered_json& j, const std::string& where, Assign&& assign) {
    if (!j.is_object()) fail(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!assign(key, value)) fail("unknown key \"" + key + "\" in " + where);
    }
}

template <typename T>
T as(const ordered_json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const ordered_json::exception&) {
        fail("bad value for \"" + key + "\"");
    }
}

std::vector<int> as_int_list(const ordered_json& v, const std::string& key) {
    if (!v.is_array()) fail("\"" + key + "\" must be an array of integers");
    return as<std::vector<int>>(v, key);
}

void parse_grw(const ordered_json& j, GrwSection& s) {
    walk(j, "section \"grw\"", [&](const std::string& k, const ordered_json& v) {
        if (k == "T") s.T = as<int>(v, k);
        else if (k == "alpha") s.alpha = as<double>(v, k);
        else if (k == "lambda") s.lambda = as<double>(v, k);
        else if (k == "k") s.k = as<int>(v, k);
        else return false;
        return true;
    });
}

void parse_model(const ordered_json& j, ModelSection& s) {
    walk(j, "section \"model\"", [&](const std::string& k, const ordered_json& v) {
        if (k == "encoder_hidden") s.encoder_hidden = as_int_list(v, k);
        else if (k == "embed_dim") s.embed_dim = as<int>(v, k);
        else if (k == "head_blocks") s.head_blocks = as<int>(v, k);
        else if (k == "classes") s.classes = as<int>(v, k);
        else if (k == "placement") s.placement = as<std::string>(v, k);
        else return false;
        return true;
    });
}

void parse_train(const ordered_json& j, TrainSection& s) {
    walk(j, "section \"train\"", [&](const std::string& k, const ordered_json& v) {
        if (k == "epochs") s.epochs = as<int>(v, k);
        else if (k == "batch_size") s.batch_size = as<int>(v, k);
        else if (k == "lr_backbone_start") s.lr_backbone_start = as<double>(v, k);
        else if (k == "lr_backbone_end") s.lr_backbone_end = as<double>(v, k);
        else if (k == "lr_head_start") s.lr_head_start = as<double>(v, k);
        else if (k == "lr_head_end") s.lr_head_end = as<double>(v, k);
        else if (k == "momentum") s.momentum = as<double>(v, k);
        else return false;
        return true;
    });
}

void parse_data(const ordered_json& j, DataSection& s) {
    walk(j, "section \"data\"", [&](const std::string& k, const ordered_json& v) {
        if (k == "train") s.train = as<int>(v, k);
        else if (k == "test") s.test = as<int>(v, k);
        else if (k == "points") s.points = as<int>(v, k);
        else if (k == "frames") s.frames = as<int>(v, k);
        else if (k == "noise") s.noise = as<double>(v, k);
        else if (k == "omega_min") s.omega_min = as<double>(v, k);
        else if (k == "omega_max") s.omega_max = as<double>(v, k);
        else return false;
        return true;
    });
}

void parse_scale(const ordered_json& j, ScaleSection& s) {
    walk(j, "section \"scale\"", [&](const std::string& k, const ordered_json& v) {
        if (k == "t_min") s.t_min = as<int>(v, k);
        else if (k == "t_max") s.t_max = as<int>(v, k);
        else if (k == "restarts") s.restarts = as<int>(v, k);
        else if (k == "steps") s.steps = as<int>(v, k);
        else return false;
        return true;
    });
}

}  // namespace

GrwConfig RootConfig::grw_config() const {
    GrwConfig c;
    c.T = grw.T;
    c.alpha = grw.alpha;
    c.lambda = grw.lambda;
    c.k = grw.k;
    c.seed = seed;
    return c;
}

ModelConfig RootConfig::model_config() const {
    ModelConfig c;
    c.encoder_hidden = model.encoder_hidden;
    c.embed_dim = model.embed_dim;
    c.head_blocks = model.head_blocks;
    c.classes = model.classes;
    c.placement = placement_from_name(model.placement);
    return c;
}

TrainConfig RootConfig::train_config() const {
    TrainConfig c;
    c.epochs = train.epochs;
    c.batch_size = train.batch_size;
    c.lr_backbone_start = train.lr_backbone_start;
    c.lr_backbone_end = train.lr_backbone_end;
    c.lr_head_start = train.lr_head_start;
    c.lr_head_end = train.lr_head_end;
    c.momentum = train.momentum;
    c.grw = grw_config();
    c.seed = seed;
    return c;
}

DataConfig RootConfig::data_config() const {
    DataConfig c;
    c.train_count = data.train;
    c.test_count = data.test;
    c.n = data.points;
    c.M = data.frames;
    c.sigma_noise = data.noise;
    c.omega_min = data.omega_min;
    c.omega_max = data.omega_max;
    c.seed = seed;
    return c;
}

MinimizeOptions RootConfig::minimize_options() const {
    MinimizeOptions o;
    o.restarts = scale.restarts;
    o.steps = scale.steps;
    o.seed = seed;
    return o;
}

RootConfig parse_config(const std::string& json_text, const RootConfig& base) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const ordered_json::exception& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    RootConfig cfg = base;
    walk(doc, "the root object", [&](const std::string& k, const ordered_json& v) {
        if (k == "seed") cfg.seed = as<std::uint64_t>(v, k);
        else if (k == "output_dir") cfg.output_dir = as<std::string>(v, k);
        else if (k == "grw") parse_grw(v, cfg.grw);
        else if (k == "model") parse_model(v, cfg.model);
        else if (k == "train") parse_train(v, cfg.train);
        else if (k == "data") parse_data(v, cfg.data);
        else if (k == "scale") parse_scale(v, cfg.scale);
        else return false;
        return true;
    });
    return cfg;
}

std::string serialize_config(const RootConfig& cfg) {
    ordered_json j;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["grw"] = {{"T", cfg.grw.T},
                {"alpha", cfg.grw.alpha},
                {"lambda", cfg.grw.lambda},
                {"k", cfg.grw.k}};
    j["model"] = {{"encoder_hidden", cfg.model.encoder_hidden},
                  {"embed_dim", cfg.model.embed_dim},
                  {"head_blocks", cfg.model.head_blocks},
                  {"classes", cfg.model.classes},
                  {"placement", cfg.model.placement}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"lr_backbone_start", cfg.train.lr_backbone_start},
                  {"lr_backbone_end", cfg.train.lr_backbone_end},
                  {"lr_head_start", cfg.train.lr_head_start},
                  {"lr_head_end", cfg.train.lr_head_end},
                  {"momentum", cfg.train.momentum}};
    j["data"] = {{"train", cfg.data.train},
                 {"test", cfg.data.test},
                 {"points", cfg.data.points},
                 {"frames", cfg.data.frames},
                 {"noise", cfg.data.noise},
                 {"omega_min", cfg.data.omega_min},
                 {"omega_max", cfg.data.omega_max}};
    j["scale"] = {{"t_min", cfg.scale.t_min},
                  {"t_max", cfg.scale.t_max},
                  {"restarts", cfg.scale.restarts},
                  {"steps", cfg.scale.steps}};
    return j.dump(2) + "\n";
}

}  // namespace grw
