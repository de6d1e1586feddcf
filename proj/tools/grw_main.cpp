#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grw/config.hpp"
#include "grw/gradcheck.hpp"
#include "grw/grw_loss.hpp"
#include "grw/scale_lab.hpp"
#include "grw/synthgen.hpp"
#include "grw/trainer.hpp"

namespace {

using namespace grw;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open \"" + path + "\"");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void spill(const std::string& path, const std::string& text) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write \"" + path + "\"");
    out << text;
}

std::string fmt12(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

// Whitespace- or comma-separated numeric rows; all rows must be equal width.
Tensor read_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open \"" + path + "\"");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::vector<double> row;
        double v = 0.0;
        while (ls >> v) row.push_back(v);
        if (!ls.eof()) fail("\"" + path + "\" has a non-numeric token");
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size())
            fail("\"" + path + "\" has ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail("\"" + path + "\" contains no rows");
    Tensor t = Tensor::zeros({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) t.at(i, j) = rows[i][j];
    return t;
}

std::uint64_t parse_env_seed(const char* text) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(text, &end, 10);
    if (errno != 0 || end == text || *end != '\0')
        fail("GRW_SEED must be an unsigned integer, got \"" + std::string(text) + "\"");
    return v;
}

// Per-subcommand shared options; precedence is flags > --config file >
// GRW_SEED (seed default only) > built-in defaults.
struct Common {
    CLI::App* sub = nullptr;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;

    void attach(CLI::App* s) {
        sub = s;
        s->add_option("--config", config_path, "JSON config file (strict keys)");
        s->add_option("--seed", seed, "root seed for every derived stream");
        s->add_option("--out", out_dir, "output directory");
    }

    RootConfig resolve() const {
        RootConfig base;
        if (const char* env = std::getenv("GRW_SEED")) base.seed = parse_env_seed(env);
        RootConfig cfg = base;
        if (sub->count("--config")) cfg = parse_config(slurp(config_path), base);
        if (sub->count("--seed")) cfg.seed = seed;
        if (sub->count("--out")) cfg.output_dir = out_dir;
        return cfg;
    }
};

struct GrwFlags {
    int T = 5;
    double alpha = 0.5, lambda = 0.1;
    int k = 1000;
    CLI::App* sub = nullptr;

    void attach(CLI::App* s) {
        sub = s;
        s->add_option("--T", T, "window length in frames");
        s->add_option("--alpha", alpha, "speed-control weight");
        s->add_option("--lambda", lambda, "smoothing weight in the total loss");
        s->add_option("--k", k, "ordering sample budget");
    }
    void apply(RootConfig& cfg) const {
        if (sub->count("--T")) cfg.grw.T = T;
        if (sub->count("--alpha")) cfg.grw.alpha = alpha;
        if (sub->count("--lambda")) cfg.grw.lambda = lambda;
        if (sub->count("--k")) cfg.grw.k = k;
    }
};

struct TrainFlags {
    std::string placement = "final";
    std::vector<int> hidden;
    int embed_dim = 16, head_blocks = 2;
    int epochs = 30, batch = 32;
    double lr_backbone = 0.02, lr_backbone_end = 1e-3;
    double lr_head = 0.01, lr_head_end = 1e-3;
    double momentum = 0.9;
    CLI::App* sub = nullptr;

    void attach(CLI::App* s) {
        sub = s;
        s->add_option("--placement", placement, "smoothing tap: final | intermediate | none");
        s->add_option("--hidden", hidden, "encoder hidden widths")->delimiter(',');
        s->add_option("--embed-dim", embed_dim, "embedding dimension");
        s->add_option("--head-blocks", head_blocks, "attention blocks (1 or 2)");
        s->add_option("--epochs", epochs, "training epochs");
        s->add_option("--batch", batch, "batch size in clips");
        s->add_option("--lr-backbone", lr_backbone, "backbone lr at epoch 0");
        s->add_option("--lr-backbone-end", lr_backbone_end, "backbone lr floor");
        s->add_option("--lr-head", lr_head, "head lr at epoch 0");
        s->add_option("--lr-head-end", lr_head_end, "head lr floor");
        s->add_option("--momentum", momentum, "SGD momentum");
    }
    void apply(RootConfig& cfg) const {
        if (sub->count("--placement")) cfg.model.placement = placement;
        if (sub->count("--hidden")) cfg.model.encoder_hidden = hidden;
        if (sub->count("--embed-dim")) cfg.model.embed_dim = embed_dim;
        if (sub->count("--head-blocks")) cfg.model.head_blocks = head_blocks;
        if (sub->count("--epochs")) cfg.train.epochs = epochs;
        if (sub->count("--batch")) cfg.train.batch_size = batch;
        if (sub->count("--lr-backbone")) cfg.train.lr_backbone_start = lr_backbone;
        if (sub->count("--lr-backbone-end")) cfg.train.lr_backbone_end = lr_backbone_end;
        if (sub->count("--lr-head")) cfg.train.lr_head_start = lr_head;
        if (sub->count("--lr-head-end")) cfg.train.lr_head_end = lr_head_end;
        if (sub->count("--momentum")) cfg.train.momentum = momentum;
    }
};

std::string loss_json(const LossBreakdown& b) {
    std::string out = "{\n";
    out += "  \"contrastive\": " + fmt12(b.contrastive) + ",\n";
    out += "  \"omega\": " + fmt12(b.omega) + ",\n";
    out += "  \"smooth\": " + fmt12(b.smooth) + ",\n";
    out += "  \"ce\": " + fmt12(b.ce) + ",\n";
    out += "  \"total\": " + fmt12(b.total) + "\n";
    out += "}\n";
    return out;
}

std::string eval_json(const EvalStats& s, std::size_t clips) {
    std::string out = "{\n";
    out += "  \"clips\": " + std::to_string(clips) + ",\n";
    out += "  \"accuracy\": " + fmt12(s.accuracy) + ",\n";
    out += "  \"mean_sq_accel\": " + fmt12(s.mean_sq_accel) + ",\n";
    out += "  \"mean_sq_speed\": " + fmt12(s.mean_sq_speed) + "\n";
    out += "}\n";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "grw: order-contrastive temporal smoothing lab.\n"
        "Precedence: flags > --config file > built-in defaults; the GRW_SEED\n"
        "environment variable replaces only the built-in default seed."};
    app.require_subcommand(1);
    int rc = 0;

    // ---- gen-data ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate a rotating-body clip dataset");
    auto gen_common = std::make_shared<Common>();
    gen_common->attach(gen);
    struct GenFlags {
        int train = 1000, test = 100, points = 8, frames = 20;
        double noise = 0.01, omega_min = 0.15, omega_max = 0.6;
        std::string file = "dataset.grw";
    };
    auto gf = std::make_shared<GenFlags>();
    gen->add_option("--train", gf->train, "training clips");
    gen->add_option("--test", gf->test, "test clips");
    gen->add_option("--points", gf->points, "landmark points per body");
    gen->add_option("--frames", gf->frames, "frames per clip");
    gen->add_option("--noise", gf->noise, "per-coordinate observation noise");
    gen->add_option("--omega-min", gf->omega_min, "minimum |angular velocity|");
    gen->add_option("--omega-max", gf->omega_max, "maximum |angular velocity|");
    gen->add_option("--file", gf->file, "dataset filename inside the output directory");
    gen->callback([&rc, gen, gen_common, gf] {
        RootConfig cfg = gen_common->resolve();
        if (gen->count("--train")) cfg.data.train = gf->train;
        if (gen->count("--test")) cfg.data.test = gf->test;
        if (gen->count("--points")) cfg.data.points = gf->points;
        if (gen->count("--frames")) cfg.data.frames = gf->frames;
        if (gen->count("--noise")) cfg.data.noise = gf->noise;
        if (gen->count("--omega-min")) cfg.data.omega_min = gf->omega_min;
        if (gen->count("--omega-max")) cfg.data.omega_max = gf->omega_max;
        const DatasetSplit split = gen_dataset(cfg.data_config());
        std::filesystem::create_directories(cfg.output_dir);
        const std::string path = cfg.output_dir + "/" + gf->file;
        save_dataset(split, path);
        std::printf("wrote %s (train=%zu test=%zu points=%d frames=%d seed=%llu)\n",
                    path.c_str(), split.train.size(), split.test.size(), cfg.data.points,
                    cfg.data.frames, static_cast<unsigned long long>(cfg.seed));
        std::printf("wrote %s\n", (path + ".json").c_str());
        rc = 0;
    });

    // ---- train ---------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "train the clip classifier, write a run directory");
    auto tr_common = std::make_shared<Common>();
    auto tr_grw = std::make_shared<GrwFlags>();
    auto tr_flags = std::make_shared<TrainFlags>();
    tr_common->attach(tr);
    tr_grw->attach(tr);
    tr_flags->attach(tr);
    auto tr_data = std::make_shared<std::string>();
    tr->add_option("--data", *tr_data, "dataset file from gen-data")->required();
    tr->callback([&rc, tr_common, tr_grw, tr_flags, tr_data] {
        RootConfig cfg = tr_common->resolve();
        tr_grw->apply(cfg);
        tr_flags->apply(cfg);
        const DatasetSplit split = load_dataset(*tr_data);
        if (split.train.empty()) fail("dataset has no training clips");
        const int input_dim = split.train[0].frames.cols();
        Model model = init_model(cfg.model_config(), input_dim, cfg.seed);
        const RunMetrics metrics = train(model, split, cfg.train_config());
        write_run_dir(cfg.output_dir, model, serialize_config(cfg), metrics);
        std::printf("run dir %s (epochs=%d)\n", cfg.output_dir.c_str(), cfg.train.epochs);
        std::printf("final: accuracy=%s mean_sq_accel=%s mean_sq_speed=%s\n",
                    fmt12(metrics.final_eval.accuracy).c_str(),
                    fmt12(metrics.final_eval.mean_sq_accel).c_str(),
                    fmt12(metrics.final_eval.mean_sq_speed).c_str());
        rc = 0;
    });

    // ---- eval ----------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset's test split");
    auto ev_common = std::make_shared<Common>();
    ev_common->attach(ev);
    auto ev_model = std::make_shared<std::string>();
    auto ev_data = std::make_shared<std::string>();
    ev->add_option("--model", *ev_model, "checkpoint file")->required();
    ev->add_option("--data", *ev_data, "dataset file")->required();
    ev->callback([&rc, ev_model, ev_data] {
        const Model model = load_model(*ev_model);
        const DatasetSplit split = load_dataset(*ev_data);
        if (split.test.empty()) fail("dataset has no test clips");
        const EvalStats stats = evaluate(model, split.test);
        std::fputs(eval_json(stats, split.test.size()).c_str(), stdout);
        rc = 0;
    });

    // ---- loss ------------------------------------------------------------------
    auto* lo = app.add_subcommand("loss", "smoothing-loss breakdown of a serialized clip");
    auto lo_common = std::make_shared<Common>();
    auto lo_grw = std::make_shared<GrwFlags>();
    lo_common->attach(lo);
    lo_grw->attach(lo);
    auto lo_input = std::make_shared<std::string>();
    lo->add_option("--input", *lo_input, "text file, one frame per row")->required();
    lo->callback([&rc, lo_common, lo_grw, lo_input] {
        RootConfig cfg = lo_common->resolve();
        lo_grw->apply(cfg);
        const Tensor clip = read_matrix(*lo_input);
        const LossBreakdown b = smooth_loss(clip, cfg.grw_config());
        std::fputs(loss_json(b).c_str(), stdout);
        rc = 0;
    });

    // ---- gradcheck --------------------------------------------------------------
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the loss gradients");
    auto gc_common = std::make_shared<Common>();
    gc_common->attach(gc);
    auto gc_opts = std::make_shared<GradCheckOptions>();
    gc->add_option("--t-min", gc_opts->t_min, "smallest window length");
    gc->add_option("--t-max", gc_opts->t_max, "largest window length");
    gc->add_option("--dims", gc_opts->dims, "embedding widths to test")->delimiter(',');
    gc->add_option("--draws", gc_opts->draws, "random draws per (T, d) cell");
    gc->add_option("--eps", gc_opts->eps, "central-difference step");
    gc->add_option("--tol", gc_opts->tol, "relative-error threshold");
    gc->add_flag("--corrupt", gc_opts->corrupt,
                 "negative control: corrupt one analytic gradient entry");
    gc->callback([&rc, gc_common, gc_opts] {
        GradCheckOptions opts = *gc_opts;
        opts.seed = gc_common->resolve().seed;
        const GradCheckSummary summary = run_grad_checks(opts);
        std::fputs(grad_check_report(summary).c_str(), stdout);
        rc = summary.pass ? 0 : 1;
    });

    // ---- scale-study ---------------------------------------------------------------
    auto* sc = app.add_subcommand("scale-study",
                                  "optimal 1-D extent versus window length (CSV + summary)");
    auto sc_common = std::make_shared<Common>();
    sc_common->attach(sc);
    struct ScaleFlags {
        int t_min = 3, t_max = 10, restarts = 20, steps = 5000;
        std::string csv;
    };
    auto sf = std::make_shared<ScaleFlags>();
    sc->add_option("--t-min", sf->t_min, "smallest window length (>= 3)");
    sc->add_option("--t-max", sf->t_max, "largest window length (<= 12)");
    sc->add_option("--restarts", sf->restarts, "optimizer restarts per T");
    sc->add_option("--steps", sf->steps, "descent steps per restart");
    sc->add_option("--csv", sf->csv, "also write the CSV to this file");
    sc->callback([&rc, sc, sc_common, sf] {
        RootConfig cfg = sc_common->resolve();
        if (sc->count("--t-min")) cfg.scale.t_min = sf->t_min;
        if (sc->count("--t-max")) cfg.scale.t_max = sf->t_max;
        if (sc->count("--restarts")) cfg.scale.restarts = sf->restarts;
        if (sc->count("--steps")) cfg.scale.steps = sf->steps;
        const std::vector<ScaleStudyRow> rows =
            scaling_study(cfg.scale.t_min, cfg.scale.t_max, cfg.minimize_options());
        const std::string csv = scale_study_csv(rows);
        if (!sf->csv.empty()) spill(sf->csv, csv);
        else std::fputs(csv.c_str(), stdout);
        double lo = rows.front().ratio, hi = rows.front().ratio;
        bool bounds_ok = true;
        for (const ScaleStudyRow& r : rows) {
            lo = std::min(lo, r.ratio);
            hi = std::max(hi, r.ratio);
            bounds_ok = bounds_ok && r.lower_bound_ok;
        }
        std::printf("summary: T=[%d,%d] ratio min=%s max=%s max/min=%s lower_bound_ok=%s\n",
                    cfg.scale.t_min, cfg.scale.t_max, fmt12(lo).c_str(), fmt12(hi).c_str(),
                    fmt12(hi / lo).c_str(), bounds_ok ? "yes" : "NO");
        rc = bounds_ok ? 0 : 1;
    });

    // ---- sweep -----------------------------------------------------------------------
    auto* sw = app.add_subcommand("sweep", "ablation sweep over T, alpha, or lambda");
    auto sw_common = std::make_shared<Common>();
    auto sw_grw = std::make_shared<GrwFlags>();
    auto sw_flags = std::make_shared<TrainFlags>();
    sw_common->attach(sw);
    sw_grw->attach(sw);
    sw_flags->attach(sw);
    struct SweepFlags {
        std::string data, axis, csv;
        std::vector<double> values;
    };
    auto swf = std::make_shared<SweepFlags>();
    sw->add_option("--data", swf->data, "dataset file")->required();
    sw->add_option("--axis", swf->axis, "T | alpha | lambda")->required();
    sw->add_option("--values", swf->values, "axis values")->required()->delimiter(',');
    sw->add_option("--csv", swf->csv, "also write the CSV to this file");
    sw->callback([&rc, sw_common, sw_grw, sw_flags, swf] {
        RootConfig cfg = sw_common->resolve();
        sw_grw->apply(cfg);
        sw_flags->apply(cfg);
        const DatasetSplit split = load_dataset(swf->data);
        const std::vector<SweepRow> rows =
            ablation_sweep(swf->axis, swf->values, cfg.model_config(), cfg.train_config(), split);
        const std::string csv = sweep_csv(rows);
        if (!swf->csv.empty()) spill(swf->csv, csv);
        else std::fputs(csv.c_str(), stdout);
        rc = 0;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const grw::divergence_error& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
