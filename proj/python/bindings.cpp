#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "grw/config.hpp"
#include "grw/gradcheck.hpp"
#include "grw/grw_loss.hpp"
#include "grw/rng.hpp"
#include "grw/scale_lab.hpp"
#include "grw/synthgen.hpp"
#include "grw/tensor.hpp"
#include "grw/trainer.hpp"

namespace py = pybind11;
using namespace grw;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const DoubleArray& a) {
    const py::buffer_info info = a.request();
    if (info.ndim == 1) {
        Tensor t = Tensor::zeros({static_cast<int>(info.shape[0])});
        std::memcpy(t.data(), info.ptr, t.numel() * sizeof(double));
        return t;
    }
    if (info.ndim == 2) {
        Tensor t = Tensor::zeros(
            {static_cast<int>(info.shape[0]), static_cast<int>(info.shape[1])});
        std::memcpy(t.data(), info.ptr, t.numel() * sizeof(double));
        return t;
    }
    throw std::runtime_error("expected a 1-D or 2-D float array");
}

py::array_t<double> from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::memcpy(a.mutable_data(), t.data(), t.numel() * sizeof(double));
    return a;
}

GrwConfig make_grw(int T, double alpha, double lambda, int k, std::uint64_t seed) {
    GrwConfig cfg;
    cfg.T = T;
    cfg.alpha = alpha;
    cfg.lambda = lambda;
    cfg.k = k;
    cfg.seed = seed;
    return cfg;
}

py::dict breakdown_dict(const LossBreakdown& b) {
    py::dict d;
    d["contrastive"] = b.contrastive;
    d["omega"] = b.omega;
    d["smooth"] = b.smooth;
    d["ce"] = b.ce;
    d["total"] = b.total;
    return d;
}

py::dict eval_dict(const EvalStats& s) {
    py::dict d;
    d["accuracy"] = s.accuracy;
    d["mean_sq_accel"] = s.mean_sq_accel;
    d["mean_sq_speed"] = s.mean_sq_speed;
    return d;
}

py::dict clips_to_arrays(const std::vector<MotionClip>& clips) {
    if (clips.empty()) throw std::runtime_error("empty clip list");
    const int M = clips[0].frames.rows(), w = clips[0].frames.cols();
    py::array_t<double> frames({static_cast<py::ssize_t>(clips.size()),
                                static_cast<py::ssize_t>(M), static_cast<py::ssize_t>(w)});
    py::array_t<std::int64_t> labels(static_cast<py::ssize_t>(clips.size()));
    double* fp = frames.mutable_data();
    std::int64_t* lp = labels.mutable_data();
    for (std::size_t i = 0; i < clips.size(); ++i) {
        std::memcpy(fp + i * static_cast<std::size_t>(M) * static_cast<std::size_t>(w),
                    clips[i].frames.data(), static_cast<std::size_t>(M) * w * sizeof(double));
        lp[i] = static_cast<std::int64_t>(clips[i].label);
    }
    py::dict d;
    d["frames"] = frames;
    d["labels"] = labels;
    return d;
}

py::dict metrics_dict(const RunMetrics& r) {
    py::dict d;
    py::list epochs;
    for (const EpochRow& e : r.epochs) {
        py::dict row;
        row["epoch"] = e.epoch;
        row["train_total"] = e.train_total;
        row["train_ce"] = e.train_ce;
        row["train_smooth"] = e.train_smooth;
        row["test_acc"] = e.test_accuracy;
        row["mean_sq_accel"] = e.mean_sq_accel;
        row["mean_sq_speed"] = e.mean_sq_speed;
        epochs.append(row);
    }
    d["epochs"] = epochs;
    d["final"] = eval_dict(r.final_eval);
    d["pca_coords"] = from_tensor(r.pca.coords);
    d["pca_labels"] = py::cast(r.pca_label);
    return d;
}

}  // namespace

PYBIND11_MODULE(_grwsmooth, m) {
    m.doc() =
        "Order-contrastive temporal smoothing: losses, gradients, synthetic "
        "rotating-body data, a toy trainer, and the extent-scaling study.";

    m.def(
        "smooth_loss",
        [](const DoubleArray& clip, int T, double alpha, double lambda, int k,
           std::uint64_t seed) {
            return breakdown_dict(smooth_loss(to_tensor(clip), make_grw(T, alpha, lambda, k, seed)));
        },
        py::arg("clip"), py::arg("T") = 5, py::arg("alpha") = 0.5, py::arg("lambda") = 0.1,
        py::arg("k") = 1000, py::arg("seed") = 0,
        "Smoothing-loss breakdown of an (N, d) embedding sequence.");

    m.def(
        "smooth_loss_grad",
        [](const DoubleArray& clip, int T, double alpha, double lambda, int k,
           std::uint64_t seed) {
            const GrwConfig cfg = make_grw(T, alpha, lambda, k, seed);
            Tape tape;
            Var z = tape.leaf(to_tensor(clip), true);
            Rng rng(cfg.seed);
            tape.backward(smooth_loss(z, cfg, rng));
            return from_tensor(z.grad());
        },
        py::arg("clip"), py::arg("T") = 5, py::arg("alpha") = 0.5, py::arg("lambda") = 0.1,
        py::arg("k") = 1000, py::arg("seed") = 0,
        "Gradient of the smooth loss with respect to the sequence.");

    m.def(
        "total_loss",
        [](const DoubleArray& logits, const std::vector<int>& labels, const DoubleArray& clip,
           int T, double alpha, double lambda, int k, std::uint64_t seed) {
            return breakdown_dict(total_loss(to_tensor(logits), labels, to_tensor(clip),
                                             make_grw(T, alpha, lambda, k, seed)));
        },
        py::arg("logits"), py::arg("labels"), py::arg("clip"), py::arg("T") = 5,
        py::arg("alpha") = 0.5, py::arg("lambda") = 0.1, py::arg("k") = 1000, py::arg("seed") = 0,
        "Cross entropy plus lambda times the smoothing loss.");

    m.def("enumerate_orderings", &enumerate_orderings, py::arg("T"),
          "All (T-1)! orderings of a T-frame window, identity first.");

    m.def(
        "generate_dataset",
        [](int train, int test, int points, int frames, double noise, double omega_min,
           double omega_max, std::uint64_t seed) {
            DataConfig dc;
            dc.train_count = train;
            dc.test_count = test;
            dc.n = points;
            dc.M = frames;
            dc.sigma_noise = noise;
            dc.omega_min = omega_min;
            dc.omega_max = omega_max;
            dc.seed = seed;
            const DatasetSplit split = gen_dataset(dc);
            py::dict d;
            d["train"] = clips_to_arrays(split.train);
            d["test"] = clips_to_arrays(split.test);
            return d;
        },
        py::arg("train") = 1000, py::arg("test") = 100, py::arg("points") = 8,
        py::arg("frames") = 20, py::arg("noise") = 0.01, py::arg("omega_min") = 0.15,
        py::arg("omega_max") = 0.6, py::arg("seed") = 0,
        "Rotating-body clips as {'train'|'test': {'frames': (N,M,3n), 'labels': (N,)}}.");

    m.def(
        "train_classifier",
        [](const std::string& dataset_path, const std::string& placement, double lambda, int T,
           double alpha, int epochs, int batch_size, std::uint64_t seed) {
            const DatasetSplit split = load_dataset(dataset_path);
            if (split.train.empty()) throw std::runtime_error("dataset has no training clips");
            ModelConfig mc;
            mc.placement = placement_from_name(placement);
            TrainConfig tc;
            tc.epochs = epochs;
            tc.batch_size = batch_size;
            tc.grw.lambda = lambda;
            tc.grw.T = T;
            tc.grw.alpha = alpha;
            tc.seed = seed;
            Model model = init_model(mc, split.train[0].frames.cols(), seed);
            return metrics_dict(train(model, split, tc));
        },
        py::arg("dataset_path"), py::arg("placement") = "final", py::arg("lambda") = 0.1,
        py::arg("T") = 5, py::arg("alpha") = 0.5, py::arg("epochs") = 30,
        py::arg("batch_size") = 32, py::arg("seed") = 0,
        "Train the toy clip classifier on a saved dataset; returns metrics.");

    m.def(
        "save_dataset",
        [](const std::string& path, int train, int test, int points, int frames, double noise,
           double omega_min, double omega_max, std::uint64_t seed) {
            DataConfig dc;
            dc.train_count = train;
            dc.test_count = test;
            dc.n = points;
            dc.M = frames;
            dc.sigma_noise = noise;
            dc.omega_min = omega_min;
            dc.omega_max = omega_max;
            dc.seed = seed;
            save_dataset(gen_dataset(dc), path);
        },
        py::arg("path"), py::arg("train") = 1000, py::arg("test") = 100, py::arg("points") = 8,
        py::arg("frames") = 20, py::arg("noise") = 0.01, py::arg("omega_min") = 0.15,
        py::arg("omega_max") = 0.6, py::arg("seed") = 0,
        "Generate and write a dataset container (plus JSON sidecar).");

    m.def(
        "scaling_study",
        [](int t_min, int t_max, int restarts, int steps, std::uint64_t seed) {
            MinimizeOptions opts;
            opts.restarts = restarts;
            opts.steps = steps;
            opts.seed = seed;
            py::list out;
            for (const ScaleStudyRow& r : scaling_study(t_min, t_max, opts)) {
                py::dict d;
                d["T"] = r.T;
                d["R_star"] = r.r_star;
                d["L_star"] = r.l_star;
                d["ratio"] = r.ratio;
                d["bound_uniform"] = r.bound_uniform;
                d["lower_bound_ok"] = r.lower_bound_ok;
                out.append(d);
            }
            return out;
        },
        py::arg("t_min") = 3, py::arg("t_max") = 10, py::arg("restarts") = 20,
        py::arg("steps") = 5000, py::arg("seed") = 0,
        "Optimal 1-D extent against window length; one dict per T.");

    m.def(
        "grad_check",
        [](int t_min, int t_max, const std::vector<int>& dims, int draws, double eps, double tol,
           std::uint64_t seed) {
            GradCheckOptions opts;
            opts.t_min = t_min;
            opts.t_max = t_max;
            opts.dims = dims;
            opts.draws = draws;
            opts.eps = eps;
            opts.tol = tol;
            opts.seed = seed;
            const GradCheckSummary s = run_grad_checks(opts);
            py::dict d;
            d["max_rel_err"] = s.max_rel_err;
            d["pass"] = s.pass;
            d["report"] = grad_check_report(s);
            return d;
        },
        py::arg("t_min") = 3, py::arg("t_max") = 7,
        py::arg("dims") = std::vector<int>{1, 4, 16}, py::arg("draws") = 20,
        py::arg("eps") = 1e-5, py::arg("tol") = 1e-5, py::arg("seed") = 0,
        "Finite-difference verification of the loss gradients.");

    m.def("default_config_json", [] { return serialize_config(RootConfig{}); },
          "The resolved default configuration as a JSON document.");
}
