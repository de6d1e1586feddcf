#include "grw/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>

#include "grw/csv.hpp"
#include "grw/rng.hpp"
#include "grw/wire.hpp"

namespace grw {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

struct Lifted {
    std::vector<Var> enc_w, enc_b;
    Var aff_w, aff_b;
    HeadVars head;
    std::vector<Var> params;  // same order as model_params()
};

Lifted lift_model(Tape& tape, const Model& m, bool trainable) {
    Lifted l;
    for (std::size_t i = 0; i < m.enc_w.size(); ++i) {
        l.enc_w.push_back(tape.leaf(m.enc_w[i], trainable));
        l.enc_b.push_back(tape.leaf(m.enc_b[i], trainable));
        l.params.push_back(l.enc_w.back());
        l.params.push_back(l.enc_b.back());
    }
    l.aff_w = tape.leaf(m.affine.weight, trainable);
    l.aff_b = tape.leaf(m.affine.bias, trainable);
    l.params.push_back(l.aff_w);
    l.params.push_back(l.aff_b);
    l.head = lift_head(tape, m.head, trainable);
    for (Var v : l.head.all()) l.params.push_back(v);
    return l;
}

struct Forward {
    Var hidden_last;  // (B*M) x C after the last hidden relu
    Var embed;        // (B*M) x d affine output
    Var logits;       // B x classes
};

Forward forward_batch(Tape& tape, const Lifted& l, const Tensor& x, int clips, int frames) {
    Forward f;
    Var cur = tape.constant(x);
    const std::size_t layers = l.enc_w.size();
    for (std::size_t i = 0; i + 1 < layers; ++i)
        cur = relu(add_rowvec(matmul(cur, transpose(l.enc_w[i])), l.enc_b[i]));
    f.hidden_last = cur;
    Var z = add_rowvec(matmul(cur, transpose(l.enc_w[layers - 1])), l.enc_b[layers - 1]);
    f.embed = affine_embed(z, l.aff_w, l.aff_b);
    std::vector<Var> per_clip;
    per_clip.reserve(static_cast<std::size_t>(clips));
    for (int i = 0; i < clips; ++i)
        per_clip.push_back(head_forward(slice_rows(f.embed, i * frames, frames), l.head));
    f.logits = stack_rows(per_clip);
    return f;
}

Tensor batch_input(const std::vector<MotionClip>& clips, const std::vector<int>& idx,
                   int input_dim) {
    const int m = clips.empty() ? 0 : clips[0].frames.rows();
    Tensor x = Tensor::zeros({static_cast<int>(idx.size()) * m, input_dim});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const MotionClip& c = clips[static_cast<std::size_t>(idx[i])];
        if (c.frames.cols() != input_dim) fail("clip width disagrees with the model input");
        if (c.frames.rows() != m) fail("clips must share a frame count");
        for (int t = 0; t < m; ++t)
            for (int j = 0; j < input_dim; ++j)
                x.at(static_cast<int>(i) * m + t, j) = c.frames.at(t, j);
    }
    return x;
}

std::vector<int> batch_labels(const std::vector<MotionClip>& clips, const std::vector<int>& idx) {
    std::vector<int> y;
    y.reserve(idx.size());
    for (int i : idx) y.push_back(static_cast<int>(clips[static_cast<std::size_t>(i)].label));
    return y;
}

double cosine_lr(double start, double end, int epoch, int epochs) {
    if (epochs <= 1) return start;
    const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
    return end + 0.5 * (start - end) * (1.0 + std::cos(3.141592653589793 * t));
}

int argmax_row(const Tensor& m, int row) {
    int best = 0;
    double bv = m.at(row, 0);
    for (int c = 1; c < m.cols(); ++c)
        if (m.at(row, c) > bv) {
            bv = m.at(row, c);
            best = c;
        }
    return best;
}

// mean over clips of the mean squared row norm of first/second differences
void smoothness_stats(const Tensor& site, int clips, int frames, double& sq_speed,
                      double& sq_accel) {
    const int d = site.cols();
    double vsum = 0.0, asum = 0.0;
    for (int i = 0; i < clips; ++i) {
        double v = 0.0, a = 0.0;
        const int base = i * frames;
        for (int t = 0; t + 1 < frames; ++t)
            for (int j = 0; j < d; ++j) {
                const double dv = site.at(base + t + 1, j) - site.at(base + t, j);
                v += dv * dv;
            }
        for (int t = 0; t + 2 < frames; ++t)
            for (int j = 0; j < d; ++j) {
                const double da = site.at(base + t + 2, j) - 2.0 * site.at(base + t + 1, j) +
                                  site.at(base + t, j);
                a += da * da;
            }
        vsum += v / std::max(1, frames - 1);
        asum += a / std::max(1, frames - 2);
    }
    sq_speed = vsum / std::max(1, clips);
    sq_accel = asum / std::max(1, clips);
}

struct EvalOutputs {
    Tensor logits;
    Tensor site;
    int frames = 0;
};

EvalOutputs eval_forward(const Model& m, const std::vector<MotionClip>& clips) {
    if (clips.empty()) fail("cannot evaluate on an empty clip set");
    const int frames = clips[0].frames.rows();
    std::vector<int> idx(clips.size());
    std::iota(idx.begin(), idx.end(), 0);
    const Tensor x = batch_input(clips, idx, m.input_dim);

    Tape tape;
    tape.set_check_finite(false);  // measurement pass: report what the model does
    const Lifted l = lift_model(tape, m, false);
    const Forward f = forward_batch(tape, l, x, static_cast<int>(clips.size()), frames);
    EvalOutputs out;
    out.logits = f.logits.value();
    out.site = m.cfg.placement == Placement::intermediate ? batch_standardize(f.hidden_last).value()
                                                          : f.embed.value();
    out.frames = frames;
    return out;
}

constexpr char kModelMagic[4] = {'G', 'R', 'W', 'M'};
constexpr std::uint32_t kModelVersion = 1;

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail("cannot open " + path + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) fail("write failed: " + path);
}

}  // namespace

const char* placement_name(Placement p) {
    switch (p) {
        case Placement::final_layer: return "final";
        case Placement::intermediate: return "intermediate";
        case Placement::none: return "none";
    }
    fail("unknown placement");
}

Placement placement_from_name(const std::string& name) {
    if (name == "final") return Placement::final_layer;
    if (name == "intermediate") return Placement::intermediate;
    if (name == "none") return Placement::none;
    fail("placement must be final, intermediate, or none (got \"" + name + "\")");
}

void ModelConfig::validate() const {
    if (encoder_hidden.empty()) fail("need at least one encoder hidden layer");
    for (int h : encoder_hidden)
        if (h < 1) fail("hidden sizes must be positive");
    if (embed_dim < 2) fail("embedding dim must be at least 2");
    if (head_blocks != 1 && head_blocks != 2) fail("head depth must be 1 or 2");
    if (classes < 2) fail("need at least 2 classes");
}

void TrainConfig::validate() const {
    if (epochs < 1) fail("need at least one epoch");
    if (batch_size < 1) fail("batch size must be positive");
    for (auto [s, e] : {std::pair{lr_backbone_start, lr_backbone_end},
                        std::pair{lr_head_start, lr_head_end}}) {
        if (!(s > 0.0) || !(e > 0.0)) fail("learning-rate endpoints must be positive");
        if (s < e) fail("learning rate must start at or above its end value");
    }
    if (momentum < 0.0 || momentum >= 1.0) fail("momentum must lie in [0, 1)");
    grw.validate();
}

Model init_model(const ModelConfig& cfg, int input_dim, std::uint64_t seed) {
    cfg.validate();
    if (input_dim < 1) fail("input dim must be positive");
    Rng rng(derive_seed(seed, "model-init"));
    Model m;
    m.cfg = cfg;
    m.input_dim = input_dim;

    int in = input_dim;
    std::vector<int> outs = cfg.encoder_hidden;
    outs.push_back(cfg.embed_dim);
    for (int out : outs) {
        m.enc_w.push_back(randn({out, in}, rng, 1.0 / std::sqrt(static_cast<double>(in))));
        m.enc_b.push_back(Tensor::zeros({out}));
        in = out;
    }
    m.affine = AffineNormalizer::init(cfg.embed_dim, cfg.embed_dim, rng);
    TemporalHeadConfig hc;
    hc.dim = cfg.embed_dim;
    hc.classes = cfg.classes;
    hc.blocks = cfg.head_blocks;
    m.head = init_head(hc, rng);
    return m;
}

std::vector<Tensor*> model_params(Model& m) {
    std::vector<Tensor*> ps;
    for (std::size_t i = 0; i < m.enc_w.size(); ++i) {
        ps.push_back(&m.enc_w[i]);
        ps.push_back(&m.enc_b[i]);
    }
    ps.push_back(&m.affine.weight);
    ps.push_back(&m.affine.bias);
    for (Tensor* t : head_params(m.head)) ps.push_back(t);
    return ps;
}

int backbone_param_count(const Model& m) {
    return 2 * static_cast<int>(m.enc_w.size()) + 2;
}

EvalStats evaluate(const Model& m, const std::vector<MotionClip>& clips) {
    const EvalOutputs out = eval_forward(m, clips);
    EvalStats s;
    int hits = 0;
    for (int i = 0; i < out.logits.rows(); ++i)
        if (argmax_row(out.logits, i) == static_cast<int>(clips[static_cast<std::size_t>(i)].label))
            ++hits;
    s.accuracy = static_cast<double>(hits) / static_cast<double>(clips.size());
    smoothness_stats(out.site, static_cast<int>(clips.size()), out.frames, s.mean_sq_speed,
                     s.mean_sq_accel);
    return s;
}

Tensor site_embeddings(const Model& m, const std::vector<MotionClip>& clips) {
    return eval_forward(m, clips).site;
}

RunMetrics train(Model& model, const DatasetSplit& data, const TrainConfig& cfg) {
    model.cfg.validate();
    cfg.validate();
    if (data.train.empty()) fail("empty training split");
    if (data.test.empty()) fail("empty test split");
    const int frames = data.train[0].frames.rows();
    const bool grw_active = model.cfg.placement != Placement::none && cfg.grw.lambda != 0.0;
    if (grw_active && frames < cfg.grw.T)
        fail("window length T = " + std::to_string(cfg.grw.T) + " exceeds the clip length " +
             std::to_string(frames));

    std::vector<Tensor*> params = model_params(model);
    const int nb = backbone_param_count(model);
    std::vector<Tensor> vel;
    vel.reserve(params.size());
    for (Tensor* p : params) vel.push_back(Tensor::zeros(p->shape()));

    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    Rng order_rng(derive_seed(cfg.seed, "orderings"));

    const int n = static_cast<int>(data.train.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    RunMetrics metrics;
    EvalStats last_eval;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr_b = cosine_lr(cfg.lr_backbone_start, cfg.lr_backbone_end, epoch, cfg.epochs);
        const double lr_h = cosine_lr(cfg.lr_head_start, cfg.lr_head_end, epoch, cfg.epochs);
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(uniform_u64(shuffle_rng, static_cast<std::uint64_t>(i) + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        double sum_total = 0.0, sum_ce = 0.0, sum_smooth = 0.0;
        int batch_index = 0;
        for (int start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const int count = std::min(cfg.batch_size, n - start);
            const std::vector<int> idx(order.begin() + start, order.begin() + start + count);
            const Tensor x = batch_input(data.train, idx, model.input_dim);
            const std::vector<int> labels = batch_labels(data.train, idx);

            Tape tape;
            tape.set_check_finite(false);  // divergence is detected on the loss below
            const Lifted l = lift_model(tape, model, true);
            const Forward f = forward_batch(tape, l, x, count, frames);
            Var ce = cross_entropy_mean(f.logits, labels);
            Var total = ce;
            double smooth_value = 0.0;
            if (grw_active) {
                Var site = model.cfg.placement == Placement::intermediate
                               ? batch_standardize(f.hidden_last)
                               : f.embed;
                std::vector<Var> sequences;
                sequences.reserve(static_cast<std::size_t>(count));
                for (int i = 0; i < count; ++i)
                    sequences.push_back(slice_rows(site, i * frames, frames));
                auto orderings = std::make_shared<const std::vector<Permutation>>(
                    choose_orderings(cfg.grw, order_rng));
                const SmoothTerms st = smooth_terms(sequences, orderings, cfg.grw);
                total = add(ce, scale(st.smooth, cfg.grw.lambda));
                smooth_value = st.smooth.value().item();
            }

            const double total_value = total.value().item();
            if (!std::isfinite(total_value))
                throw divergence_error("training diverged: non-finite loss at epoch " +
                                       std::to_string(epoch) + ", batch " +
                                       std::to_string(batch_index));
            tape.backward(total);

            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                const double lr = static_cast<int>(pi) < nb ? lr_b : lr_h;
                const Tensor& g = l.params[pi].grad();
                Tensor& v = vel[pi];
                Tensor& p = *params[pi];
                for (std::size_t k = 0; k < p.numel(); ++k) {
                    v.data()[k] = cfg.momentum * v.data()[k] - lr * g.data()[k];
                    p.data()[k] += v.data()[k];
                }
            }

            sum_total += total_value * count;
            sum_ce += ce.value().item() * count;
            sum_smooth += smooth_value * count;
        }

        last_eval = evaluate(model, data.test);
        EpochRow row;
        row.epoch = epoch;
        row.train_total = sum_total / n;
        row.train_ce = sum_ce / n;
        row.train_smooth = sum_smooth / n;
        row.test_accuracy = last_eval.accuracy;
        row.mean_sq_accel = last_eval.mean_sq_accel;
        row.mean_sq_speed = last_eval.mean_sq_speed;
        row.lr_backbone = lr_b;
        row.lr_head = lr_h;
        metrics.epochs.push_back(row);
    }

    metrics.final_eval = last_eval;
    const Tensor site = site_embeddings(model, data.test);
    metrics.pca = pca_project(site, 2);
    const int test_frames = data.test[0].frames.rows();
    for (std::size_t i = 0; i < data.test.size(); ++i)
        for (int t = 0; t < test_frames; ++t) {
            metrics.pca_clip.push_back(static_cast<int>(i));
            metrics.pca_frame.push_back(t);
            metrics.pca_label.push_back(static_cast<int>(data.test[i].label));
        }
    return metrics;
}

PcaResult pca_project(const Tensor& x, int components) {
    if (x.rank() != 2) fail("pca input must be rank 2");
    const int n = x.rows(), d = x.cols();
    if (n < 2) fail("pca needs at least 2 samples");
    if (d < 2) fail("pca needs at least 2 dimensions");
    if (components < 1 || components > d) fail("component count out of range");

    std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += x.at(i, j);
    for (double& v : mean) v /= n;
    Tensor xc = Tensor::zeros({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) xc.at(i, j) = x.at(i, j) - mean[static_cast<std::size_t>(j)];

    // sample covariance, then cyclic Jacobi diagonalization
    std::vector<std::vector<double>> a(static_cast<std::size_t>(d),
                                       std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int p = 0; p < d; ++p)
        for (int q = p; q < d; ++q) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += xc.at(i, p) * xc.at(i, q);
            s /= (n - 1);
            a[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] = s;
            a[static_cast<std::size_t>(q)][static_cast<std::size_t>(p)] = s;
        }
    std::vector<std::vector<double>> v(static_cast<std::size_t>(d),
                                       std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;

    double norm2 = 0.0;
    for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q)
            norm2 += a[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] *
                     a[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q)
                off += 2.0 * a[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] *
                       a[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
        if (off <= 1e-30 * std::max(norm2, 1e-300)) break;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) {
                const double apq = a[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
                if (apq == 0.0) continue;
                const double app = a[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)];
                const double aqq = a[static_cast<std::size_t>(q)][static_cast<std::size_t>(q)];
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < d; ++k) {
                    const double akp = a[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)];
                    const double akq = a[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)];
                    a[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)] = c * akp - s * akq;
                    a[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)] = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    const double apk = a[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)];
                    const double aqk = a[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)];
                    a[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)] = c * apk - s * aqk;
                    a[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)] = s * apk + c * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    const double vkp = v[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)];
                    const double vkq = v[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)];
                    v[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)] = c * vkp - s * vkq;
                    v[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)] = s * vkp + c * vkq;
                }
            }
    }

    std::vector<int> idx(static_cast<std::size_t>(d));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int p, int q) {
        return a[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)] >
               a[static_cast<std::size_t>(q)][static_cast<std::size_t>(q)];
    });

    PcaResult res;
    res.eigenvalues.reserve(static_cast<std::size_t>(d));
    for (int i : idx)
        res.eigenvalues.push_back(a[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)]);
    res.components = Tensor::zeros({d, components});
    for (int c = 0; c < components; ++c) {
        const int col = idx[static_cast<std::size_t>(c)];
        int arg = 0;
        double best = -1.0;
        for (int k = 0; k < d; ++k) {
            const double mag = std::abs(v[static_cast<std::size_t>(k)][static_cast<std::size_t>(col)]);
            if (mag > best) {
                best = mag;
                arg = k;
            }
        }
        const double flip =
            v[static_cast<std::size_t>(arg)][static_cast<std::size_t>(col)] < 0.0 ? -1.0 : 1.0;
        for (int k = 0; k < d; ++k)
            res.components.at(k, c) = flip * v[static_cast<std::size_t>(k)][static_cast<std::size_t>(col)];
    }
    res.coords = Tensor::zeros({n, components});
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < components; ++c) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += xc.at(i, j) * res.components.at(j, c);
            res.coords.at(i, c) = s;
        }
    const double lead = res.eigenvalues.empty() ? 0.0 : std::max(res.eigenvalues.front(), 0.0);
    res.rank = 0;
    for (double ev : res.eigenvalues)
        if (lead > 0.0 && ev > 1e-12 * lead) ++res.rank;
    return res;
}

std::string metrics_csv(const RunMetrics& m) {
    std::string out = csv_row({"epoch", "train_total", "train_ce", "train_smooth", "test_acc",
                               "mean_sq_accel", "mean_sq_speed", "lr_backbone", "lr_head"});
    for (const EpochRow& r : m.epochs)
        out += csv_row({std::to_string(r.epoch), csv_num(r.train_total), csv_num(r.train_ce),
                        csv_num(r.train_smooth), csv_num(r.test_accuracy), csv_num(r.mean_sq_accel),
                        csv_num(r.mean_sq_speed), csv_num(r.lr_backbone), csv_num(r.lr_head)});
    return out;
}

std::string pca_csv(const RunMetrics& m) {
    std::string out = csv_row({"clip", "frame", "label", "pc1", "pc2"});
    for (int i = 0; i < m.pca.coords.rows(); ++i)
        out += csv_row({std::to_string(m.pca_clip[static_cast<std::size_t>(i)]),
                        std::to_string(m.pca_frame[static_cast<std::size_t>(i)]),
                        std::to_string(m.pca_label[static_cast<std::size_t>(i)]),
                        csv_num(m.pca.coords.at(i, 0)), csv_num(m.pca.coords.at(i, 1))});
    return out;
}

void save_model(const Model& m, const std::string& path) {
    std::string out;
    out.append(kModelMagic, 4);
    wire::put_u32(out, kModelVersion);
    wire::put_u32(out, static_cast<std::uint32_t>(m.input_dim));
    wire::put_u32(out, static_cast<std::uint32_t>(m.cfg.embed_dim));
    wire::put_u32(out, static_cast<std::uint32_t>(m.cfg.head_blocks));
    wire::put_u32(out, static_cast<std::uint32_t>(m.cfg.classes));
    out.push_back(static_cast<char>(m.cfg.placement == Placement::final_layer ? 0
                                    : m.cfg.placement == Placement::intermediate ? 1
                                                                                 : 2));
    wire::put_u32(out, static_cast<std::uint32_t>(m.cfg.encoder_hidden.size()));
    for (int h : m.cfg.encoder_hidden) wire::put_u32(out, static_cast<std::uint32_t>(h));

    Model& mut = const_cast<Model&>(m);  // parameter enumeration only reads
    const std::vector<Tensor*> params = model_params(mut);
    wire::put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const Tensor* t : params) {
        wire::put_u32(out, static_cast<std::uint32_t>(t->rank()));
        for (int dim : t->shape()) wire::put_u32(out, static_cast<std::uint32_t>(dim));
        for (std::size_t i = 0; i < t->numel(); ++i) wire::put_f64(out, t->data()[i]);
    }
    write_text_file(path, out);
}

Model load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    wire::Reader r{buf};
    r.need(4);
    if (std::memcmp(buf.data(), kModelMagic, 4) != 0) fail("not a model checkpoint: bad magic");
    r.pos = 4;
    if (r.u32() != kModelVersion) fail("unsupported checkpoint version");

    const int input_dim = static_cast<int>(r.u32());
    ModelConfig cfg;
    cfg.embed_dim = static_cast<int>(r.u32());
    cfg.head_blocks = static_cast<int>(r.u32());
    cfg.classes = static_cast<int>(r.u32());
    const std::uint8_t placement = r.u8();
    if (placement > 2) fail("bad placement byte");
    cfg.placement = placement == 0   ? Placement::final_layer
                    : placement == 1 ? Placement::intermediate
                                     : Placement::none;
    const std::uint32_t hidden_count = r.u32();
    if (hidden_count > 64) fail("checkpoint hidden-layer count out of range");
    cfg.encoder_hidden.clear();
    for (std::uint32_t i = 0; i < hidden_count; ++i)
        cfg.encoder_hidden.push_back(static_cast<int>(r.u32()));

    Model m = init_model(cfg, input_dim, 0);
    const std::vector<Tensor*> params = model_params(m);
    if (r.u32() != params.size()) fail("checkpoint parameter count disagrees with the config");
    for (Tensor* t : params) {
        const std::uint32_t rank = r.u32();
        if (rank != static_cast<std::uint32_t>(t->rank())) fail("checkpoint tensor rank mismatch");
        for (int dim : t->shape())
            if (r.u32() != static_cast<std::uint32_t>(dim)) fail("checkpoint tensor shape mismatch");
        for (std::size_t i = 0; i < t->numel(); ++i) t->data()[i] = r.f64();
    }
    if (r.pos != buf.size()) fail("trailing bytes after the last parameter");
    return m;
}

void write_run_dir(const std::string& dir, const Model& m, const std::string& config_json,
                   const RunMetrics& metrics) {
    std::filesystem::create_directories(dir);
    write_text_file(dir + "/config.json", config_json);
    write_text_file(dir + "/metrics.csv", metrics_csv(metrics));
    write_text_file(dir + "/pca.csv", pca_csv(metrics));
    save_model(m, dir + "/checkpoint.bin");
}

std::vector<SweepRow> ablation_sweep(const std::string& axis, const std::vector<double>& values,
                                     const ModelConfig& mcfg, const TrainConfig& tcfg,
                                     const DatasetSplit& data) {
    if (values.empty()) fail("sweep needs at least one value");
    if (axis != "T" && axis != "alpha" && axis != "lambda")
        fail("sweep axis must be T, alpha, or lambda (got \"" + axis + "\")");
    if (data.train.empty()) fail("empty training split");

    std::vector<SweepRow> rows;
    for (double value : values) {
        TrainConfig tc = tcfg;
        if (axis == "T") {
            if (value != std::floor(value)) fail("T values must be integers");
            tc.grw.T = static_cast<int>(value);
        } else if (axis == "alpha") {
            tc.grw.alpha = value;
        } else {
            tc.grw.lambda = value;
        }
        Model model = init_model(mcfg, data.train[0].frames.cols(), tc.seed);
        const RunMetrics metrics = train(model, data, tc);
        SweepRow row;
        row.axis = axis;
        row.value = value;
        row.test_accuracy = metrics.final_eval.accuracy;
        row.mean_sq_accel = metrics.final_eval.mean_sq_accel;
        row.mean_sq_speed = metrics.final_eval.mean_sq_speed;
        row.train_total = metrics.epochs.back().train_total;
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out =
        csv_row({"axis", "value", "test_acc", "mean_sq_accel", "mean_sq_speed", "train_total"});
    for (const SweepRow& r : rows)
        out += csv_row({r.axis, csv_num(r.value), csv_num(r.test_accuracy),
                        csv_num(r.mean_sq_accel), csv_num(r.mean_sq_speed), csv_num(r.train_total)});
    return out;
}

}  // namespace grw
