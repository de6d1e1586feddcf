#include "grw/adapters.hpp"

#include <cmath>
#include <string>

namespace grw {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

// ---- intermediate placement -------------------------------------------------------

Tensor global_pool(const Tensor& x) {
    if (x.rank() != 3) fail("global_pool needs a channels x time x space tensor");
    const int c = x.dim(0), n = x.dim(1), k = x.dim(2);
    if (c < 1 || n < 1 || k < 1) fail("global_pool: empty axis");
    Tensor out = Tensor::zeros({c, n});
    const double inv = 1.0 / static_cast<double>(k);
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < n; ++j) {
            const double* base = x.data() + (static_cast<std::size_t>(i) * n + j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += base[p];
            out.at(i, j) = s * inv;
        }
    return out;
}

Var global_pool(Var x) {
    Tape& t = *x.tape;
    Tensor out = global_pool(t.value(x.id));
    const int xid = x.id;
    return t.record(std::move(out), {xid}, [xid](Tape& tp, const Tensor& g) {
        const Tensor& xv = tp.value(xid);
        const int c = xv.dim(0), n = xv.dim(1), k = xv.dim(2);
        Tensor d = Tensor::zeros(xv.shape());
        const double inv = 1.0 / static_cast<double>(k);
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < n; ++j) {
                const double gij = g.at(i, j) * inv;
                double* base = d.data() + (static_cast<std::size_t>(i) * n + j) * k;
                for (int p = 0; p < k; ++p) base[p] = gij;
            }
        tp.accumulate(xid, d);
    });
}

std::vector<Tensor> batch_standardize(const std::vector<Tensor>& batch, double eps) {
    if (batch.empty()) fail("batch_standardize: empty batch");
    const int c = batch[0].rows();
    const int n = batch[0].cols();
    for (const Tensor& m : batch)
        if (m.rank() != 2 || m.rows() != c || m.cols() != n)
            fail("batch_standardize: every entry must be channels x time with equal shape");
    const std::size_t samples = batch.size() * static_cast<std::size_t>(n);
    if (samples < 2) fail("batch_standardize: need at least two samples per channel");

    const double root_c = std::sqrt(static_cast<double>(c));
    std::vector<Tensor> out(batch.size(), Tensor::zeros({c, n}));
    for (int ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        for (const Tensor& m : batch)
            for (int j = 0; j < n; ++j) mean += m.at(ch, j);
        mean /= static_cast<double>(samples);
        double var = 0.0;
        for (const Tensor& m : batch)
            for (int j = 0; j < n; ++j) {
                const double d = m.at(ch, j) - mean;
                var += d * d;
            }
        var /= static_cast<double>(samples);
        const double inv = 1.0 / (std::sqrt(var + eps) * root_c);
        for (std::size_t b = 0; b < batch.size(); ++b)
            for (int j = 0; j < n; ++j) out[b].at(ch, j) = (batch[b].at(ch, j) - mean) * inv;
    }
    return out;
}

Var batch_standardize(Var x, double eps) {
    Tape& t = *x.tape;
    const Tensor& xv = t.value(x.id);
    const int r = xv.rows(), c = xv.cols();
    if (r < 2) fail("batch_standardize: need at least two samples per channel");
    const double root_c = std::sqrt(static_cast<double>(c));
    Tensor out = Tensor::zeros({r, c});
    for (int j = 0; j < c; ++j) {
        double mean = 0.0;
        for (int i = 0; i < r; ++i) mean += xv.at(i, j);
        mean /= r;
        double var = 0.0;
        for (int i = 0; i < r; ++i) {
            const double d = xv.at(i, j) - mean;
            var += d * d;
        }
        var /= r;
        const double inv = 1.0 / (std::sqrt(var + eps) * root_c);
        for (int i = 0; i < r; ++i) out.at(i, j) = (xv.at(i, j) - mean) * inv;
    }
    const int xid = x.id;
    return t.record(std::move(out), {xid}, [xid, eps, root_c](Tape& tp, const Tensor& g) {
        const Tensor& xv2 = tp.value(xid);
        const int r2 = xv2.rows(), c2 = xv2.cols();
        Tensor d = Tensor::zeros({r2, c2});
        for (int j = 0; j < c2; ++j) {
            double mean = 0.0;
            for (int i = 0; i < r2; ++i) mean += xv2.at(i, j);
            mean /= r2;
            double var = 0.0;
            for (int i = 0; i < r2; ++i) {
                const double dv = xv2.at(i, j) - mean;
                var += dv * dv;
            }
            var /= r2;
            const double s = 1.0 / std::sqrt(var + eps);
            // BN backward with the 1/sqrt(C) factor folded into the upstream
            double g_sum = 0.0, gx_sum = 0.0;
            for (int i = 0; i < r2; ++i) {
                const double gh = g.at(i, j) / root_c;
                const double xh = (xv2.at(i, j) - mean) * s;
                g_sum += gh;
                gx_sum += gh * xh;
            }
            for (int i = 0; i < r2; ++i) {
                const double gh = g.at(i, j) / root_c;
                const double xh = (xv2.at(i, j) - mean) * s;
                d.at(i, j) = (s / r2) * (r2 * gh - g_sum - xh * gx_sum);
            }
        }
        tp.accumulate(xid, d);
    });
}

// ---- final placement -----------------------------------------------------------------

AffineNormalizer AffineNormalizer::identity(int d) {
    AffineNormalizer a;
    a.weight = Tensor::zeros({d, d});
    for (int i = 0; i < d; ++i) a.weight.at(i, i) = 1.0;
    a.bias = Tensor::zeros({d});
    return a;
}

AffineNormalizer AffineNormalizer::init(int d_out, int d_in, Rng& rng) {
    AffineNormalizer a;
    a.weight = randn({d_out, d_in}, rng, 1.0 / std::sqrt(static_cast<double>(d_in)));
    a.bias = Tensor::zeros({d_out});
    return a;
}

Tensor affine_embed(const Tensor& z, const AffineNormalizer& norm) {
    Tape t;
    return affine_embed(t.constant(z), t.constant(norm.weight), t.constant(norm.bias)).value();
}

Var affine_embed(Var z, Var weight, Var bias) {
    const Tensor& zv = z.value();
    const Tensor& wv = weight.value();
    if (zv.cols() != wv.cols())
        fail("affine_embed: sequence dim " + std::to_string(zv.cols()) +
             " does not match weight input dim " + std::to_string(wv.cols()));
    return add_rowvec(matmul(z, transpose(weight)), bias);
}

// ---- attention head ----------------------------------------------------------------------

void TemporalHeadConfig::validate() const {
    if (dim < 1) fail("head dim must be positive");
    if (classes < 2) fail("head needs at least two classes");
    if (blocks != 1 && blocks != 2) fail("head supports 1 or 2 blocks");
}

TemporalHead init_head(const TemporalHeadConfig& cfg, Rng& rng) {
    cfg.validate();
    const int d = cfg.dim;
    const double ws = 1.0 / std::sqrt(static_cast<double>(d));
    const double ws4 = 1.0 / std::sqrt(static_cast<double>(4 * d));
    TemporalHead head;
    head.cfg = cfg;
    for (int b = 0; b < cfg.blocks; ++b) {
        AttentionBlock blk;
        blk.wq = randn({d, d}, rng, ws);
        blk.wk = randn({d, d}, rng, ws);
        blk.wv = randn({d, d}, rng, ws);
        blk.wo = randn({d, d}, rng, ws);
        blk.w1 = randn({4 * d, d}, rng, ws);
        blk.b1 = Tensor::zeros({4 * d});
        blk.w2 = randn({d, 4 * d}, rng, ws4);
        blk.b2 = Tensor::zeros({d});
        head.blocks.push_back(std::move(blk));
    }
    head.wc = randn({cfg.classes, d}, rng, ws);
    head.bc = Tensor::zeros({cfg.classes});
    return head;
}

std::vector<Tensor*> head_params(TemporalHead& head) {
    std::vector<Tensor*> out;
    for (AttentionBlock& b : head.blocks)
        for (Tensor* t : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.b1, &b.w2, &b.b2})
            out.push_back(t);
    out.push_back(&head.wc);
    out.push_back(&head.bc);
    return out;
}

std::vector<Var> HeadVars::all() const {
    std::vector<Var> out;
    for (const BlockVars& b : blocks)
        for (Var v : {b.wq, b.wk, b.wv, b.wo, b.w1, b.b1, b.w2, b.b2}) out.push_back(v);
    out.push_back(wc);
    out.push_back(bc);
    return out;
}

HeadVars lift_head(Tape& t, const TemporalHead& head, bool trainable) {
    head.cfg.validate();
    HeadVars vars;
    vars.dim = head.cfg.dim;
    for (const AttentionBlock& b : head.blocks) {
        BlockVars bv;
        bv.wq = t.leaf(b.wq, trainable);
        bv.wk = t.leaf(b.wk, trainable);
        bv.wv = t.leaf(b.wv, trainable);
        bv.wo = t.leaf(b.wo, trainable);
        bv.w1 = t.leaf(b.w1, trainable);
        bv.b1 = t.leaf(b.b1, trainable);
        bv.w2 = t.leaf(b.w2, trainable);
        bv.b2 = t.leaf(b.b2, trainable);
        vars.blocks.push_back(bv);
    }
    vars.wc = t.leaf(head.wc, trainable);
    vars.bc = t.leaf(head.bc, trainable);
    return vars;
}

namespace {

Var head_block(Var z, const BlockVars& b, int dim) {
    Var q = matmul(z, transpose(b.wq));
    Var k = matmul(z, transpose(b.wk));
    Var v = matmul(z, transpose(b.wv));
    Var scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(dim)));
    Var mixed = matmul(matmul(softmax_rows(scores), v), transpose(b.wo));
    Var attended = add(z, mixed);
    Var hidden = relu(add_rowvec(matmul(attended, transpose(b.w1)), b.b1));
    Var expanded = add_rowvec(matmul(hidden, transpose(b.w2)), b.b2);
    return add(attended, expanded);
}

}  // namespace

Var head_forward(Var z, const HeadVars& head) {
    if (z.value().cols() != head.dim) fail("head_forward: sequence width does not match the head");
    for (const BlockVars& b : head.blocks) z = head_block(z, b, head.dim);
    Var pooled = reshape(mean(z, 0), {1, head.dim});
    Var logits = add_rowvec(matmul(pooled, transpose(head.wc)), head.bc);
    return reshape(logits, {logits.value().cols()});
}

Tensor head_forward(const Tensor& z, const TemporalHead& head) {
    Tape t;
    return head_forward(t.constant(z), lift_head(t, head, false)).value();
}

}  // namespace grw
