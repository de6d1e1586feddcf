#include "grw/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace grw {

namespace {

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ')';
    return os.str();
}

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

Tape& tape_of(Var a) {
    if (!a.valid()) fail("operation on an invalid var");
    return *a.tape;
}

Tape& tape_of(Var a, Var b) {
    if (!a.valid() || !b.valid()) fail("operation on an invalid var");
    if (a.tape != b.tape) fail("vars must live on the same tape");
    return *a.tape;
}

// Sums every entry of g into a tensor with the given single-element shape.
Tensor reduce_all(const Tensor& g, const std::vector<int>& shape) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.numel(); ++i) s += g[i];
    return Tensor(shape, {s});
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) fail("negative dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    if (n != data.size())
        fail("shape " + shape_str(shape) + " wants " + std::to_string(n) +
             " values, got " + std::to_string(data.size()));
    shape_ = std::move(shape);
    data_ = std::move(data);
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) fail("negative dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(n, 0.0);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
}

int Tensor::dim(int axis) const {
    if (axis < 0 || axis >= rank()) fail("axis out of range");
    return shape_[static_cast<std::size_t>(axis)];
}

int Tensor::rows() const {
    if (rank() != 2) fail("rows() needs a rank-2 tensor, got " + shape_str(shape_));
    return shape_[0];
}

int Tensor::cols() const {
    if (rank() != 2) fail("cols() needs a rank-2 tensor, got " + shape_str(shape_));
    return shape_[1];
}

double& Tensor::at(int r, int c) {
    return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
                 static_cast<std::size_t>(c)];
}

double Tensor::at(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
                 static_cast<std::size_t>(c)];
}

double Tensor::item() const {
    if (numel() != 1) fail("item() needs a single-element tensor, got " + shape_str(shape_));
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

// ---- Var / Tape -------------------------------------------------------------

const Tensor& Var::value() const { return tape_of(*this).value(id); }
const Tensor& Var::grad() const { return tape_of(*this).grad(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
    if (check_finite_ && !value.all_finite()) fail("non-finite value placed on tape");
    nodes_.push_back(Node{std::move(value), {}, BackwardFn(), requires_grad});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, std::vector<int> parents, BackwardFn backward) {
    if (check_finite_ && !value.all_finite()) fail("non-finite value produced on tape");
    bool rg = false;
    for (int p : parents) {
        if (p < 0 || p >= static_cast<int>(nodes_.size())) fail("parent id out of range");
        rg = rg || nodes_[static_cast<std::size_t>(p)].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), std::move(parents),
                          rg ? std::move(backward) : BackwardFn(), rg});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) fail("node id out of range");
    return nodes_[static_cast<std::size_t>(id)].value;
}

bool Tape::requires_grad(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) fail("node id out of range");
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
}

const Tensor& Tape::grad(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) fail("node id out of range");
    auto i = static_cast<std::size_t>(id);
    auto* self = const_cast<Tape*>(this);
    if (self->grads_.size() != nodes_.size()) self->grads_.resize(nodes_.size());
    if (self->grads_[i].numel() != nodes_[i].value.numel())
        self->grads_[i] = Tensor::zeros(nodes_[i].value.shape());
    return grads_[i];
}

void Tape::accumulate(int id, const Tensor& g) {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) fail("node id out of range");
    auto i = static_cast<std::size_t>(id);
    if (!nodes_[i].requires_grad) return;
    if (!g.same_shape(nodes_[i].value))
        fail("gradient shape " + shape_str(g.shape()) + " does not match value shape " +
             shape_str(nodes_[i].value.shape()));
    if (grads_.size() != nodes_.size()) grads_.resize(nodes_.size());
    if (touched_.size() != nodes_.size()) touched_.resize(nodes_.size(), 0);
    if (!touched_[i]) {
        grads_[i] = g;
        touched_[i] = 1;
    } else {
        Tensor& acc = grads_[i];
        for (std::size_t k = 0; k < acc.numel(); ++k) acc[k] += g[k];
    }
    if (check_finite_ && !grads_[i].all_finite()) fail("non-finite gradient");
}

void Tape::backward(Var root) {
    if (root.tape != this) fail("backward root lives on a different tape");
    const Tensor& rv = value(root.id);
    if (rv.numel() != 1) fail("backward root must be a scalar");
    grads_.assign(nodes_.size(), Tensor());
    touched_.assign(nodes_.size(), 0);
    accumulate(root.id, Tensor(rv.shape(), {1.0}));
    // A node's gradient is complete once every consumer has run; consumers
    // always sit later on the tape, so one reverse sweep suffices.
    for (int i = root.id; i >= 0; --i) {
        auto idx = static_cast<std::size_t>(i);
        const Node& n = nodes_[idx];
        if (!touched_[idx] || !n.requires_grad || !n.backward) continue;
        n.backward(*this, grads_[idx]);
    }
}

// ---- elementwise ------------------------------------------------------------

namespace {

enum class BinOp { Add, Sub, Mul };

Var binary(Var a, Var b, BinOp op, const char* name) {
    Tape& t = tape_of(a, b);
    const Tensor& av = t.value(a.id);
    const Tensor& bv = t.value(b.id);
    const bool as = av.numel() == 1;
    const bool bs = bv.numel() == 1;
    if (!as && !bs && !av.same_shape(bv))
        fail(std::string(name) + ": shape mismatch " + shape_str(av.shape()) + " vs " +
             shape_str(bv.shape()));
    const std::vector<int>& out_shape = !as ? av.shape() : (!bs ? bv.shape() : av.shape());
    Tensor out = Tensor::zeros(out_shape);
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = as ? av[0] : av[i];
        const double y = bs ? bv[0] : bv[i];
        switch (op) {
            case BinOp::Add: out[i] = x + y; break;
            case BinOp::Sub: out[i] = x - y; break;
            case BinOp::Mul: out[i] = x * y; break;
        }
    }
    const int aid = a.id;
    const int bid = b.id;
    return t.record(std::move(out), {aid, bid}, [aid, bid, as, bs, op](Tape& tp, const Tensor& g) {
        const Tensor& av2 = tp.value(aid);
        const Tensor& bv2 = tp.value(bid);
        auto side = [&](int id, bool self_scalar, bool is_a) {
            const Tensor& other = is_a ? bv2 : av2;
            const bool other_scalar = is_a ? bs : as;
            const double sign = (op == BinOp::Sub && !is_a) ? -1.0 : 1.0;
            const Tensor& self = is_a ? av2 : bv2;
            if (op == BinOp::Mul) {
                if (self_scalar) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.numel(); ++i)
                        s += g[i] * (other_scalar ? other[0] : other[i]);
                    tp.accumulate(id, Tensor(self.shape(), {s}));
                } else {
                    Tensor d = Tensor::zeros(self.shape());
                    for (std::size_t i = 0; i < g.numel(); ++i)
                        d[i] = g[i] * (other_scalar ? other[0] : other[i]);
                    tp.accumulate(id, d);
                }
                return;
            }
            if (self_scalar) {
                Tensor r = reduce_all(g, self.shape());
                r[0] *= sign;
                tp.accumulate(id, r);
            } else if (sign == 1.0) {
                tp.accumulate(id, g);
            } else {
                Tensor d = Tensor::zeros(self.shape());
                for (std::size_t i = 0; i < g.numel(); ++i) d[i] = -g[i];
                tp.accumulate(id, d);
            }
        };
        side(aid, as, true);
        side(bid, bs, false);
    });
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, BinOp::Add, "add"); }
Var sub(Var a, Var b) { return binary(a, b, BinOp::Sub, "sub"); }
Var mul(Var a, Var b) { return binary(a, b, BinOp::Mul, "mul"); }

Var scale(Var a, double s) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    Tensor out = Tensor::zeros(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] * s;
    const int aid = a.id;
    return t.record(std::move(out), {aid}, [aid, s](Tape& tp, const Tensor& g) {
        Tensor d = Tensor::zeros(g.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) d[i] = g[i] * s;
        tp.accumulate(aid, d);
    });
}

Var add_scalar(Var a, double c) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    Tensor out = Tensor::zeros(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] + c;
    const int aid = a.id;
    return t.record(std::move(out), {aid},
                    [aid](Tape& tp, const Tensor& g) { tp.accumulate(aid, g); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    Tensor out = Tensor::zeros(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    const int aid = a.id;
    return t.record(std::move(out), {aid}, [aid](Tape& tp, const Tensor& g) {
        const Tensor& x = tp.value(aid);
        Tensor d = Tensor::zeros(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) d[i] = x[i] > 0.0 ? g[i] : 0.0;
        tp.accumulate(aid, d);
    });
}

Var reshape(Var a, std::vector<int> shape) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d < 0 ? 0 : d);
    if (n != av.numel())
        fail("reshape: " + shape_str(av.shape()) + " cannot become " + shape_str(shape));
    Tensor out(std::move(shape), std::vector<double>(av.data(), av.data() + av.numel()));
    const int aid = a.id;
    return t.record(std::move(out), {aid}, [aid](Tape& tp, const Tensor& g) {
        const Tensor& x = tp.value(aid);
        tp.accumulate(aid, Tensor(x.shape(), std::vector<double>(g.data(), g.data() + g.numel())));
    });
}

// ---- rank-2 linear algebra ---------------------------------------------------

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    const Tensor& A = t.value(a.id);
    const Tensor& B = t.value(b.id);
    const int m = A.rows(), k = A.cols(), n = B.cols();
    if (B.rows() != k)
        fail("matmul: inner dimensions disagree, " + shape_str(A.shape()) + " x " +
             shape_str(B.shape()));
    Tensor C = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        const double* arow = A.data() + static_cast<std::size_t>(i) * k;
        double* crow = C.data() + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = B.data() + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    const int aid = a.id, bid = b.id;
    return t.record(std::move(C), {aid, bid}, [aid, bid](Tape& tp, const Tensor& g) {
        const Tensor& A2 = tp.value(aid);
        const Tensor& B2 = tp.value(bid);
        const int m2 = A2.rows(), k2 = A2.cols(), n2 = B2.cols();
        if (tp.requires_grad(aid)) {
            Tensor dA = Tensor::zeros({m2, k2});  // G B^T
            for (int i = 0; i < m2; ++i)
                for (int p = 0; p < k2; ++p) {
                    double s = 0.0;
                    const double* grow = g.data() + static_cast<std::size_t>(i) * n2;
                    const double* brow = B2.data() + static_cast<std::size_t>(p) * n2;
                    for (int j = 0; j < n2; ++j) s += grow[j] * brow[j];
                    dA.at(i, p) = s;
                }
            tp.accumulate(aid, dA);
        }
        if (tp.requires_grad(bid)) {
            Tensor dB = Tensor::zeros({k2, n2});  // A^T G
            for (int i = 0; i < m2; ++i) {
                const double* grow = g.data() + static_cast<std::size_t>(i) * n2;
                for (int p = 0; p < k2; ++p) {
                    const double av = A2.at(i, p);
                    if (av == 0.0) continue;
                    double* drow = dB.data() + static_cast<std::size_t>(p) * n2;
                    for (int j = 0; j < n2; ++j) drow[j] += av * grow[j];
                }
            }
            tp.accumulate(bid, dB);
        }
    });
}

Var transpose(Var a) {
    Tape& t = tape_of(a);
    const Tensor& A = t.value(a.id);
    const int m = A.rows(), n = A.cols();
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = A.at(i, j);
    const int aid = a.id;
    return t.record(std::move(out), {aid}, [aid, m, n](Tape& tp, const Tensor& g) {
        Tensor d = Tensor::zeros({m, n});
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) d.at(i, j) = g.at(j, i);
        tp.accumulate(aid, d);
    });
}

// ---- reductions --------------------------------------------------------------

Var sum(Var a) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    double s = 0.0;
    for (std::size_t i = 0; i < av.numel(); ++i) s += av[i];
    const int aid = a.id;
    return t.record(Tensor::scalar(s), {aid}, [aid](Tape& tp, const Tensor& g) {
        const Tensor& x = tp.value(aid);
        tp.accumulate(aid, Tensor::full(x.shape(), g[0]));
    });
}

Var mean(Var a) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    if (av.numel() == 0) fail("mean of an empty tensor");
    const double inv = 1.0 / static_cast<double>(av.numel());
    double s = 0.0;
    for (std::size_t i = 0; i < av.numel(); ++i) s += av[i];
    const int aid = a.id;
    return t.record(Tensor::scalar(s * inv), {aid}, [aid, inv](Tape& tp, const Tensor& g) {
        const Tensor& x = tp.value(aid);
        tp.accumulate(aid, Tensor::full(x.shape(), g[0] * inv));
    });
}

namespace {

void check_axis(const Tensor& av, int axis, const char* name) {
    if (av.rank() == 1) {
        if (axis != 0) fail(std::string(name) + ": rank-1 tensors only have axis 0");
    } else if (av.rank() == 2) {
        if (axis != 0 && axis != 1) fail(std::string(name) + ": axis must be 0 or 1");
    } else {
        fail(std::string(name) + ": needs a rank-1 or rank-2 tensor, got " +
             shape_str(av.shape()));
    }
}

}  // namespace

Var sum(Var a, int axis) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    check_axis(av, axis, "sum");
    if (av.rank() == 1) return sum(a);
    const int R = av.rows(), C = av.cols();
    const int aid = a.id;
    if (axis == 0) {
        Tensor out = Tensor::zeros({C});
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j) out[static_cast<std::size_t>(j)] += av.at(i, j);
        return t.record(std::move(out), {aid}, [aid, R, C](Tape& tp, const Tensor& g) {
            Tensor d = Tensor::zeros({R, C});
            for (int i = 0; i < R; ++i)
                for (int j = 0; j < C; ++j) d.at(i, j) = g[static_cast<std::size_t>(j)];
            tp.accumulate(aid, d);
        });
    }
    Tensor out = Tensor::zeros({R});
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) out[static_cast<std::size_t>(i)] += av.at(i, j);
    return t.record(std::move(out), {aid}, [aid, R, C](Tape& tp, const Tensor& g) {
        Tensor d = Tensor::zeros({R, C});
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j) d.at(i, j) = g[static_cast<std::size_t>(i)];
        tp.accumulate(aid, d);
    });
}

Var mean(Var a, int axis) {
    const Tensor& av = tape_of(a).value(a.id);
    check_axis(av, axis, "mean");
    if (av.rank() == 1) return mean(a);
    const int count = axis == 0 ? av.rows() : av.cols();
    if (count == 0) fail("mean over an empty axis");
    return scale(sum(a, axis), 1.0 / static_cast<double>(count));
}

Var max(Var a, int axis) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    check_axis(av, axis, "max");
    const int aid = a.id;
    if (av.rank() == 1) {
        if (av.numel() == 0) fail("max of an empty tensor");
        std::size_t best = 0;
        for (std::size_t i = 1; i < av.numel(); ++i)
            if (av[i] > av[best]) best = i;
        return t.record(Tensor::scalar(av[best]), {aid}, [aid, best](Tape& tp, const Tensor& g) {
            Tensor d = Tensor::zeros(tp.value(aid).shape());
            d[best] = g[0];
            tp.accumulate(aid, d);
        });
    }
    const int R = av.rows(), C = av.cols();
    if (R == 0 || C == 0) fail("max over an empty axis");
    const int out_n = axis == 0 ? C : R;
    Tensor out = Tensor::zeros({out_n});
    std::vector<int> arg(static_cast<std::size_t>(out_n), 0);
    for (int o = 0; o < out_n; ++o) {
        const int inner = axis == 0 ? R : C;
        int best = 0;
        double bv = axis == 0 ? av.at(0, o) : av.at(o, 0);
        for (int i = 1; i < inner; ++i) {
            const double v = axis == 0 ? av.at(i, o) : av.at(o, i);
            if (v > bv) {
                bv = v;
                best = i;
            }
        }
        out[static_cast<std::size_t>(o)] = bv;
        arg[static_cast<std::size_t>(o)] = best;
    }
    return t.record(std::move(out), {aid},
                    [aid, axis, R, C, arg](Tape& tp, const Tensor& g) {
                        Tensor d = Tensor::zeros({R, C});
                        for (std::size_t o = 0; o < arg.size(); ++o) {
                            if (axis == 0)
                                d.at(arg[o], static_cast<int>(o)) = g[o];
                            else
                                d.at(static_cast<int>(o), arg[o]) = g[o];
                        }
                        tp.accumulate(aid, d);
                    });
}

Var log_sum_exp(Var a, int axis) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    check_axis(av, axis, "log_sum_exp");
    const int aid = a.id;
    // shift by the max so exp never overflows: lse(x) = m + log sum exp(x - m)
    auto lse_span = [](const double* x, std::size_t n, std::size_t stride) {
        double m = x[0];
        for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i * stride]);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i * stride] - m);
        return m + std::log(s);
    };
    auto grad_span = [](const double* x, double* d, std::size_t n, std::size_t stride,
                        double up) {
        double m = x[0];
        for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i * stride]);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i * stride] - m);
        for (std::size_t i = 0; i < n; ++i)
            d[i * stride] += up * std::exp(x[i * stride] - m) / s;
    };
    if (av.rank() == 1) {
        if (av.numel() == 0) fail("log_sum_exp of an empty tensor");
        const double v = lse_span(av.data(), av.numel(), 1);
        return t.record(Tensor::scalar(v), {aid},
                        [aid, grad_span](Tape& tp, const Tensor& g) {
                            const Tensor& x = tp.value(aid);
                            Tensor d = Tensor::zeros(x.shape());
                            grad_span(x.data(), d.data(), x.numel(), 1, g[0]);
                            tp.accumulate(aid, d);
                        });
    }
    const int R = av.rows(), C = av.cols();
    if (R == 0 || C == 0) fail("log_sum_exp over an empty axis");
    const int out_n = axis == 0 ? C : R;
    Tensor out = Tensor::zeros({out_n});
    for (int o = 0; o < out_n; ++o) {
        const double* base = axis == 0 ? av.data() + o : av.data() + static_cast<std::size_t>(o) * C;
        out[static_cast<std::size_t>(o)] =
            lse_span(base, static_cast<std::size_t>(axis == 0 ? R : C),
                     axis == 0 ? static_cast<std::size_t>(C) : 1);
    }
    return t.record(std::move(out), {aid},
                    [aid, axis, R, C, grad_span](Tape& tp, const Tensor& g) {
                        const Tensor& x = tp.value(aid);
                        Tensor d = Tensor::zeros({R, C});
                        const int out_n2 = axis == 0 ? C : R;
                        for (int o = 0; o < out_n2; ++o) {
                            const double* base = axis == 0
                                                     ? x.data() + o
                                                     : x.data() + static_cast<std::size_t>(o) * C;
                            double* dbase = axis == 0
                                                ? d.data() + o
                                                : d.data() + static_cast<std::size_t>(o) * C;
                            grad_span(base, dbase, static_cast<std::size_t>(axis == 0 ? R : C),
                                      axis == 0 ? static_cast<std::size_t>(C) : 1,
                                      g[static_cast<std::size_t>(o)]);
                        }
                        tp.accumulate(aid, d);
                    });
}

// ---- structural ops ------------------------------------------------------------

Var gather_rows(Var a, std::vector<int> rows) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    const int R = av.rows(), C = av.cols();
    for (int r : rows)
        if (r < 0 || r >= R) fail("gather_rows: row index " + std::to_string(r) + " out of range");
    Tensor out = Tensor::zeros({static_cast<int>(rows.size()), C});
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (int j = 0; j < C; ++j) out.at(static_cast<int>(k), j) = av.at(rows[k], j);
    const int aid = a.id;
    return t.record(std::move(out), {aid},
                    [aid, rows = std::move(rows), R, C](Tape& tp, const Tensor& g) {
                        Tensor d = Tensor::zeros({R, C});
                        for (std::size_t k = 0; k < rows.size(); ++k)
                            for (int j = 0; j < C; ++j)
                                d.at(rows[k], j) += g.at(static_cast<int>(k), j);
                        tp.accumulate(aid, d);
                    });
}

Var slice_rows(Var a, int begin, int count) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    const int R = av.rows(), C = av.cols();
    if (begin < 0 || count < 1 || begin + count > R)
        fail("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
             ") out of range for " + std::to_string(R) + " rows");
    Tensor out = Tensor::zeros({count, C});
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < C; ++j) out.at(i, j) = av.at(begin + i, j);
    const int aid = a.id;
    return t.record(std::move(out), {aid},
                    [aid, begin, count, R, C](Tape& tp, const Tensor& g) {
                        Tensor d = Tensor::zeros({R, C});
                        for (int i = 0; i < count; ++i)
                            for (int j = 0; j < C; ++j) d.at(begin + i, j) = g.at(i, j);
                        tp.accumulate(aid, d);
                    });
}

Var diff_rows(Var a) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    const int R = av.rows(), C = av.cols();
    if (R < 2) fail("diff_rows needs at least 2 rows");
    Tensor out = Tensor::zeros({R - 1, C});
    for (int i = 0; i + 1 < R; ++i)
        for (int j = 0; j < C; ++j) out.at(i, j) = av.at(i + 1, j) - av.at(i, j);
    const int aid = a.id;
    return t.record(std::move(out), {aid}, [aid, R, C](Tape& tp, const Tensor& g) {
        Tensor d = Tensor::zeros({R, C});
        for (int i = 0; i + 1 < R; ++i)
            for (int j = 0; j < C; ++j) {
                d.at(i + 1, j) += g.at(i, j);
                d.at(i, j) -= g.at(i, j);
            }
        tp.accumulate(aid, d);
    });
}

Var add_rowvec(Var m, Var row) {
    Tape& t = tape_of(m, row);
    const Tensor& mv = t.value(m.id);
    const Tensor& rv = t.value(row.id);
    const int R = mv.rows(), C = mv.cols();
    if (rv.rank() != 1 || rv.dim(0) != C)
        fail("add_rowvec: row shape " + shape_str(rv.shape()) + " does not match " +
             std::to_string(C) + " columns");
    Tensor out = Tensor::zeros({R, C});
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) out.at(i, j) = mv.at(i, j) + rv[static_cast<std::size_t>(j)];
    const int mid = m.id, rid = row.id;
    return t.record(std::move(out), {mid, rid}, [mid, rid, R, C](Tape& tp, const Tensor& g) {
        tp.accumulate(mid, g);
        Tensor dr = Tensor::zeros({C});
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j) dr[static_cast<std::size_t>(j)] += g.at(i, j);
        tp.accumulate(rid, dr);
    });
}

Var softmax_rows(Var a) {
    Tape& t = tape_of(a);
    const Tensor& av = t.value(a.id);
    const int R = av.rows(), C = av.cols();
    if (C == 0) fail("softmax_rows: empty rows");
    Tensor out = Tensor::zeros({R, C});
    for (int i = 0; i < R; ++i) {
        double m = av.at(i, 0);
        for (int j = 1; j < C; ++j) m = std::max(m, av.at(i, j));
        double s = 0.0;
        for (int j = 0; j < C; ++j) {
            out.at(i, j) = std::exp(av.at(i, j) - m);
            s += out.at(i, j);
        }
        for (int j = 0; j < C; ++j) out.at(i, j) /= s;
    }
    const int aid = a.id;
    Tensor saved = out;
    return t.record(std::move(out), {aid},
                    [aid, R, C, saved = std::move(saved)](Tape& tp, const Tensor& g) {
                        Tensor d = Tensor::zeros({R, C});
                        for (int i = 0; i < R; ++i) {
                            double dot = 0.0;
                            for (int j = 0; j < C; ++j) dot += g.at(i, j) * saved.at(i, j);
                            for (int j = 0; j < C; ++j)
                                d.at(i, j) = saved.at(i, j) * (g.at(i, j) - dot);
                        }
                        tp.accumulate(aid, d);
                    });
}

Var cross_entropy_mean(Var logits, const std::vector<int>& labels) {
    Tape& t = tape_of(logits);
    const Tensor& lv = t.value(logits.id);
    const int B = lv.rows(), K = lv.cols();
    if (static_cast<int>(labels.size()) != B)
        fail("cross_entropy_mean: " + std::to_string(labels.size()) + " labels for " +
             std::to_string(B) + " rows");
    for (int y : labels)
        if (y < 0 || y >= K) fail("cross_entropy_mean: label " + std::to_string(y) + " out of range");
    double total = 0.0;
    for (int i = 0; i < B; ++i) {
        double m = lv.at(i, 0);
        for (int j = 1; j < K; ++j) m = std::max(m, lv.at(i, j));
        double s = 0.0;
        for (int j = 0; j < K; ++j) s += std::exp(lv.at(i, j) - m);
        total += m + std::log(s) - lv.at(i, labels[static_cast<std::size_t>(i)]);
    }
    const double val = total / static_cast<double>(B);
    const int lid = logits.id;
    return t.record(Tensor::scalar(val), {lid},
                    [lid, labels, B, K](Tape& tp, const Tensor& g) {
                        const Tensor& x = tp.value(lid);
                        Tensor d = Tensor::zeros({B, K});
                        const double inv = g[0] / static_cast<double>(B);
                        for (int i = 0; i < B; ++i) {
                            double m = x.at(i, 0);
                            for (int j = 1; j < K; ++j) m = std::max(m, x.at(i, j));
                            double s = 0.0;
                            for (int j = 0; j < K; ++j) s += std::exp(x.at(i, j) - m);
                            for (int j = 0; j < K; ++j) {
                                double p = std::exp(x.at(i, j) - m) / s;
                                d.at(i, j) = inv * (p - (j == labels[static_cast<std::size_t>(i)]
                                                             ? 1.0
                                                             : 0.0));
                            }
                        }
                        tp.accumulate(lid, d);
                    });
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) fail("stack_rows: no rows");
    Tape& t = tape_of(rows[0]);
    const int D = static_cast<int>(t.value(rows[0].id).numel());
    std::vector<int> ids;
    ids.reserve(rows.size());
    for (Var r : rows) {
        Tape& rt = tape_of(r);
        if (&rt != &t) fail("stack_rows: vars must live on the same tape");
        const Tensor& v = t.value(r.id);
        if (v.rank() != 1 || v.dim(0) != D)
            fail("stack_rows: every row must be a length-" + std::to_string(D) + " vector");
        ids.push_back(r.id);
    }
    const int Kn = static_cast<int>(rows.size());
    Tensor out = Tensor::zeros({Kn, D});
    for (int i = 0; i < Kn; ++i) {
        const Tensor& v = t.value(ids[static_cast<std::size_t>(i)]);
        for (int j = 0; j < D; ++j) out.at(i, j) = v[static_cast<std::size_t>(j)];
    }
    return t.record(std::move(out), ids, [ids, D](Tape& tp, const Tensor& g) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            Tensor d = Tensor::zeros({D});
            for (int j = 0; j < D; ++j) d[static_cast<std::size_t>(j)] = g.at(static_cast<int>(i), j);
            tp.accumulate(ids[i], d);
        }
    });
}

Var concat_scalars(const std::vector<Var>& xs) {
    if (xs.empty()) fail("concat_scalars: no inputs");
    Tape& t = tape_of(xs[0]);
    std::vector<int> ids;
    ids.reserve(xs.size());
    Tensor out = Tensor::zeros({static_cast<int>(xs.size())});
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Tape& xt = tape_of(xs[i]);
        if (&xt != &t) fail("concat_scalars: vars must live on the same tape");
        const Tensor& v = t.value(xs[i].id);
        if (v.numel() != 1) fail("concat_scalars: every input must hold one element");
        out[i] = v[0];
        ids.push_back(xs[i].id);
    }
    return t.record(std::move(out), ids, [ids](Tape& tp, const Tensor& g) {
        for (std::size_t i = 0; i < ids.size(); ++i)
            tp.accumulate(ids[i], Tensor(tp.value(ids[i]).shape(), {g[i]}));
    });
}

// ---- gradient checking ----------------------------------------------------------

GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& build, const Tensor& x,
                           double eps) {
    Tape t;
    Var xv = t.leaf(x, true);
    Var y = build(t, xv);
    if (y.tape != &t) fail("grad_check: build() must return a var on the provided tape");
    if (y.value().numel() != 1) fail("grad_check: build() must return a scalar");
    if (!std::isfinite(y.value().item())) fail("grad_check: non-finite value at x");
    t.backward(y);
    const Tensor analytic = xv.grad();

    auto eval = [&build](const Tensor& p) {
        Tape tt;
        Var out = build(tt, tt.leaf(p, false));
        const double v = out.value().item();
        if (!std::isfinite(v)) fail("grad_check: non-finite value at probe point");
        return v;
    };

    GradCheckReport rep;
    Tensor xp = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + eps;
        const double fp = eval(xp);
        xp[i] = orig - eps;
        const double fm = eval(xp);
        xp[i] = orig;
        const double num = (fp - fm) / (2.0 * eps);
        const double ana = analytic[i];
        const double denom = std::max({std::fabs(ana), std::fabs(num), 1e-8});
        const double rel = std::fabs(ana - num) / denom;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_coord = i;
            rep.analytic = ana;
            rep.numeric = num;
        }
    }
    return rep;
}

}  // namespace grw
