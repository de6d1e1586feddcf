#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace grw {

// Dense row-major double tensor. Rank 0 (shape {}) is a scalar with one
// element. All library math runs in double precision.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double v);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t numel() const { return data_.size(); }
    int dim(int axis) const;

    // rank-2 accessors
    int rows() const;
    int cols() const;
    double& at(int r, int c);
    double at(int r, int c) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double item() const;
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

class Tape;

// Handle to a node recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& value() const;
    const Tensor& grad() const;
};

// Reverse-mode tape. Nodes are recorded in evaluation order; backward()
// walks them once in reverse, so recording order is the topological order.
// A tape is single-owner and not thread safe; independent tapes on
// independent threads are fine.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& upstream)>;

    Var leaf(Tensor value, bool requires_grad = false);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Extension point: record a node with a custom backward. `backward`
    // must push gradients to the parents via accumulate(). Pass an empty
    // function for non-differentiable results.
    Var record(Tensor value, std::vector<int> parents, BackwardFn backward);

    // Seeds the (scalar) root with gradient 1 and propagates to all leaves.
    // Gradients across fan-out accumulate by summation.
    void backward(Var root);

    const Tensor& value(int id) const;
    const Tensor& grad(int id) const;
    bool requires_grad(int id) const;
    void accumulate(int id, const Tensor& g);

    std::size_t size() const { return nodes_.size(); }

    // When set, every primitive checks its output for NaN/Inf and throws
    // std::runtime_error on the first hit.
    void set_check_finite(bool b) { check_finite_ = b; }
    bool check_finite() const { return check_finite_; }

private:
    struct Node {
        Tensor value;
        std::vector<int> parents;
        BackwardFn backward;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::vector<char> touched_;
    bool check_finite_ = true;
};

// ---- primitives -----------------------------------------------------------
// Elementwise ops accept exactly matching shapes or a scalar (numel 1) on
// either side; anything else is a shape error.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double c);
Var neg(Var a);

Var matmul(Var a, Var b);      // rank-2 only; dA = G B^T, dB = A^T G
Var transpose(Var a);          // rank-2
Var relu(Var a);
Var reshape(Var a, std::vector<int> shape);  // same numel, row-major data unchanged

Var sum(Var a);
Var sum(Var a, int axis);
Var mean(Var a);
Var mean(Var a, int axis);
Var max(Var a, int axis);      // gradient routes to the argmax, lowest index on ties
Var log_sum_exp(Var a, int axis);  // m + log sum exp(x - m), overflow safe

Var gather_rows(Var a, std::vector<int> rows);   // rank-2; backward scatters
Var slice_rows(Var a, int begin, int count);
Var diff_rows(Var a);          // rows[1:] - rows[:-1]
Var add_rowvec(Var m, Var row);                   // broadcast row over all rows
Var softmax_rows(Var a);
Var cross_entropy_mean(Var logits, const std::vector<int>& labels);
Var stack_rows(const std::vector<Var>& rows);     // k vectors of length d -> k x d
Var concat_scalars(const std::vector<Var>& xs);   // k single-element vars -> length-k vector

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

// ---- gradient checking ----------------------------------------------------
struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_coord = 0;
    double analytic = 0.0;   // analytic derivative at the worst coordinate
    double numeric = 0.0;    // central-difference estimate at the same coordinate
};

// Compares the tape gradient of a scalar function against central finite
// differences (f(x+eps e_i) - f(x-eps e_i)) / 2eps. The relative error
// denominator is max(|analytic|, |numeric|, 1e-8). Throws std::runtime_error
// if f is non-finite at any probe point.
GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& build,
                           const Tensor& x, double eps = 1e-5);

}  // namespace grw
