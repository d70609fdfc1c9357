#ifndef OZSL_AUTODIFF_HPP
#define OZSL_AUTODIFF_HPP

// Taped reverse-mode differentiation over Matrix values.
//
// Every backward rule is written in terms of the same differentiable ops, so
// when grad() runs with create_graph = true the returned gradients are graph
// nodes themselves and can be differentiated again (double backprop).

#include "ozsl/matrix.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ozsl::ad {

enum class op_tag {
    constant,
    parameter,
    matmul,
    transpose,
    add,
    sub,
    mul,
    scale,
    add_bias,
    leaky_relu,
    relu,
    concat_cols,
    slice_cols,
    pad_cols,
    exp,
    log,
    sqrt,
    reciprocal,
    square,
    sum,
    mean,
    sum_rows,
    sum_cols,
    broadcast_scalar,
    broadcast_rows,
    broadcast_cols,
    softmax,
    softmax_cross_entropy,
};

class Var;

namespace detail {

struct node;

using backward_fn = std::function<std::vector<Var>(const Var &self, const Var &grad_out)>;

inline bool &grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

/// Handle to a node of the computation graph. Copies share the node.
class Var {
  public:
    Var() = default;

    static Var constant(Matrix value);
    static Var parameter(Matrix value);

    [[nodiscard]] const Matrix &value() const;
    [[nodiscard]] std::size_t rows() const { return value().rows(); }
    [[nodiscard]] std::size_t cols() const { return value().cols(); }
    [[nodiscard]] double scalar() const;
    [[nodiscard]] op_tag op() const;
    [[nodiscard]] bool requires_grad() const;
    [[nodiscard]] bool valid() const noexcept { return static_cast<bool>(node_); }

    /// Accumulated gradient slot, filled by backward().
    [[nodiscard]] const Matrix &grad() const;
    void zero_grad();

    /// In-place update of a parameter leaf (used by optimizers).
    void assign(Matrix value);

    /// Same value, cut from the graph.
    [[nodiscard]] Var detach() const { return constant(value()); }

    [[nodiscard]] const detail::node *id() const noexcept { return node_.get(); }
    [[nodiscard]] const std::vector<Var> &parents() const;

  private:
    friend Var make_var(Matrix, op_tag, std::vector<Var>, detail::backward_fn);
    friend std::vector<Var> grad(const Var &, std::span<const Var>, bool);
    friend void backward(const Var &, std::span<const Var>);

    explicit Var(std::shared_ptr<detail::node> n) : node_{std::move(n)} {}

    std::shared_ptr<detail::node> node_;
};

namespace detail {

struct node {
    Matrix value;
    Matrix grad;
    std::vector<Var> parents;
    op_tag op = op_tag::constant;
    bool requires_grad = false;
    backward_fn backward;
};

}  // namespace detail

/// Disables graph recording on this thread for the guard's lifetime.
class no_grad_guard {
  public:
    explicit no_grad_guard(bool enable_recording = false) : previous_{detail::grad_mode()} { detail::grad_mode() = enable_recording; }
    ~no_grad_guard() { detail::grad_mode() = previous_; }
    no_grad_guard(const no_grad_guard &) = delete;
    no_grad_guard &operator=(const no_grad_guard &) = delete;

  private:
    bool previous_;
};

inline Var make_var(Matrix value, op_tag op, std::vector<Var> parents, detail::backward_fn fn) {
    require_finite(value, "autodiff");
    auto n = std::make_shared<detail::node>();
    n->op = op;
    bool needs = false;
    if (detail::grad_mode()) {
        for (const auto &p : parents) {
            needs = needs || p.requires_grad();
        }
    }
    n->requires_grad = needs;
    if (needs) {
        n->parents = std::move(parents);
        n->backward = std::move(fn);
    }
    n->grad = Matrix{value.rows(), value.cols()};
    n->value = std::move(value);
    return Var{std::move(n)};
}

inline Var Var::constant(Matrix value) {
    require_finite(value, "constant");
    auto n = std::make_shared<detail::node>();
    n->grad = Matrix{value.rows(), value.cols()};
    n->value = std::move(value);
    n->op = op_tag::constant;
    return Var{std::move(n)};
}

inline Var Var::parameter(Matrix value) {
    require_finite(value, "parameter");
    auto n = std::make_shared<detail::node>();
    n->grad = Matrix{value.rows(), value.cols()};
    n->value = std::move(value);
    n->op = op_tag::parameter;
    n->requires_grad = true;
    return Var{std::move(n)};
}

inline const Matrix &Var::value() const { return node_->value; }
inline op_tag Var::op() const { return node_->op; }
inline const std::vector<Var> &Var::parents() const { return node_->parents; }
inline bool Var::requires_grad() const { return node_ && node_->requires_grad; }
inline const Matrix &Var::grad() const { return node_->grad; }
inline void Var::zero_grad() { node_->grad = Matrix{node_->value.rows(), node_->value.cols()}; }

inline double Var::scalar() const {
    if (value().size() != 1) {
        throw contract_error("scalar(): node has shape " + value().shape());
    }
    return value()(0, 0);
}

inline void Var::assign(Matrix value) {
    if (node_->op != op_tag::parameter) {
        throw contract_error("assign(): only parameter leaves can be updated in place");
    }
    require_same_shape(node_->value, value, "assign");
    require_finite(value, "assign");
    node_->value = std::move(value);
}

// --- primitives --------------------------------------------------------------

inline Var matmul(const Var &a, const Var &b);
inline Var transpose(const Var &a);
inline Var add(const Var &a, const Var &b);
inline Var sub(const Var &a, const Var &b);
inline Var mul(const Var &a, const Var &b);
inline Var scale(const Var &a, double factor);
inline Var add_bias(const Var &x, const Var &bias);
inline Var leaky_relu(const Var &x, double slope);
inline Var relu(const Var &x);
inline Var concat_cols(const Var &a, const Var &b);
inline Var slice_cols(const Var &x, std::size_t start, std::size_t count);
inline Var pad_cols(const Var &x, std::size_t start, std::size_t total);
inline Var exp(const Var &x);
inline Var log(const Var &x);
inline Var sqrt(const Var &x);
inline Var reciprocal(const Var &x);
inline Var square(const Var &x);
inline Var sum(const Var &x);
inline Var mean(const Var &x);
inline Var sum_rows(const Var &x);
inline Var sum_cols(const Var &x);
inline Var broadcast_scalar(const Var &s, std::size_t rows, std::size_t cols);
inline Var broadcast_rows(const Var &r, std::size_t rows);
inline Var broadcast_cols(const Var &c, std::size_t cols);
inline Var softmax(const Var &logits);
inline Var softmax_cross_entropy(const Var &logits, std::span<const std::size_t> labels);

inline Var matmul(const Var &a, const Var &b) {
    return make_var(ozsl::matmul(a.value(), b.value()), op_tag::matmul, {a, b}, [a, b](const Var &, const Var &g) {
        return std::vector<Var>{matmul(g, transpose(b)), matmul(transpose(a), g)};
    });
}

inline Var transpose(const Var &a) {
    return make_var(ozsl::transpose(a.value()), op_tag::transpose, {a}, [](const Var &, const Var &g) {
        return std::vector<Var>{transpose(g)};
    });
}

inline Var add(const Var &a, const Var &b) {
    return make_var(a.value() + b.value(), op_tag::add, {a, b}, [](const Var &, const Var &g) {
        return std::vector<Var>{g, g};
    });
}

inline Var sub(const Var &a, const Var &b) {
    return make_var(a.value() - b.value(), op_tag::sub, {a, b}, [](const Var &, const Var &g) {
        return std::vector<Var>{g, scale(g, -1.0)};
    });
}

inline Var mul(const Var &a, const Var &b) {
    return make_var(hadamard(a.value(), b.value()), op_tag::mul, {a, b}, [a, b](const Var &, const Var &g) {
        return std::vector<Var>{mul(g, b), mul(g, a)};
    });
}

inline Var scale(const Var &a, double factor) {
    return make_var(factor * a.value(), op_tag::scale, {a}, [factor](const Var &, const Var &g) {
        return std::vector<Var>{scale(g, factor)};
    });
}

inline Var add_bias(const Var &x, const Var &bias) {
    if (bias.rows() != 1 || bias.cols() != x.cols()) {
        throw dimension_error("add_bias: bias " + bias.value().shape() + " does not fit " + x.value().shape());
    }
    Matrix out = x.value();
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row_span(i);
        for (std::size_t j = 0; j < out.cols(); ++j) {
            row[j] += bias.value()(0, j);
        }
    }
    return make_var(std::move(out), op_tag::add_bias, {x, bias}, [](const Var &, const Var &g) {
        return std::vector<Var>{g, sum_rows(g)};
    });
}

inline Var leaky_relu(const Var &x, double slope) {
    Matrix slope_mask = map(x.value(), [slope](double v) { return v > 0.0 ? 1.0 : slope; });
    Matrix out = hadamard(x.value(), slope_mask);
    return make_var(std::move(out), op_tag::leaky_relu, {x}, [mask = Var::constant(std::move(slope_mask))](const Var &, const Var &g) {
        return std::vector<Var>{mul(g, mask)};
    });
}

inline Var relu(const Var &x) {
    Matrix gate = map(x.value(), [](double v) { return v > 0.0 ? 1.0 : 0.0; });
    Matrix out = hadamard(x.value(), gate);
    return make_var(std::move(out), op_tag::relu, {x}, [mask = Var::constant(std::move(gate))](const Var &, const Var &g) {
        return std::vector<Var>{mul(g, mask)};
    });
}

inline Var concat_cols(const Var &a, const Var &b) {
    if (a.rows() != b.rows()) {
        throw dimension_error("concat_cols: row mismatch " + a.value().shape() + " | " + b.value().shape());
    }
    const std::size_t ca = a.cols();
    const std::size_t cb = b.cols();
    Matrix out{a.rows(), ca + cb};
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::copy_n(a.value().row_span(i).begin(), ca, out.row_span(i).begin());
        std::copy_n(b.value().row_span(i).begin(), cb, out.row_span(i).begin() + static_cast<std::ptrdiff_t>(ca));
    }
    return make_var(std::move(out), op_tag::concat_cols, {a, b}, [ca, cb](const Var &, const Var &g) {
        return std::vector<Var>{slice_cols(g, 0, ca), slice_cols(g, ca, cb)};
    });
}

inline Var slice_cols(const Var &x, std::size_t start, std::size_t count) {
    if (start + count > x.cols()) {
        throw dimension_error("slice_cols: range exceeds " + x.value().shape());
    }
    const std::size_t total = x.cols();
    Matrix out{x.rows(), count};
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::copy_n(x.value().row_span(i).begin() + static_cast<std::ptrdiff_t>(start), count, out.row_span(i).begin());
    }
    return make_var(std::move(out), op_tag::slice_cols, {x}, [start, total](const Var &, const Var &g) {
        return std::vector<Var>{pad_cols(g, start, total)};
    });
}

inline Var pad_cols(const Var &x, std::size_t start, std::size_t total) {
    if (start + x.cols() > total) {
        throw dimension_error("pad_cols: target too narrow");
    }
    const std::size_t count = x.cols();
    Matrix out{x.rows(), total};
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::copy_n(x.value().row_span(i).begin(), count, out.row_span(i).begin() + static_cast<std::ptrdiff_t>(start));
    }
    return make_var(std::move(out), op_tag::pad_cols, {x}, [start, count](const Var &, const Var &g) {
        return std::vector<Var>{slice_cols(g, start, count)};
    });
}

inline Var exp(const Var &x) {
    return make_var(map(x.value(), [](double v) { return std::exp(v); }), op_tag::exp, {x}, [](const Var &self, const Var &g) {
        return std::vector<Var>{mul(g, self)};
    });
}

inline Var log(const Var &x) {
    for (double v : x.value().data()) {
        if (!(v > 0.0)) {
            throw domain_error("log: non-positive argument " + std::to_string(v));
        }
    }
    return make_var(map(x.value(), [](double v) { return std::log(v); }), op_tag::log, {x}, [x](const Var &, const Var &g) {
        return std::vector<Var>{mul(g, reciprocal(x))};
    });
}

inline Var sqrt(const Var &x) {
    for (double v : x.value().data()) {
        if (!(v > 0.0)) {
            throw domain_error("sqrt: non-positive argument " + std::to_string(v));
        }
    }
    return make_var(map(x.value(), [](double v) { return std::sqrt(v); }), op_tag::sqrt, {x}, [](const Var &self, const Var &g) {
        return std::vector<Var>{mul(g, scale(reciprocal(self), 0.5))};
    });
}

inline Var reciprocal(const Var &x) {
    for (double v : x.value().data()) {
        if (v == 0.0) {
            throw domain_error("reciprocal: zero argument");
        }
    }
    return make_var(map(x.value(), [](double v) { return 1.0 / v; }), op_tag::reciprocal, {x}, [](const Var &self, const Var &g) {
        return std::vector<Var>{mul(g, scale(square(self), -1.0))};
    });
}

inline Var square(const Var &x) {
    return make_var(map(x.value(), [](double v) { return v * v; }), op_tag::square, {x}, [x](const Var &, const Var &g) {
        return std::vector<Var>{mul(g, scale(x, 2.0))};
    });
}

inline Var sum(const Var &x) {
    const std::size_t r = x.rows();
    const std::size_t c = x.cols();
    return make_var(Matrix{1, 1, ozsl::sum(x.value())}, op_tag::sum, {x}, [r, c](const Var &, const Var &g) {
        return std::vector<Var>{broadcast_scalar(g, r, c)};
    });
}

inline Var mean(const Var &x) {
    const std::size_t r = x.rows();
    const std::size_t c = x.cols();
    if (r * c == 0) {
        throw dimension_error("mean: empty input");
    }
    const double inv = 1.0 / static_cast<double>(r * c);
    return make_var(Matrix{1, 1, ozsl::sum(x.value()) * inv}, op_tag::mean, {x}, [r, c, inv](const Var &, const Var &g) {
        return std::vector<Var>{scale(broadcast_scalar(g, r, c), inv)};
    });
}

inline Var sum_rows(const Var &x) {
    Matrix out{1, x.cols()};
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out(0, j) += x.value()(i, j);
        }
    }
    const std::size_t r = x.rows();
    return make_var(std::move(out), op_tag::sum_rows, {x}, [r](const Var &, const Var &g) {
        return std::vector<Var>{broadcast_rows(g, r)};
    });
}

inline Var sum_cols(const Var &x) {
    Matrix out{x.rows(), 1};
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double acc = 0.0;
        for (double v : x.value().row_span(i)) {
            acc += v;
        }
        out(i, 0) = acc;
    }
    const std::size_t c = x.cols();
    return make_var(std::move(out), op_tag::sum_cols, {x}, [c](const Var &, const Var &g) {
        return std::vector<Var>{broadcast_cols(g, c)};
    });
}

inline Var broadcast_scalar(const Var &s, std::size_t rows, std::size_t cols) {
    const double v = s.scalar();
    return make_var(Matrix{rows, cols, v}, op_tag::broadcast_scalar, {s}, [](const Var &, const Var &g) {
        return std::vector<Var>{sum(g)};
    });
}

inline Var broadcast_rows(const Var &r, std::size_t rows) {
    if (r.rows() != 1) {
        throw dimension_error("broadcast_rows: expected a row vector, got " + r.value().shape());
    }
    Matrix out{rows, r.cols()};
    for (std::size_t i = 0; i < rows; ++i) {
        std::copy_n(r.value().row_span(0).begin(), r.cols(), out.row_span(i).begin());
    }
    return make_var(std::move(out), op_tag::broadcast_rows, {r}, [](const Var &, const Var &g) {
        return std::vector<Var>{sum_rows(g)};
    });
}

inline Var broadcast_cols(const Var &c, std::size_t cols) {
    if (c.cols() != 1) {
        throw dimension_error("broadcast_cols: expected a column vector, got " + c.value().shape());
    }
    Matrix out{c.rows(), cols};
    for (std::size_t i = 0; i < c.rows(); ++i) {
        std::fill_n(out.row_span(i).begin(), cols, c.value()(i, 0));
    }
    return make_var(std::move(out), op_tag::broadcast_cols, {c}, [](const Var &, const Var &g) {
        return std::vector<Var>{sum_cols(g)};
    });
}

namespace detail {

inline Matrix row_softmax(const Matrix &z) {
    Matrix out{z.rows(), z.cols()};
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto in_row = z.row_span(i);
        auto out_row = out.row_span(i);
        const double top = *std::max_element(in_row.begin(), in_row.end());
        double total = 0.0;
        for (std::size_t j = 0; j < in_row.size(); ++j) {
            out_row[j] = std::exp(in_row[j] - top);
            total += out_row[j];
        }
        for (double &v : out_row) {
            v /= total;
        }
    }
    return out;
}

}  // namespace detail

inline Var softmax(const Var &logits) {
    if (logits.cols() == 0) {
        throw dimension_error("softmax: no classes");
    }
    const std::size_t k = logits.cols();
    return make_var(detail::row_softmax(logits.value()), op_tag::softmax, {logits}, [k](const Var &self, const Var &g) {
        const Var weighted = mul(g, self);
        return std::vector<Var>{sub(weighted, mul(self, broadcast_cols(sum_cols(weighted), k)))};
    });
}

/// Mean negative log-likelihood of integer labels under row-wise softmax.
inline Var softmax_cross_entropy(const Var &logits, std::span<const std::size_t> labels) {
    const std::size_t n = logits.rows();
    const std::size_t k = logits.cols();
    if (labels.size() != n || n == 0) {
        throw dimension_error("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " + logits.value().shape() + " logits");
    }
    Matrix one_hot{n, k};
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= k) {
            throw contract_error("softmax_cross_entropy: label " + std::to_string(labels[i]) + " outside " + std::to_string(k) + " classes");
        }
        one_hot(i, labels[i]) = 1.0;
        auto row = logits.value().row_span(i);
        const double top = *std::max_element(row.begin(), row.end());
        double acc = 0.0;
        for (double v : row) {
            acc += std::exp(v - top);
        }
        total += top + std::log(acc) - row[labels[i]];
    }
    const double inv = 1.0 / static_cast<double>(n);
    return make_var(Matrix{1, 1, total * inv}, op_tag::softmax_cross_entropy, {logits},
                    [logits, target = Var::constant(std::move(one_hot)), n, k, inv](const Var &, const Var &g) {
                        return std::vector<Var>{scale(mul(broadcast_scalar(g, n, k), sub(softmax(logits), target)), inv)};
                    });
}

// --- reverse sweep -----------------------------------------------------------

namespace detail {

// Post-order over the nodes that require gradients.
inline std::vector<Var> topological_order(const Var &root) {
    std::vector<Var> order;
    std::unordered_set<const node *> visited{root.id()};
    std::vector<std::pair<Var, std::size_t>> stack{{root, 0}};
    while (!stack.empty()) {
        auto &[current, next_parent] = stack.back();
        const auto &parents = current.parents();
        if (next_parent < parents.size()) {
            const Var p = parents[next_parent++];
            if (p.requires_grad() && visited.insert(p.id()).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(current);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace detail

/// Gradients of a scalar root with respect to each entry of `wrt`.
///
/// With create_graph the gradients are differentiable graph nodes; otherwise
/// they are constants. Entries not reachable from root get zeros.
inline std::vector<Var> grad(const Var &root, std::span<const Var> wrt, bool create_graph = false) {
    if (!root.valid() || root.value().size() != 1) {
        throw contract_error("grad: root must be a scalar node");
    }
    std::vector<Var> result;
    result.reserve(wrt.size());
    if (!root.requires_grad()) {
        for (const auto &w : wrt) {
            result.push_back(Var::constant(Matrix{w.rows(), w.cols()}));
        }
        return result;
    }

    const no_grad_guard recording{create_graph};
    const auto order = detail::topological_order(root);
    std::unordered_map<const detail::node *, Var> grads;
    grads.emplace(root.id(), Var::constant(Matrix{1, 1, 1.0}));

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const Var &self = *it;
        auto found = grads.find(self.id());
        if (found == grads.end() || !self.node_->backward) {
            continue;
        }
        const Var g = found->second;
        const auto parent_grads = self.node_->backward(self, g);
        const auto &parents = self.parents();
        for (std::size_t i = 0; i < parents.size(); ++i) {
            const Var &p = parents[i];
            if (!p.requires_grad()) {
                continue;
            }
            auto [slot, inserted] = grads.try_emplace(p.id(), parent_grads[i]);
            if (!inserted) {
                slot->second = add(slot->second, parent_grads[i]);
            }
        }
    }

    for (const auto &w : wrt) {
        auto found = grads.find(w.id());
        result.push_back(found != grads.end() ? found->second : Var::constant(Matrix{w.rows(), w.cols()}));
    }
    return result;
}

/// Accumulates d root / d p into each parameter's gradient slot.
inline void backward(const Var &root, std::span<const Var> params) {
    const auto gs = grad(root, params, false);
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i].node_->grad = params[i].node_->grad + gs[i].value();
    }
}

/// Gradient values only, as plain matrices.
inline std::vector<Matrix> gradients(const Var &root, std::span<const Var> wrt) {
    std::vector<Matrix> out;
    for (auto &g : grad(root, wrt, false)) {
        out.push_back(g.value());
    }
    return out;
}

}  // namespace ozsl::ad

#endif  // OZSL_AUTODIFF_HPP
