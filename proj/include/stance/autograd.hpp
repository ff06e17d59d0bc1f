#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

/// Minimal tape-based reverse-mode differentiation over dense double matrices. A Tape records
/// one computation; `backward` propagates from a scalar node and accumulates into the `grad`
/// of every Parameter that took part. Tapes are single-use and not thread-safe; Parameters
/// are shared state and must only be touched by one training step at a time.
namespace stance::ag {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
    [[nodiscard]] Eigen::Index size() const { return value.size(); }
};

class Tape;

/// Handle to a node of a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    [[nodiscard]] const Matrix& value() const;
    [[nodiscard]] Tape& tape() const { return *tape_; }
    [[nodiscard]] std::size_t id() const { return id_; }
    [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
    [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
    [[nodiscard]] double scalar() const { return value()(0, 0); }
    [[nodiscard]] bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_{nullptr};
    std::size_t id_{0};
};

class Tape {
public:
    using Backward = std::function<void(Tape&, const Matrix& upstream)>;

    Tape() { nodes_.reserve(256); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value) { return push(std::move(value), nullptr); }

    /// Leaf bound to a parameter; its gradient is added to `p.grad` during backward.
    Var param(Parameter& p) {
        auto* target = &p;
        return push(p.value, [target](Tape&, const Matrix& g) { target->grad += g; });
    }

    Var push(Matrix value, Backward backward) {
        nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward)});
        return Var(this, nodes_.size() - 1);
    }

    [[nodiscard]] const Matrix& value(std::size_t id) const { return nodes_[id].value; }

    /// Adds `g` to the gradient of node `id`.
    void accumulate(std::size_t id, const Matrix& g) {
        auto& node = nodes_[id];
        if (node.grad.size() == 0) {
            node.grad = g;
        } else {
            node.grad += g;
        }
    }

    /// Back-propagates from a 1x1 node with upstream gradient `seed`.
    void backward(Var root, double seed = 1.0) {
        if (root.rows() != 1 || root.cols() != 1) {
            throw InvalidArgument("backward needs a scalar root");
        }
        accumulate(root.id(), Matrix::Constant(1, 1, seed));
        for (std::size_t i = root.id() + 1; i-- > 0;) {
            auto& node = nodes_[i];
            if (node.grad.size() == 0 || !node.backward) {
                continue;
            }
            const Matrix g = std::move(node.grad);
            node.grad = Matrix();
            node.backward(*this, g);
        }
    }

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Backward backward;
    };
    std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

// ---- elementwise and linear ops ------------------------------------------------------------

inline Var add(Var a, Var b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidArgument("add: shape mismatch");
    }
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(a.value() + b.value(), [ia, ib](Tape& t, const Matrix& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

inline Var sub(Var a, Var b) {
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(a.value() - b.value(), [ia, ib](Tape& t, const Matrix& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, -g);
    });
}

inline Var scale(Var a, double s) {
    const auto ia = a.id();
    return a.tape().push(a.value() * s, [ia, s](Tape& t, const Matrix& g) { t.accumulate(ia, g * s); });
}

/// Adds a 1 x d row to every row of `a`.
inline Var add_row(Var a, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw InvalidArgument("add_row: bias must be 1 x cols");
    }
    const auto ia = a.id(), ir = row.id();
    Matrix out = a.value().rowwise() + row.value().row(0);
    return a.tape().push(std::move(out), [ia, ir](Tape& t, const Matrix& g) {
        t.accumulate(ia, g);
        t.accumulate(ir, g.colwise().sum());
    });
}

inline Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) {
        throw InvalidArgument("matmul: inner dimensions differ");
    }
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(a.value() * b.value(), [ia, ib](Tape& t, const Matrix& g) {
        t.accumulate(ia, g * t.value(ib).transpose());
        t.accumulate(ib, t.value(ia).transpose() * g);
    });
}

/// a * b^T
inline Var matmul_nt(Var a, Var b) {
    if (a.cols() != b.cols()) {
        throw InvalidArgument("matmul_nt: column counts differ");
    }
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(a.value() * b.value().transpose(), [ia, ib](Tape& t, const Matrix& g) {
        t.accumulate(ia, g * t.value(ib));
        t.accumulate(ib, g.transpose() * t.value(ia));
    });
}

inline Var tanh(Var a) {
    const auto ia = a.id();
    Matrix out = a.value().array().tanh().matrix();
    return a.tape().push(out, [ia, out](Tape& t, const Matrix& g) {
        t.accumulate(ia, (g.array() * (1.0 - out.array().square())).matrix());
    });
}

/// GELU, tanh approximation.
inline Var gelu(Var a) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    const auto ia = a.id();
    const Matrix& x = a.value();
    const Eigen::ArrayXXd inner = c * (x.array() + 0.044715 * x.array().cube());
    const Eigen::ArrayXXd th = inner.tanh();
    Matrix out = (0.5 * x.array() * (1.0 + th)).matrix();
    Eigen::ArrayXXd deriv =
        0.5 * (1.0 + th) + 0.5 * x.array() * (1.0 - th.square()) * c * (1.0 + 3.0 * 0.044715 * x.array().square());
    return a.tape().push(std::move(out), [ia, deriv = std::move(deriv)](Tape& t, const Matrix& g) {
        t.accumulate(ia, (g.array() * deriv).matrix());
    });
}

/// Row `i` of `a` as a 1 x cols node.
inline Var row(Var a, Eigen::Index i) {
    const auto ia = a.id();
    const auto rows = a.rows(), cols = a.cols();
    return a.tape().push(a.value().row(i), [ia, i, rows, cols](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(rows, cols);
        full.row(i) = g.row(0);
        t.accumulate(ia, full);
    });
}

/// Columns [start, start + count) of `a`.
inline Var cols(Var a, Eigen::Index start, Eigen::Index count) {
    const auto ia = a.id();
    const auto rows = a.rows(), total = a.cols();
    return a.tape().push(a.value().middleCols(start, count), [ia, start, count, rows, total](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(rows, total);
        full.middleCols(start, count) = g;
        t.accumulate(ia, full);
    });
}

inline Var hconcat(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw InvalidArgument("hconcat of nothing");
    }
    Eigen::Index total = 0;
    for (const auto& p : parts) {
        total += p.cols();
    }
    Matrix out(parts.front().rows(), total);
    std::vector<std::pair<std::size_t, Eigen::Index>> spans;
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
        out.middleCols(offset, p.cols()) = p.value();
        spans.emplace_back(p.id(), offset);
        offset += p.cols();
    }
    return parts.front().tape().push(std::move(out), [spans](Tape& t, const Matrix& g) {
        for (const auto& [id, start] : spans) {
            t.accumulate(id, g.middleCols(start, t.value(id).cols()));
        }
    });
}

/// Softmax over each row.
inline Var softmax_rows(Var a) {
    const auto ia = a.id();
    Matrix out = a.value();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double mx = out.row(r).maxCoeff();
        out.row(r) = (out.row(r).array() - mx).exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    return a.tape().push(out, [ia, out](Tape& t, const Matrix& g) {
        Matrix dx(out.rows(), out.cols());
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            const double dot = g.row(r).dot(out.row(r));
            dx.row(r) = (out.row(r).array() * (g.row(r).array() - dot)).matrix();
        }
        t.accumulate(ia, dx);
    });
}

/// Layer normalisation of each row with learned gain and bias (both 1 x d).
inline Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
    const auto ix = x.id(), ig = gain.id(), ib = bias.id();
    const Matrix& in = x.value();
    const Eigen::Index n = in.rows(), d = in.cols();
    Matrix xhat(n, d);
    Eigen::VectorXd inv_std(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double mean = in.row(r).mean();
        const double var = (in.row(r).array() - mean).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (in.row(r).array() - mean) * inv_std(r);
    }
    Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
    return x.tape().push(std::move(out), [ix, ig, ib, xhat, inv_std](Tape& t, const Matrix& g) {
        const Matrix& gamma = t.value(ig);
        t.accumulate(ig, (g.array() * xhat.array()).colwise().sum().matrix());
        t.accumulate(ib, g.colwise().sum());
        const Matrix dxhat = (g.array().rowwise() * gamma.row(0).array()).matrix();
        const auto d = static_cast<double>(xhat.cols());
        Matrix dx(xhat.rows(), xhat.cols());
        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
            const double s1 = dxhat.row(r).sum();
            const double s2 = dxhat.row(r).dot(xhat.row(r));
            dx.row(r) = (inv_std(r) / d) * (d * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2).matrix();
        }
        t.accumulate(ix, dx);
    });
}

/// Rows of an embedding table selected by `ids`; gradients are scattered straight into the
/// parameter.
inline Var embedding(Tape& tape, Parameter& table, std::span<const int> ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), table.value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
    }
    auto* target = &table;
    std::vector<int> copy(ids.begin(), ids.end());
    return tape.push(std::move(out), [target, copy = std::move(copy)](Tape&, const Matrix& g) {
        for (std::size_t i = 0; i < copy.size(); ++i) {
            target->grad.row(copy[i]) += g.row(static_cast<Eigen::Index>(i));
        }
    });
}

/// Identity on the forward pass; multiplies the upstream gradient by -coefficient on the way
/// back (gradient reversal).
inline Var reverse_gradient(Var a, double coefficient = 1.0) {
    const auto ia = a.id();
    return a.tape().push(a.value(), [ia, coefficient](Tape& t, const Matrix& g) { t.accumulate(ia, -coefficient * g); });
}

/// Blocks gradient flow.
inline Var detach(Var a) { return a.tape().constant(a.value()); }

// ---- probability ops ------------------------------------------------------------------------

/// Log-softmax of a 1 x M row restricted to `mask`; masked-out entries are -inf and receive no
/// gradient.
inline Var masked_log_softmax(Var logits, const std::vector<bool>& mask) {
    if (logits.rows() != 1 || static_cast<std::size_t>(logits.cols()) != mask.size()) {
        throw InvalidArgument("masked_log_softmax: logits must be 1 x mask size");
    }
    const Matrix& z = logits.value();
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
        throw InvalidArgument("mask has no visible label");
    }
    // Non-finite visible logits propagate as NaN so callers can detect divergence.
    double mx = kNegInf;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j]) {
            const double v = z(0, static_cast<Eigen::Index>(j));
            mx = std::isfinite(v) ? std::max(mx, v) : std::numeric_limits<double>::quiet_NaN();
            if (std::isnan(mx)) {
                break;
            }
        }
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j]) {
            sum += std::exp(z(0, static_cast<Eigen::Index>(j)) - mx);
        }
    }
    const double lse = mx + std::log(sum);
    Matrix out(1, z.cols());
    Matrix probs = Matrix::Zero(1, z.cols());
    for (std::size_t j = 0; j < mask.size(); ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        if (mask[j]) {
            out(0, c) = z(0, c) - lse;
            probs(0, c) = std::exp(out(0, c));
        } else {
            out(0, c) = kNegInf;
        }
    }
    const auto il = logits.id();
    return logits.tape().push(std::move(out), [il, probs, mask](Tape& t, const Matrix& g) {
        double total = 0.0;
        for (std::size_t j = 0; j < mask.size(); ++j) {
            if (mask[j]) {
                total += g(0, static_cast<Eigen::Index>(j));
            }
        }
        Matrix dz = Matrix::Zero(1, probs.cols());
        for (std::size_t j = 0; j < mask.size(); ++j) {
            if (mask[j]) {
                const auto c = static_cast<Eigen::Index>(j);
                dz(0, c) = g(0, c) - probs(0, c) * total;
            }
        }
        t.accumulate(il, dz);
    });
}

/// Entry (0, j) as a scalar node.
inline Var pick(Var a, Eigen::Index j) {
    const auto ia = a.id();
    const auto rows = a.rows(), cols_ = a.cols();
    return a.tape().push(Matrix::Constant(1, 1, a.value()(0, j)), [ia, j, rows, cols_](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(rows, cols_);
        full(0, j) = g(0, 0);
        t.accumulate(ia, full);
    });
}

/// log( (1/n) * sum_k exp(x_k) ) over scalar nodes, computed stably.
inline Var log_mean_exp(const std::vector<Var>& scalars) {
    if (scalars.empty()) {
        throw InvalidArgument("log_mean_exp of nothing");
    }
    double mx = kNegInf;
    for (const auto& s : scalars) {
        mx = std::max(mx, s.scalar());
    }
    if (mx == kNegInf) {
        return scalars.front().tape().constant(Matrix::Constant(1, 1, kNegInf));
    }
    std::vector<double> w;
    double sum = 0.0;
    for (const auto& s : scalars) {
        w.push_back(std::exp(s.scalar() - mx));
        sum += w.back();
    }
    const double value = mx + std::log(sum / static_cast<double>(scalars.size()));
    std::vector<std::size_t> ids;
    for (auto& wk : w) {
        wk /= sum;
    }
    for (const auto& s : scalars) {
        ids.push_back(s.id());
    }
    return scalars.front().tape().push(Matrix::Constant(1, 1, value), [ids, w](Tape& t, const Matrix& g) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
            t.accumulate(ids[k], Matrix::Constant(1, 1, g(0, 0) * w[k]));
        }
    });
}

/// -log softmax(logits)[target] for a 1 x C row.
inline Var cross_entropy(Var logits, Eigen::Index target) {
    const std::vector<bool> all(static_cast<std::size_t>(logits.cols()), true);
    return scale(pick(masked_log_softmax(logits, all), target), -1.0);
}

inline Var sum_scalars(const std::vector<Var>& scalars) {
    if (scalars.empty()) {
        throw InvalidArgument("sum of nothing");
    }
    Var acc = scalars.front();
    for (std::size_t i = 1; i < scalars.size(); ++i) {
        acc = add(acc, scalars[i]);
    }
    return acc;
}

// ---- initialisation ------------------------------------------------------------------------

inline Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = dist(rng);
    }
    return m;
}

}  // namespace stance::ag
