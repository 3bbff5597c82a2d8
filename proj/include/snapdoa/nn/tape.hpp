// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The snapdoa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal reverse-mode differentiation over dense real matrices.
//
// Every value is a 2-D real matrix of scalar S (double or float). Column-wise primitives (softmax,
// layer norm, mean) treat each column as one token. Several independent
// token sets can share a matrix side by side; `segments` tells matmul and
// mean_cols how many equally sized column blocks there are, so a minibatch
// of records runs through one tape with block-diagonal attention.
//
// A Tape is single-threaded. Records are replayed in exact reverse order by
// backward(); gradients accumulate (+=) into every input that requires them.

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "snapdoa/core.hpp"

namespace snapdoa::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
struct Node {
    Mat<S> value;
    Mat<S> grad;  // allocated lazily, same shape as value
    bool requires_grad = false;

    Mat<S>& ensure_grad() {
        if (grad.size() == 0) grad = Mat<S>::Zero(value.rows(), value.cols());
        return grad;
    }
};

template <class S>
class BasicTensor {
public:
    using Scalar = S;
    using Matrix = Mat<S>;

    BasicTensor() = default;
    explicit BasicTensor(Matrix value, bool requires_grad = false)
        : node_(std::make_shared<Node<S>>(Node<S>{std::move(value), Matrix{}, requires_grad})) {}

    const Matrix& value() const { return node_->value; }
    const Matrix& grad() const { return node_->grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    bool has_grad() const { return node_->grad.size() != 0; }
    double item() const {
        if (node_->value.size() != 1) throw ShapeError("item() on non-scalar tensor");
        return static_cast<double>(node_->value(0, 0));
    }
    Node<S>& node() const { return *node_; }

private:
    std::shared_ptr<Node<S>> node_;
};

using Tensor = BasicTensor<double>;

class Tape {
public:
    void record(std::function<void()> back) { records_.push_back(std::move(back)); }
    std::size_t size() const { return records_.size(); }

    /// Seeds d(loss)/d(loss) = 1 and replays the tape backwards.
    template <class S>
    void backward(const BasicTensor<S>& loss) {
        if (loss.value().size() != 1) throw ShapeError("backward: loss must be a scalar");
        if (records_.empty()) throw DomainError("backward: empty tape");
        loss.node().ensure_grad().setConstant(S(1));
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
        records_.clear();
    }

private:
    std::vector<std::function<void()>> records_;
};

namespace detail {

template <class S>
bool any_grad(std::initializer_list<const BasicTensor<S>*> ts) {
    for (const auto* t : ts)
        if (t->requires_grad()) return true;
    return false;
}

template <class S>
BasicTensor<S> make_out(Mat<S> v, bool rg) { return BasicTensor<S>(std::move(v), rg); }

}  // namespace detail

struct MatmulOpts {
    bool trans_a = false;
    int segments = 1;
};

/// op(A) * B, optionally block-wise: with S segments the columns of A and B
/// are split into S equal blocks and block s of the result is op(A_s) B_s.
template <class S>
BasicTensor<S> matmul(Tape& tape, const BasicTensor<S>& a, const BasicTensor<S>& b, MatmulOpts opts = {}) {
    const int s = opts.segments;
    if (s < 1) throw ShapeError("matmul: segments must be >= 1");
    if (s == 1) {
        const Eigen::Index inner = opts.trans_a ? a.rows() : a.cols();
        if (inner != b.rows()) throw ShapeError("matmul: inner dimensions differ");
        Mat<S> out = opts.trans_a ? Mat<S>(a.value().transpose() * b.value()) : Mat<S>(a.value() * b.value());
        BasicTensor<S> c = detail::make_out<S>(std::move(out), detail::any_grad<S>({&a, &b}));
        if (c.requires_grad()) {
            tape.record([a, b, c, ta = opts.trans_a] {
                const Mat<S>& g = c.grad();
                if (g.size() == 0) return;
                if (a.requires_grad()) {
                    if (ta) a.node().ensure_grad().noalias() += b.value() * g.transpose();
                    else a.node().ensure_grad().noalias() += g * b.value().transpose();
                }
                if (b.requires_grad()) {
                    if (ta) b.node().ensure_grad().noalias() += a.value() * g;
                    else b.node().ensure_grad().noalias() += a.value().transpose() * g;
                }
            });
        }
        return c;
    }
    if (a.cols() % s != 0 || b.cols() % s != 0) throw ShapeError("matmul: columns not divisible by segments");
    const Eigen::Index ca = a.cols() / s, cb = b.cols() / s;
    const Eigen::Index inner = opts.trans_a ? a.rows() : ca;
    if (inner != b.rows()) throw ShapeError("matmul: inner dimensions differ");
    const Eigen::Index out_rows = opts.trans_a ? ca : a.rows();
    Mat<S> out(out_rows, cb * s);
    for (int k = 0; k < s; ++k) {
        auto ab = a.value().middleCols(k * ca, ca);
        auto bb = b.value().middleCols(k * cb, cb);
        if (opts.trans_a) out.middleCols(k * cb, cb).noalias() = ab.transpose() * bb;
        else out.middleCols(k * cb, cb).noalias() = ab * bb;
    }
    BasicTensor<S> c = detail::make_out<S>(std::move(out), detail::any_grad<S>({&a, &b}));
    if (c.requires_grad()) {
        tape.record([a, b, c, s, ca, cb, ta = opts.trans_a] {
            const Mat<S>& g = c.grad();
            if (g.size() == 0) return;
            for (int k = 0; k < s; ++k) {
                auto gb = g.middleCols(k * cb, cb);
                auto ab = a.value().middleCols(k * ca, ca);
                auto bb = b.value().middleCols(k * cb, cb);
                if (a.requires_grad()) {
                    auto da = a.node().ensure_grad().middleCols(k * ca, ca);
                    if (ta) da.noalias() += bb * gb.transpose();
                    else da.noalias() += gb * bb.transpose();
                }
                if (b.requires_grad()) {
                    auto db = b.node().ensure_grad().middleCols(k * cb, cb);
                    if (ta) db.noalias() += ab * gb;
                    else db.noalias() += ab.transpose() * gb;
                }
            }
        });
    }
    return c;
}

/// A + B where B has A's shape, or is a column vector broadcast over columns.
template <class S>
BasicTensor<S> add_broadcast(Tape& tape, const BasicTensor<S>& a, const BasicTensor<S>& b) {
    const bool column = b.cols() == 1 && a.cols() != 1;
    if (a.rows() != b.rows() || (!column && a.cols() != b.cols()))
        throw ShapeError("add_broadcast: incompatible shapes");
    Mat<S> out = a.value();
    if (column) out.colwise() += b.value().col(0);
    else out += b.value();
    BasicTensor<S> c = detail::make_out<S>(std::move(out), detail::any_grad<S>({&a, &b}));
    if (c.requires_grad()) {
        tape.record([a, b, c, column] {
            const Mat<S>& g = c.grad();
            if (g.size() == 0) return;
            if (a.requires_grad()) a.node().ensure_grad() += g;
            if (b.requires_grad()) {
                if (column) b.node().ensure_grad().col(0) += g.rowwise().sum();
                else b.node().ensure_grad() += g;
            }
        });
    }
    return c;
}

template <class S>
BasicTensor<S> relu(Tape& tape, const BasicTensor<S>& x) {
    BasicTensor<S> c = detail::make_out<S>(x.value().cwiseMax(S(0)), x.requires_grad());
    if (c.requires_grad()) {
        tape.record([x, c] {
            const Mat<S>& g = c.grad();
            if (g.size() == 0) return;
            x.node().ensure_grad() += (x.value().array() > S(0)).select(g, S(0));
        });
    }
    return c;
}

template <class S>
BasicTensor<S> scale(Tape& tape, const BasicTensor<S>& x, double factor) {
    BasicTensor<S> c = detail::make_out<S>(x.value() * static_cast<S>(factor), x.requires_grad());
    if (c.requires_grad()) {
        tape.record([x, c, factor] {
            if (c.grad().size() == 0) return;
            x.node().ensure_grad() += static_cast<S>(factor) * c.grad();
        });
    }
    return c;
}

/// Softmax of every column independently.
template <class S>
BasicTensor<S> softmax_cols(Tape& tape, const BasicTensor<S>& x) {
    Mat<S> y(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const S mx = x.value().col(j).maxCoeff();
        y.col(j) = (x.value().col(j).array() - mx).exp().matrix();
        y.col(j) /= y.col(j).sum();
    }
    BasicTensor<S> c = detail::make_out<S>(std::move(y), x.requires_grad());
    if (c.requires_grad()) {
        tape.record([x, c] {
            const Mat<S>& g = c.grad();
            if (g.size() == 0) return;
            const Mat<S>& yv = c.value();
            const Eigen::Matrix<S, 1, Eigen::Dynamic> dots = (yv.array() * g.array()).colwise().sum();
            x.node().ensure_grad().array() += yv.array() * (g.rowwise() - dots).array();
        });
    }
    return c;
}

inline constexpr double kLayerNormEps = 1e-5;

/// Per-column normalization to zero mean / unit population variance, then a
/// per-feature affine map: gain and bias are rows x 1.
template <class S>
BasicTensor<S> layernorm_cols(Tape& tape, const BasicTensor<S>& x, const BasicTensor<S>& gain, const BasicTensor<S>& bias,
                             double eps = kLayerNormEps) {
    if (gain.rows() != x.rows() || gain.cols() != 1 || bias.rows() != x.rows() || bias.cols() != 1)
        throw ShapeError("layernorm_cols: gain/bias must be rows x 1");
    const auto n = static_cast<S>(x.rows());
    const Eigen::Matrix<S, 1, Eigen::Dynamic> mean = x.value().colwise().mean();
    Mat<S> xhat = x.value().rowwise() - mean;
    const Eigen::Matrix<S, 1, Eigen::Dynamic> inv_std =
        ((xhat.array().square().colwise().sum() / n) + static_cast<S>(eps)).rsqrt().matrix();
    xhat.array().rowwise() *= inv_std.array();
    Mat<S> y = xhat;
    y.array().colwise() *= gain.value().col(0).array();
    y.colwise() += bias.value().col(0);
    BasicTensor<S> c = detail::make_out<S>(std::move(y), detail::any_grad<S>({&x, &gain, &bias}));
    if (c.requires_grad()) {
        tape.record([x, gain, bias, c, xhat = std::move(xhat), inv_std, n] {
            const Mat<S>& g = c.grad();
            if (g.size() == 0) return;
            if (gain.requires_grad()) gain.node().ensure_grad().col(0) += (g.array() * xhat.array()).rowwise().sum().matrix();
            if (bias.requires_grad()) bias.node().ensure_grad().col(0) += g.rowwise().sum();
            if (x.requires_grad()) {
                Mat<S> dxhat = g;
                dxhat.array().colwise() *= gain.value().col(0).array();
                const Eigen::Matrix<S, 1, Eigen::Dynamic> m1 = dxhat.colwise().sum() / n;
                const Eigen::Matrix<S, 1, Eigen::Dynamic> m2 = (dxhat.array() * xhat.array()).colwise().sum().matrix() / n;
                Mat<S> dx = dxhat.rowwise() - m1;
                dx.array() -= xhat.array().rowwise() * m2.array();
                dx.array().rowwise() *= inv_std.array();
                x.node().ensure_grad() += dx;
            }
        });
    }
    return c;
}

/// Mean over the columns of each of `segments` equal column blocks.
template <class S>
BasicTensor<S> mean_cols(Tape& tape, const BasicTensor<S>& x, int segments = 1) {
    if (segments < 1 || x.cols() % segments != 0) throw ShapeError("mean_cols: bad segment count");
    const Eigen::Index w = x.cols() / segments;
    if (w == 0) throw ShapeError("mean_cols: empty segment");
    Mat<S> out(x.rows(), segments);
    for (int s = 0; s < segments; ++s) out.col(s) = x.value().middleCols(s * w, w).rowwise().mean();
    BasicTensor<S> c = detail::make_out<S>(std::move(out), x.requires_grad());
    if (c.requires_grad()) {
        tape.record([x, c, segments, w] {
            const Mat<S>& g = c.grad();
            if (g.size() == 0) return;
            Mat<S>& dx = x.node().ensure_grad();
            for (int s = 0; s < segments; ++s)
                dx.middleCols(s * w, w).colwise() += g.col(s) / static_cast<S>(w);
        });
    }
    return c;
}

/// Mean of (pred - label)^2 * mask over all entries; mask may be empty (all ones).
/// With a mask the mean runs over the unmasked entries only.
template <class S>
BasicTensor<S> mse_loss(Tape& tape, const BasicTensor<S>& pred, const Mat<S>& label, const Mat<S>& mask = Mat<S>{}) {
    if (pred.rows() != label.rows() || pred.cols() != label.cols())
        throw ShapeError("mse_loss: prediction and label shapes differ");
    if (mask.size() != 0 && (mask.rows() != label.rows() || mask.cols() != label.cols()))
        throw ShapeError("mse_loss: mask shape differs");
    Mat<S> diff = pred.value() - label;
    if (mask.size() != 0) diff.array() *= mask.array();
    const S count = mask.size() != 0 ? mask.sum() : static_cast<S>(diff.size());
    if (count <= S(0)) throw ShapeError("mse_loss: nothing to average");
    Mat<S> out(1, 1);
    out(0, 0) = diff.squaredNorm() / count;
    BasicTensor<S> c = detail::make_out<S>(std::move(out), pred.requires_grad());
    if (c.requires_grad()) {
        tape.record([pred, c, diff = std::move(diff), count] {
            if (c.grad().size() == 0) return;
            pred.node().ensure_grad() += (S(2) * c.grad()(0, 0) / count) * diff;
        });
    }
    return c;
}

/// Sum of all entries (test helper for gradient checks).
template <class S>
BasicTensor<S> sum_all(Tape& tape, const BasicTensor<S>& x) {
    Mat<S> out(1, 1);
    out(0, 0) = x.value().sum();
    BasicTensor<S> c = detail::make_out<S>(std::move(out), x.requires_grad());
    if (c.requires_grad()) {
        tape.record([x, c] {
            if (c.grad().size() == 0) return;
            x.node().ensure_grad().array() += c.grad()(0, 0);
        });
    }
    return c;
}

}  // namespace snapdoa::nn
