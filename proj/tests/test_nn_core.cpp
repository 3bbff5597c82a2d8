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


#include <gtest/gtest.h>

#include <functional>

#include "snapdoa/nn/optim.hpp"
#include "snapdoa/nn/tape.hpp"
#include "snapdoa/rng.hpp"

using namespace snapdoa;
using namespace snapdoa::nn;

namespace {

RMat randn(Rng& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> g;
    RMat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
    return m;
}

// Builds a scalar loss from the given leaf values on a fresh tape.
using Graph = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

// Largest norm-relative error between analytic and central-difference
// gradients over all inputs.
double gradcheck(const Graph& g, const std::vector<RMat>& inputs, double h = 1e-5) {
    std::vector<Tensor> leaves;
    for (const auto& v : inputs) leaves.emplace_back(v, true);
    Tape tape;
    tape.backward(g(tape, leaves));

    auto eval = [&](std::vector<RMat> vals) {
        std::vector<Tensor> ls;
        for (auto& v : vals) ls.emplace_back(std::move(v), false);
        Tape t;
        return g(t, ls).item();
    };
    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        RMat num(inputs[k].rows(), inputs[k].cols());
        for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
            auto plus = inputs, minus = inputs;
            plus[k](i) += h;
            minus[k](i) -= h;
            num(i) = (eval(plus) - eval(minus)) / (2 * h);
        }
        const RMat ana = leaves[k].has_grad() ? leaves[k].grad() : RMat::Zero(num.rows(), num.cols());
        const double scale = std::max({ana.norm(), num.norm(), 1e-8});
        worst = std::max(worst, (ana - num).norm() / scale);
    }
    return worst;
}

struct Shape {
    Eigen::Index r, c;
};

std::vector<Shape> shapes(Rng& rng) {
    std::uniform_int_distribution<Eigen::Index> d(1, 7);
    std::vector<Shape> out{{1, 1}, {3, 1}, {1, 4}};
    while (out.size() < 20) out.push_back({d(rng), d(rng)});
    return out;
}

constexpr double kTol = 1e-4;

}  // namespace

TEST(Primitives, ForwardExamples) {
    Tape t;
    EXPECT_TRUE(softmax_cols(t, Tensor(RMat::Zero(2, 1))).value().isApproxToConstant(0.5));

    RMat x(2, 1);
    x << 2, -3;
    const RMat r = relu(t, Tensor(x)).value();
    EXPECT_EQ(r(0), 2.0);
    EXPECT_EQ(r(1), 0.0);

    RMat col(2, 1);
    col << 1, -1;
    const RMat ln = layernorm_cols(t, Tensor(col), Tensor(RMat::Ones(2, 1)), Tensor(RMat::Zero(2, 1))).value();
    EXPECT_NEAR(ln(0), 1.0 / std::sqrt(1.0 + 1e-5), 1e-15);
    EXPECT_NEAR(ln(1), -1.0 / std::sqrt(1.0 + 1e-5), 1e-15);
    EXPECT_NEAR(ln(0), 0.999995, 1e-6);

    RMat m(2, 4);
    m << 1, 2, 3, 4, 5, 6, 7, 8;
    RMat want(2, 2);
    want << 1.5, 3.5, 5.5, 7.5;
    EXPECT_EQ(mean_cols(t, Tensor(m), 2).value(), want);
    EXPECT_EQ(scale(t, Tensor(m), 0.5).value(), 0.5 * m);
    EXPECT_EQ(t.size(), 0U);  // nothing requires grad
}

TEST(Primitives, ShapeErrors) {
    Tape t;
    EXPECT_THROW(matmul(t, Tensor(RMat::Ones(2, 3)), Tensor(RMat::Ones(2, 3))), ShapeError);
    EXPECT_THROW(add_broadcast(t, Tensor(RMat::Ones(2, 3)), Tensor(RMat::Ones(3, 1))), ShapeError);
    EXPECT_THROW(mean_cols(t, Tensor(RMat::Ones(2, 3)), 2), ShapeError);
    EXPECT_THROW(layernorm_cols(t, Tensor(RMat::Ones(2, 3)), Tensor(RMat::Ones(3, 1)), Tensor(RMat::Ones(2, 1))),
                 ShapeError);
    EXPECT_THROW(mse_loss(t, Tensor(RMat::Ones(2, 1)), RMat(RMat::Ones(3, 1))), ShapeError);
}

TEST(Backward, ReluSum) {
    RMat x(2, 1);
    x << 2, -3;
    Tensor tx(x, true);
    Tape t;
    t.backward(sum_all(t, relu(t, tx)));
    EXPECT_EQ(tx.grad()(0), 1.0);
    EXPECT_EQ(tx.grad()(1), 0.0);
}

TEST(Backward, MatmulSumHandExpansion) {
    RMat a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 5, 6, 7, 8;
    Tensor ta(a, true), tb(b, true);
    Tape t;
    t.backward(sum_all(t, matmul(t, ta, tb)));
    // sum_ij (AB)_ij = sum_ik A_ik * (row sums of B)_k
    RMat ga(2, 2), gb(2, 2);
    ga << 11, 15, 11, 15;
    gb << 4, 4, 6, 6;
    EXPECT_EQ(ta.grad(), ga);
    EXPECT_EQ(tb.grad(), gb);
}

TEST(Backward, AccumulatesOverUses) {
    Tensor x(RMat::Constant(1, 1, 3.0), true);
    Tape t;
    t.backward(sum_all(t, add_broadcast(t, x, x)));
    EXPECT_EQ(x.grad()(0), 2.0);
}

TEST(Backward, Errors) {
    Tape t;
    Tensor x(RMat::Ones(2, 2), true);
    const Tensor y = relu(t, x);
    EXPECT_THROW(t.backward(y), ShapeError);
    Tape empty;
    EXPECT_THROW(empty.backward(Tensor(RMat::Ones(1, 1), true)), DomainError);
}

TEST(GradCheck, Matmul) {
    Rng rng(1);
    std::uniform_int_distribution<Eigen::Index> d(1, 6);
    for (const auto& s : shapes(rng)) {
        const Eigen::Index inner = d(rng);
        const RMat lbl = randn(rng, s.r, s.c);
        EXPECT_LT(gradcheck([&](Tape& t, const auto& in) { return mse_loss(t, matmul(t, in[0], in[1]), lbl); },
                            {randn(rng, s.r, inner), randn(rng, inner, s.c)}),
                  kTol);
        EXPECT_LT(gradcheck([&](Tape& t, const auto& in) {
                      return mse_loss(t, matmul(t, in[0], in[1], {.trans_a = true}), lbl);
                  },
                            {randn(rng, inner, s.r), randn(rng, inner, s.c)}),
                  kTol);
    }
}

TEST(GradCheck, MatmulSegments) {
    Rng rng(2);
    for (int segs : {1, 2, 3}) {
        for (Eigen::Index w : {1, 2, 4}) {
            const Eigen::Index n = segs * w;
            // Attention-shaped: scores = K^T Q per block, then V * softmax per block.
            const RMat lbl = randn(rng, 3, n);
            auto g = [&](Tape& t, const std::vector<Tensor>& in) {
                const Tensor sc = matmul(t, in[0], in[1], {.trans_a = true, .segments = segs});
                const Tensor p = softmax_cols(t, sc);
                return mse_loss(t, matmul(t, in[2], p, {.segments = segs}), lbl);
            };
            EXPECT_LT(gradcheck(g, {randn(rng, 4, n), randn(rng, 4, n), randn(rng, 3, n)}), kTol);
        }
    }
}

TEST(GradCheck, AddBroadcast) {
    Rng rng(3);
    for (const auto& s : shapes(rng)) {
        const RMat lbl = randn(rng, s.r, s.c);
        EXPECT_LT(gradcheck([&](Tape& t, const auto& in) { return mse_loss(t, add_broadcast(t, in[0], in[1]), lbl); },
                            {randn(rng, s.r, s.c), randn(rng, s.r, 1)}),
                  kTol);
        EXPECT_LT(gradcheck([&](Tape& t, const auto& in) { return mse_loss(t, add_broadcast(t, in[0], in[1]), lbl); },
                            {randn(rng, s.r, s.c), randn(rng, s.r, s.c)}),
                  kTol);
    }
}

TEST(GradCheck, Relu) {
    Rng rng(4);
    for (const auto& s : shapes(rng)) {
        RMat x = randn(rng, s.r, s.c);
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (std::abs(x(i)) < 1e-3) x(i) = 0.5;  // keep clear of the kink
        const RMat lbl = randn(rng, s.r, s.c);
        EXPECT_LT(gradcheck([&](Tape& t, const auto& in) { return mse_loss(t, relu(t, in[0]), lbl); }, {x}), kTol);
    }
}

TEST(GradCheck, Scale) {
    Rng rng(5);
    for (const auto& s : shapes(rng)) {
        const RMat lbl = randn(rng, s.r, s.c);
        EXPECT_LT(gradcheck([&](Tape& t, const auto& in) { return mse_loss(t, scale(t, in[0], -0.37), lbl); },
                            {randn(rng, s.r, s.c)}),
                  kTol);
    }
}

TEST(GradCheck, SoftmaxCols) {
    Rng rng(6);
    for (const auto& s : shapes(rng)) {
        const RMat lbl = randn(rng, s.r, s.c);
        EXPECT_LT(gradcheck([&](Tape& t, const auto& in) { return mse_loss(t, softmax_cols(t, in[0]), lbl); },
                            {randn(rng, s.r, s.c)}),
                  kTol);
    }
}

TEST(GradCheck, LayerNormCols) {
    Rng rng(7);
    for (const auto& s : shapes(rng)) {
        if (s.r < 2) continue;  // one feature normalizes to a constant
        const RMat lbl = randn(rng, s.r, s.c);
        EXPECT_LT(gradcheck([&](Tape& t, const auto& in) { return mse_loss(t, layernorm_cols(t, in[0], in[1], in[2]), lbl); },
                            {randn(rng, s.r, s.c), randn(rng, s.r, 1), randn(rng, s.r, 1)}),
                  kTol);
    }
}

TEST(GradCheck, MeanCols) {
    Rng rng(8);
    for (const auto& s : shapes(rng)) {
        for (int segs : {1, 2}) {
            const Eigen::Index c = s.c * segs;
            const RMat lbl = randn(rng, s.r, segs);
            EXPECT_LT(gradcheck([&](Tape& t, const auto& in) { return mse_loss(t, mean_cols(t, in[0], segs), lbl); },
                                {randn(rng, s.r, c)}),
                      kTol);
        }
    }
}

TEST(GradCheck, MaskedMse) {
    Rng rng(9);
    for (const auto& s : shapes(rng)) {
        const RMat lbl = randn(rng, s.r, s.c);
        RMat mask = RMat::Ones(s.r, s.c);
        mask(0) = 0.0;
        if (mask.sum() == 0.0) continue;
        EXPECT_LT(gradcheck([&](Tape& t, const auto& in) { return mse_loss(t, in[0], lbl, mask); }, {randn(rng, s.r, s.c)}),
                  kTol);
    }
}

TEST(GradCheck, ComposedBlock) {
    Rng rng(10);
    for (Eigen::Index tcols : {1, 2, 5}) {
        const RMat lbl = randn(rng, 3, 1);
        auto g = [&](Tape& t, const std::vector<Tensor>& in) {
            const Tensor x = relu(t, add_broadcast(t, matmul(t, in[0], in[1]), in[2]));
            const Tensor z = layernorm_cols(t, add_broadcast(t, x, in[1]), in[3], in[4]);
            return mse_loss(t, mean_cols(t, scale(t, z, 2.0)), lbl);
        };
        EXPECT_LT(gradcheck(g, {randn(rng, 3, 3), randn(rng, 3, tcols), randn(rng, 3, 1), randn(rng, 3, 1),
                                randn(rng, 3, 1)}),
                  kTol);
    }
}

TEST(Primitives, InputsUntouched) {
    Rng rng(11);
    const RMat a = randn(rng, 3, 4), b = randn(rng, 4, 4), g = randn(rng, 3, 1);
    Tensor ta(a, true), tb(b, true), tg(g, true), tz(RMat::Zero(3, 1), true);
    Tape t;
    const Tensor y = layernorm_cols(t, softmax_cols(t, relu(t, matmul(t, ta, tb))), tg, tz);
    t.backward(mse_loss(t, mean_cols(t, scale(t, y, 3.0)), RMat(RMat::Zero(3, 1))));
    EXPECT_EQ(ta.value(), a);
    EXPECT_EQ(tb.value(), b);
    EXPECT_EQ(tg.value(), g);
}

TEST(Primitives, FloatMatchesDouble) {
    Rng rng(12);
    const RMat a = randn(rng, 4, 6), w = randn(rng, 4, 4);
    Tape t;
    const RMat d = softmax_cols(t, matmul(t, Tensor(w), Tensor(a))).value();
    const Mat<float> f =
        softmax_cols(t, matmul(t, BasicTensor<float>(w.cast<float>()), BasicTensor<float>(a.cast<float>()))).value();
    EXPECT_LT((f.cast<double>() - d).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(MseLoss, Examples) {
    Tape t;
    RMat lbl(9, 1);
    lbl << 0.5, 1.0, 2.0, 0, 0, 0, 0, 0, 0;
    EXPECT_EQ(mse_loss(t, Tensor(lbl), lbl).item(), 0.0);
    EXPECT_NEAR(mse_loss(t, Tensor(RMat(lbl.array() + 0.25)), lbl).item(), 0.0625, 1e-15);
    RMat pred = lbl;
    pred(0) += 0.1;
    pred(1) -= 0.2;
    pred(2) += 0.2;
    EXPECT_NEAR(mse_loss(t, Tensor(pred), lbl).item(), 0.01, 1e-15);
    RMat mask = RMat::Zero(9, 1);
    mask.topRows(3).setOnes();
    EXPECT_NEAR(mse_loss(t, Tensor(pred), lbl, mask).item(), 0.03, 1e-15);
}

TEST(OneCycle, Endpoints) {
    const long total = 1000;
    EXPECT_DOUBLE_EQ(onecycle_lr(0, total, 1e-3), 1e-3 / 25);
    EXPECT_NEAR(onecycle_lr(300, total, 1e-3), 1e-3, 1e-15);
    EXPECT_NEAR(onecycle_lr(total - 1, total, 1e-3), 1e-3 / 2500, 1e-9);
    EXPECT_THROW(onecycle_lr(total, total, 1e-3), DomainError);
    EXPECT_THROW(onecycle_lr(-1, total, 1e-3), DomainError);
    double prev = 0.0;
    for (long s = 0; s <= 300; ++s) {
        const double lr = onecycle_lr(s, total, 1e-3);
        EXPECT_GE(lr, prev);
        prev = lr;
    }
    for (long s = 301; s < total; ++s) {
        const double lr = onecycle_lr(s, total, 1e-3);
        EXPECT_LE(lr, prev);
        prev = lr;
    }
}

TEST(Sgd, Examples) {
    std::vector<Parameter> p{{"p", RMat::Constant(1, 1, 1.0), RMat::Constant(1, 1, 2.0)}};
    sgd_step(p, 0.1);
    EXPECT_DOUBLE_EQ(p[0].value(0), 0.8);
    EXPECT_EQ(p[0].grad.size(), 0);
    EXPECT_THROW(sgd_step(p, 0.1), DomainError);

    p[0].grad = RMat::Constant(1, 1, 5.0);
    sgd_step(p, 0.0);
    EXPECT_DOUBLE_EQ(p[0].value(0), 0.8);
}

TEST(Sgd, QuadraticBowl) {
    std::vector<Parameter> p{{"p", RMat::Constant(1, 1, 1.0), {}}};
    for (int i = 0; i < 100; ++i) {
        p[0].grad = 2.0 * p[0].value;
        sgd_step(p, 0.1);
    }
    EXPECT_LT(std::abs(p[0].value(0)), 1e-8);
    EXPECT_NEAR(p[0].value(0), std::pow(0.8, 100), 1e-20);
}

TEST(Optimizer, AdamAndMomentumDescend) {
    for (auto kind : {OptimizerKind::momentum, OptimizerKind::adam}) {
        Optimizer opt(kind);
        std::vector<Parameter> p{{"p", RMat::Constant(2, 1, 1.0), {}}};
        for (int i = 0; i < 500; ++i) {
            p[0].grad = 2.0 * p[0].value;
            opt.step(p, 0.01);
        }
        EXPECT_LT(p[0].value.norm(), 0.1) << to_string(kind);
        EXPECT_EQ(opt.steps(), 500);
    }
    EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::adam);
    EXPECT_THROW(parse_optimizer("lion"), ConfigError);
}
