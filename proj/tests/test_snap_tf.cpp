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

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "snapdoa/dataset.hpp"
#include "snapdoa/snap_tf.hpp"

using namespace snapdoa;

namespace {

const ArrayGeometry kMra5 = ArrayGeometry::preset("mra5");

SnapTfConfig small_config() {
    SnapTfConfig c;
    c.l = 2;
    c.d_model = c.d_attn = 12;
    c.d_ff = 24;
    c.hidden_out = 16;
    c.k_max = 4;
    return c;
}

CMat random_snapshots(int m, int t, std::uint64_t seed) {
    ScenarioSpec spec;
    spec.k = 3;
    return draw_batch(ArrayGeometry::preset(m == 5 ? "mra5" : "ula" + std::to_string(m)), spec, t, 10.0, seed).y;
}

std::vector<Record> make_records(int n, int k, int t, double snr, std::uint64_t seed) {
    ScenarioSpec spec;
    spec.k = k;
    std::vector<Record> out;
    for (int i = 0; i < n; ++i) out.push_back(to_record(draw_batch(kMra5, spec, t, snr, derive_seed(seed, {std::uint64_t(i)}))));
    return out;
}

std::string checkpoint_bytes(const SnapTfModel& m) {
    std::ostringstream os;
    write_checkpoint(os, m);
    return os.str();
}

double max_rel(const RVec& a, const RVec& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

}  // namespace

TEST(SnapTf, ParameterCountBand) {
    SnapTfConfig c;  // l=3, d=96, d_ff=384, hidden 200, k_max 9, m 5
    const long n = parameter_count(c);
    EXPECT_EQ(n, 328985);
    EXPECT_LE(std::abs(n - 356000.0) / 356000.0, 0.20);
    EXPECT_EQ(init_model(c, 1).parameter_count(), n);

    SnapTfConfig big = c;
    big.m = 14;
    EXPECT_EQ(parameter_count(big) - n, (28 - 10) * 96);
}

TEST(SnapTf, InitDeterministicAndGlorot) {
    const auto a = init_model(small_config(), 7);
    const auto b = init_model(small_config(), 7);
    const auto c = init_model(small_config(), 8);
    EXPECT_EQ(checkpoint_bytes(a), checkpoint_bytes(b));
    EXPECT_NE(checkpoint_bytes(a), checkpoint_bytes(c));
    for (const auto& p : a.params) {
        if (p.name.find("gain") != std::string::npos) {
            EXPECT_TRUE(p.value.isOnes());
        } else if (p.value.cols() == 1) {
            EXPECT_TRUE(p.value.isZero()) << p.name;
        } else {
            const double bound = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
            EXPECT_LE(p.value.cwiseAbs().maxCoeff(), bound) << p.name;
        }
    }
    SnapTfConfig bad = small_config();
    bad.d_ff = 0;
    EXPECT_THROW(init_model(bad, 1), ConfigError);
}

TEST(SnapTf, PermutationInvarianceAtInit) {
    const auto model = init_model(SnapTfConfig{}, 3);
    Rng rng(4);
    for (int t : {10, 50, 100}) {
        const CMat y = random_snapshots(5, t, 100 + t);
        const RVec base = forward_raw(model, y);
        std::vector<int> perm(static_cast<std::size_t>(t));
        std::iota(perm.begin(), perm.end(), 0);
        for (int trial = 0; trial < 50; ++trial) {
            std::shuffle(perm.begin(), perm.end(), rng);
            CMat yp(5, t);
            for (int c = 0; c < t; ++c) yp.col(c) = y.col(perm[static_cast<std::size_t>(c)]);
            EXPECT_LE(max_rel(forward_raw(model, yp), base), 1e-9);
        }
    }
}

TEST(SnapTf, AnySnapshotCount) {
    const auto model = init_model(small_config(), 5);
    for (int t : {1, 10, 50, 100}) {
        const auto est = forward(model, random_snapshots(5, t, 9), 3);
        EXPECT_EQ(est.k(), 3);
        EXPECT_TRUE(std::is_sorted(est.thetas.begin(), est.thetas.end()));
    }
}

TEST(SnapTf, DuplicatedSnapshots) {
    const auto model = init_model(SnapTfConfig{}, 6);
    const CMat y = random_snapshots(5, 20, 10);
    CMat yy(5, 40);
    yy << y, y;
    EXPECT_LE(max_rel(forward_raw(model, yy), forward_raw(model, y)), 1e-9);
}

TEST(SnapTf, ForwardErrors) {
    const auto model = init_model(small_config(), 1);
    const CMat y = random_snapshots(5, 8, 1);
    EXPECT_THROW(forward(model, y, 0), DomainError);
    EXPECT_THROW(forward(model, y, 5), DomainError);
    EXPECT_THROW(forward(model, CMat(5, 0), 1), DomainError);
    EXPECT_THROW(forward(model, random_snapshots(6, 8, 1), 1), MismatchError);
}

TEST(SnapTf, BatchedGraphMatchesSingle) {
    const auto model = init_model(small_config(), 2);
    const auto recs = make_records(3, 2, 7, 5.0, 11);
    RMat tokens(10, 21);
    for (int i = 0; i < 3; ++i) tokens.middleCols(i * 7, 7) = tokens_from_snapshots(recs[static_cast<std::size_t>(i)].y);
    nn::Tape tape;
    const RMat out = forward_graph<double>(tape, model.config, leaves(model, false), tokens, 3).value();
    for (int i = 0; i < 3; ++i)
        EXPECT_LT((out.col(i) - forward_raw(model, recs[static_cast<std::size_t>(i)].y)).norm(), 1e-12);
}

TEST(SnapTf, LossExamples) {
    const RVec lab = make_label({2.0, 0.5, 1.0}, 9);
    EXPECT_EQ(lab(0), 0.5);
    EXPECT_EQ(lab(2), 2.0);
    EXPECT_EQ(lab(8), 0.0);
    EXPECT_EQ(loss(lab, lab), 0.0);
    EXPECT_NEAR(loss(RVec(lab.array() + 0.3), lab), 0.09, 1e-15);
    RVec pred = lab;
    pred(0) += 0.1;
    pred(1) += 0.2;
    pred(2) -= 0.2;
    EXPECT_NEAR(loss(pred, lab), 0.01, 1e-15);
    EXPECT_THROW(loss(pred, RVec::Zero(8)), ShapeError);
    EXPECT_THROW(make_label({1, 2, 3}, 2), DomainError);
}

TEST(SnapTf, ModelGradientCheck) {
    // Finite differences through the full model on a handful of entries.
    SnapTfConfig c = small_config();
    c.l = 1;
    const auto model = init_model(c, 21);
    const auto recs = make_records(2, 2, 4, 10.0, 5);
    std::vector<std::size_t> idx{0, 1};
    TrainConfig tc;
    const auto res = detail::run_chunk(model, recs, idx, tc, 1.0, true);
    Rng rng(3);
    const double h = 1e-5;
    for (std::size_t p = 0; p < model.params.size(); ++p) {
        std::uniform_int_distribution<Eigen::Index> pick(0, model.params[p].value.size() - 1);
        for (int trial = 0; trial < 3; ++trial) {
            const Eigen::Index e = pick(rng);
            SnapTfModel plus = model, minus = model;
            plus.params[p].value(e) += h;
            minus.params[p].value(e) -= h;
            const double num = (detail::run_chunk(plus, recs, idx, tc, 1.0, false).weighted_loss -
                                detail::run_chunk(minus, recs, idx, tc, 1.0, false).weighted_loss) /
                               (2 * h);
            const double ana = res.grads[p](e);
            EXPECT_LE(std::abs(ana - num), 1e-4 * std::max({std::abs(ana), std::abs(num), 1e-6}))
                << model.params[p].name << "[" << e << "]";
        }
    }
}

TEST(SnapTf, CheckpointRoundTrip) {
    const auto model = init_model(small_config(), 9);
    const auto path = (std::filesystem::temp_directory_path() / "snapdoa_test_ckpt.bin").string();
    save_checkpoint(path, model);
    const auto back = load_checkpoint(path);
    EXPECT_EQ(back.config, model.config);
    EXPECT_EQ(checkpoint_bytes(back), checkpoint_bytes(model));
    {
        std::ifstream is(path, std::ios::binary);
        char magic[8];
        is.read(magic, 8);
        EXPECT_EQ(std::string(magic, 8), "SNAPTF01");
    }
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    EXPECT_THROW(load_checkpoint(path), IoError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(SnapTf, ZeroLearningRateLeavesModel) {
    auto model = init_model(small_config(), 12);
    const std::string before = checkpoint_bytes(model);
    TrainConfig tc;
    tc.lr_max = 0.0;
    tc.epochs = 2;
    tc.batch_size = 16;
    train(model, make_records(40, 3, 10, 10.0, 1), {}, tc);
    EXPECT_EQ(checkpoint_bytes(model), before);
}

TEST(SnapTf, TrainingDeterministicAcrossThreads) {
    const auto data = make_records(60, 3, 10, 10.0, 2);
    std::vector<std::string> out;
    for (int threads : {1, 3, 1}) {
        auto model = init_model(small_config(), 13);
        TrainConfig tc;
        tc.epochs = 2;
        tc.batch_size = 20;
        tc.micro_batch = 7;
        tc.optimizer = nn::OptimizerKind::adam;
        tc.threads = threads;
        tc.seed = 99;
        train(model, data, {}, tc);
        out.push_back(checkpoint_bytes(model));
    }
    EXPECT_EQ(out[0], out[1]);
    EXPECT_EQ(out[0], out[2]);
}

TEST(SnapTf, ResumeMatchesUninterrupted) {
    const auto data = make_records(50, 3, 10, 10.0, 4);
    TrainConfig tc;
    tc.epochs = 4;
    tc.batch_size = 16;
    tc.optimizer = nn::OptimizerKind::adam;
    tc.seed = 5;

    auto full = init_model(small_config(), 14);
    train(full, data, {}, tc);

    auto part = init_model(small_config(), 14);
    TrainState st{0, nn::Optimizer(tc.optimizer)};
    TrainConfig first = tc;
    first.stop_after = 2;
    train(part, data, {}, first, st);
    EXPECT_EQ(st.epochs_done, 2);
    const auto path = (std::filesystem::temp_directory_path() / "snapdoa_test_state.bin").string();
    save_train_state(path, st);
    TrainState loaded = load_train_state(path);
    std::filesystem::remove(path);
    const auto curve = train(part, data, {}, tc, loaded);
    ASSERT_EQ(curve.size(), 2U);
    EXPECT_EQ(curve.front().epoch, 3);
    EXPECT_EQ(checkpoint_bytes(part), checkpoint_bytes(full));
}

TEST(SnapTf, TrainingSmoke) {
    // 1e4 records, K=3, 16QAM, 10 dB, 5 epochs: loss at least halves.
    const auto data = make_records(10000, 3, 16, 10.0, 6);
    SnapTfConfig c = small_config();
    c.d_model = c.d_attn = 16;
    c.d_ff = 32;
    auto model = init_model(c, 15);
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 128;
    tc.optimizer = nn::OptimizerKind::adam;
    tc.threads = resolve_threads(0);
    const double initial = dataset_loss(model, data, tc);
    const auto curve = train(model, data, {}, tc);
    EXPECT_LE(curve.back().train_loss, 0.5 * initial) << "initial " << initial;
    EXPECT_LE(dataset_loss(model, data, tc), 0.5 * initial);
}

TEST(SnapTf, MaskedLossIgnoresPadding) {
    const auto model = init_model(small_config(), 16);
    const auto recs = make_records(4, 1, 6, 10.0, 7);
    std::vector<std::size_t> idx{0, 1, 2, 3};
    TrainConfig tc;
    tc.loss_mask = true;
    double manual = 0.0;
    for (const auto& r : recs) {
        const double d = forward_raw(model, r.y)(0) - r.doas[0];
        manual += d * d;
    }
    EXPECT_NEAR(detail::run_chunk(model, recs, idx, tc, 1.0, false).weighted_loss, manual / 4, 1e-12);
}

TEST(SnapTf, TrainRejectsBadData) {
    auto model = init_model(small_config(), 1);
    TrainConfig tc;
    EXPECT_THROW(train(model, {}, {}, tc), DomainError);
    EXPECT_THROW(train(model, make_records(3, 5, 4, 0.0, 1), {}, tc), MismatchError);
    EXPECT_EQ(layers_for_order(3), 2);
    EXPECT_EQ(layers_for_order(7), 3);
}
