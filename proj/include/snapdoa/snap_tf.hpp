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

// Snapshot transformer DOA estimator.
//
// Each snapshot y_t (complex, length m) becomes a real token [Re y_t; Im y_t]
// of length 2m, embedded to d_model. L single-head attention layers follow:
//
//   Z = LN(S + V softmax_cols(K^T Q / sqrt(d_attn)))
//   S = LN(Z + W2 relu(W1 Z + b1) + b2)
//
// with no positional information, so the layer stack is permutation
// equivariant in the snapshot axis. Global mean pooling over tokens and a
// two-layer head produce k_max angles; the first k are the estimate.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "snapdoa/core.hpp"
#include "snapdoa/dataset.hpp"
#include "snapdoa/nn/optim.hpp"
#include "snapdoa/nn/tape.hpp"
#include "snapdoa/parallel.hpp"
#include "snapdoa/rng.hpp"
#include "snapdoa/subspace.hpp"

namespace snapdoa {

struct SnapTfConfig {
    int l = 3;
    int d_model = 96;
    int d_attn = 96;
    int d_ff = 384;
    int hidden_out = 200;
    int k_max = 9;
    int m = 5;

    bool operator==(const SnapTfConfig&) const = default;

    void validate() const {
        for (int v : {l, d_model, d_attn, d_ff, hidden_out, k_max, m})
            if (v < 1) throw ConfigError("snap_tf config: all dimensions must be positive");
    }
};

/// Layers needed for interactions of order `order`: ceil(log2(order + 1)).
inline int layers_for_order(int order) {
    int l = 0;
    while ((1 << l) < order + 1) ++l;
    return l;
}

namespace detail {

struct Shape {
    std::string name;
    int rows;
    int cols;
    enum class Init { glorot, zero, one } init;
};

/// Parameter names and shapes in checkpoint order.
inline std::vector<Shape> parameter_layout(const SnapTfConfig& c) {
    using I = Shape::Init;
    std::vector<Shape> out;
    out.push_back({"embed.w", c.d_model, 2 * c.m, I::glorot});
    out.push_back({"embed.b", c.d_model, 1, I::zero});
    for (int l = 0; l < c.l; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        out.push_back({p + "wq", c.d_attn, c.d_model, I::glorot});
        out.push_back({p + "wk", c.d_attn, c.d_model, I::glorot});
        out.push_back({p + "wv", c.d_model, c.d_model, I::glorot});
        out.push_back({p + "ln1.gain", c.d_model, 1, I::one});
        out.push_back({p + "ln1.bias", c.d_model, 1, I::zero});
        out.push_back({p + "ff1.w", c.d_ff, c.d_model, I::glorot});
        out.push_back({p + "ff1.b", c.d_ff, 1, I::zero});
        out.push_back({p + "ff2.w", c.d_model, c.d_ff, I::glorot});
        out.push_back({p + "ff2.b", c.d_model, 1, I::zero});
        out.push_back({p + "ln2.gain", c.d_model, 1, I::one});
        out.push_back({p + "ln2.bias", c.d_model, 1, I::zero});
    }
    out.push_back({"head.w3", c.hidden_out, c.d_model, I::glorot});
    out.push_back({"head.b3", c.hidden_out, 1, I::zero});
    out.push_back({"head.w4", c.k_max, c.hidden_out, I::glorot});
    out.push_back({"head.b4", c.k_max, 1, I::zero});
    return out;
}

inline constexpr int kParamsPerLayer = 11;

}  // namespace detail

inline long parameter_count(const SnapTfConfig& c) {
    long n = 0;
    for (const auto& s : detail::parameter_layout(c)) n += static_cast<long>(s.rows) * s.cols;
    return n;
}

struct SnapTfModel {
    SnapTfConfig config;
    std::vector<nn::Parameter> params;  // parameter_layout order

    long parameter_count() const {
        long n = 0;
        for (const auto& p : params) n += static_cast<long>(p.value.size());
        return n;
    }
};

/// Glorot-uniform weights, zero biases, unit layer-norm gains.
inline SnapTfModel init_model(const SnapTfConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    SnapTfModel model{config, {}};
    for (const auto& s : detail::parameter_layout(config)) {
        RMat v(s.rows, s.cols);
        switch (s.init) {
            case detail::Shape::Init::zero: v.setZero(); break;
            case detail::Shape::Init::one: v.setOnes(); break;
            case detail::Shape::Init::glorot: {
                const double bound = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
                std::uniform_real_distribution<double> u(-bound, bound);
                for (Eigen::Index j = 0; j < v.cols(); ++j)
                    for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, j) = u(rng);
                break;
            }
        }
        model.params.push_back({s.name, std::move(v), RMat{}});
    }
    return model;
}

/// 2m x T real token matrix [Re Y; Im Y].
inline RMat tokens_from_snapshots(const CMat& y) {
    RMat s(2 * y.rows(), y.cols());
    s.topRows(y.rows()) = y.real();
    s.bottomRows(y.rows()) = y.imag();
    return s;
}

/// Builds the forward graph for `segments` records laid side by side in
/// `tokens` (2m x segments*T). Returns the k_max x segments head output.
template <class S>
nn::BasicTensor<S> forward_graph(nn::Tape& tape, const SnapTfConfig& c, const std::vector<nn::BasicTensor<S>>& w,
                                 const nn::Mat<S>& tokens, int segments) {
    using namespace nn;
    using Tensor = BasicTensor<S>;
    if (tokens.rows() != 2 * c.m) throw MismatchError("snap_tf: token width does not match 2m");
    if (segments < 1 || tokens.cols() % segments != 0 || tokens.cols() == 0)
        throw ShapeError("snap_tf: tokens must hold segments * T columns with T >= 1");
    const Tensor input(tokens);
    Tensor s = add_broadcast(tape, matmul(tape, w[0], input), w[1]);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(c.d_attn));
    for (int l = 0; l < c.l; ++l) {
        const auto* p = &w[static_cast<std::size_t>(2 + l * snapdoa::detail::kParamsPerLayer)];
        const Tensor q = matmul(tape, p[0], s);
        const Tensor k = matmul(tape, p[1], s);
        const Tensor v = matmul(tape, p[2], s);
        const Tensor scores = scale(tape, matmul(tape, k, q, {.trans_a = true, .segments = segments}), inv_sqrt);
        const Tensor attn = softmax_cols(tape, scores);
        const Tensor mixed = matmul(tape, v, attn, {.trans_a = false, .segments = segments});
        const Tensor z = layernorm_cols(tape, add_broadcast(tape, s, mixed), p[3], p[4]);
        const Tensor h = relu(tape, add_broadcast(tape, matmul(tape, p[5], z), p[6]));
        const Tensor f = add_broadcast(tape, matmul(tape, p[7], h), p[8]);
        s = layernorm_cols(tape, add_broadcast(tape, z, f), p[9], p[10]);
    }
    const auto* head = &w[static_cast<std::size_t>(2 + c.l * snapdoa::detail::kParamsPerLayer)];
    const Tensor pooled = mean_cols(tape, s, segments);
    const Tensor hidden = relu(tape, add_broadcast(tape, matmul(tape, head[0], pooled), head[1]));
    return add_broadcast(tape, matmul(tape, head[2], hidden), head[3]);
}

template <class S = double>
std::vector<nn::BasicTensor<S>> leaves(const SnapTfModel& model, bool requires_grad) {
    std::vector<nn::BasicTensor<S>> w;
    w.reserve(model.params.size());
    for (const auto& p : model.params) w.emplace_back(p.value.template cast<S>(), requires_grad);
    return w;
}

/// Raw k_max outputs for one snapshot matrix.
inline RVec forward_raw(const SnapTfModel& model, const CMat& y) {
    if (y.rows() != model.config.m) throw MismatchError("snap_tf: snapshot rows differ from model m");
    if (y.cols() < 1) throw DomainError("snap_tf: need at least one snapshot");
    nn::Tape tape;
    const nn::Tensor out = forward_graph<double>(tape, model.config, leaves(model, false), tokens_from_snapshots(y), 1);
    return out.value().col(0);
}

/// First k outputs, sorted ascending.
inline DoaEstimate forward(const SnapTfModel& model, const CMat& y, int k) {
    if (k < 1 || k > model.config.k_max) throw DomainError("snap_tf: k outside [1, k_max]");
    const RVec raw = forward_raw(model, y);
    std::vector<double> th(raw.data(), raw.data() + k);
    std::sort(th.begin(), th.end());
    return {std::move(th), "snap_tf"};
}

/// Label: sorted DOAs followed by zeros up to k_max.
inline RVec make_label(std::vector<double> doas, int k_max) {
    if (static_cast<int>(doas.size()) > k_max) throw DomainError("label: more sources than k_max");
    std::sort(doas.begin(), doas.end());
    RVec lab = RVec::Zero(k_max);
    for (std::size_t i = 0; i < doas.size(); ++i) lab(static_cast<Eigen::Index>(i)) = doas[i];
    return lab;
}

/// Mean squared error over all entries.
inline double loss(const RVec& pred, const RVec& label) {
    if (pred.size() != label.size()) throw ShapeError("loss: length mismatch");
    if (pred.size() == 0) throw ShapeError("loss: empty vectors");
    return (pred - label).squaredNorm() / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Checkpoints: "SNAPTF01", u32 x 7 (l, d_model, d_attn, d_ff, hidden_out,
// k_max, m), u32 parameter count, then per parameter in parameter_layout
// order: u16 name length, name bytes, u32 rows, u32 cols, f64 column-major.

inline constexpr std::array<char, 8> kCheckpointMagic = {'S', 'N', 'A', 'P', 'T', 'F', '0', '1'};

inline void write_checkpoint(std::ostream& os, const SnapTfModel& model) {
    os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    const auto& c = model.config;
    for (int v : {c.l, c.d_model, c.d_attn, c.d_ff, c.hidden_out, c.k_max, c.m}) io::put(os, static_cast<std::uint32_t>(v));
    io::put(os, static_cast<std::uint32_t>(model.params.size()));
    for (const auto& p : model.params) {
        io::put(os, static_cast<std::uint16_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        io::put(os, static_cast<std::uint32_t>(p.value.rows()));
        io::put(os, static_cast<std::uint32_t>(p.value.cols()));
        os.write(reinterpret_cast<const char*>(p.value.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
    }
}

inline void save_checkpoint(const std::string& path, const SnapTfModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_checkpoint(os, model);
    if (!os) throw IoError("write failed: " + path);
}

inline SnapTfConfig read_checkpoint_config(std::istream& is) {
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kCheckpointMagic) throw IoError("not a SNAPTF01 checkpoint");
    SnapTfConfig c;
    for (int* v : {&c.l, &c.d_model, &c.d_attn, &c.d_ff, &c.hidden_out, &c.k_max, &c.m})
        *v = static_cast<int>(io::get<std::uint32_t>(is));
    c.validate();
    return c;
}

inline SnapTfModel read_checkpoint(std::istream& is) {
    SnapTfModel model;
    model.config = read_checkpoint_config(is);
    const auto layout = detail::parameter_layout(model.config);
    const auto count = io::get<std::uint32_t>(is);
    if (count != layout.size()) throw IoError("checkpoint: parameter count does not match config");
    for (const auto& s : layout) {
        const auto len = io::get<std::uint16_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const auto rows = io::get<std::uint32_t>(is);
        const auto cols = io::get<std::uint32_t>(is);
        if (!is || name != s.name || rows != static_cast<std::uint32_t>(s.rows) || cols != static_cast<std::uint32_t>(s.cols))
            throw IoError("checkpoint: unexpected parameter " + name);
        RMat v(rows, cols);
        is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
        if (!is) throw IoError("checkpoint: truncated parameter " + name);
        model.params.push_back({s.name, std::move(v), RMat{}});
    }
    return model;
}

inline SnapTfModel load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    return read_checkpoint(is);
}

// ---------------------------------------------------------------------------
// Training.

enum class Precision { f64, f32 };

inline Precision parse_precision(std::string_view s) {
    if (s == "f64") return Precision::f64;
    if (s == "f32") return Precision::f32;
    throw ConfigError("unknown precision: " + std::string(s));
}

struct TrainConfig {
    int batch_size = 4096;
    int epochs = 100;
    double lr_max = 1e-3;
    std::uint64_t seed = 0;
    nn::OptimizerKind optimizer = nn::OptimizerKind::sgd;
    nn::OneCycle schedule{};
    bool loss_mask = false;  // average over live (first k) outputs only
    int micro_batch = 32;    // records per tape
    Precision precision = Precision::f64;  // tape arithmetic; parameters stay double
    int stop_after = 0;      // if > 0, return once this many epochs are done
    int threads = 1;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = std::nan("");
    double lr = 0.0;
};

/// Optimizer progress needed to resume a run bit-exactly.
struct TrainState {
    int epochs_done = 0;
    nn::Optimizer optimizer;
};

namespace detail {

struct ChunkResult {
    double weighted_loss = 0.0;
    std::vector<RMat> grads;
};

inline void chunk_inputs(const SnapTfConfig& c, const std::vector<Record>& data, std::span<const std::size_t> idx,
                         bool mask_loss, RMat& tokens, RMat& labels, RMat& mask) {
    const auto t = data[idx[0]].y.cols();
    const auto n = static_cast<Eigen::Index>(idx.size());
    tokens.resize(2 * c.m, n * t);
    labels.resize(c.k_max, n);
    mask.resize(mask_loss ? c.k_max : 0, mask_loss ? n : 0);
    if (mask_loss) mask.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Record& r = data[idx[static_cast<std::size_t>(i)]];
        if (r.y.rows() != c.m) throw MismatchError("train: record m differs from model m");
        if (r.y.cols() != t) throw MismatchError("train: records in a batch must share T");
        tokens.middleCols(i * t, t) = tokens_from_snapshots(r.y);
        labels.col(i) = make_label(r.doas, c.k_max);
        if (mask_loss) mask.col(i).head(r.k()).setOnes();
    }
}

/// Loss over `idx` and (optionally) gradients scaled by `weight`.
template <class S>
ChunkResult run_chunk_as(const SnapTfModel& model, const std::vector<Record>& data, std::span<const std::size_t> idx,
                         bool mask_loss, double weight, bool want_grad) {
    RMat tokens, labels, mask;
    chunk_inputs(model.config, data, idx, mask_loss, tokens, labels, mask);
    nn::Tape tape;
    const auto w = leaves<S>(model, want_grad);
    const auto out = forward_graph<S>(tape, model.config, w, tokens.cast<S>(), static_cast<int>(idx.size()));
    const auto l = nn::mse_loss<S>(tape, out, labels.cast<S>(), mask.cast<S>());
    ChunkResult res;
    res.weighted_loss = weight * l.item();
    if (want_grad) {
        tape.backward(nn::scale(tape, l, weight));
        res.grads.reserve(w.size());
        for (const auto& t : w)
            res.grads.push_back(t.has_grad() ? RMat(t.grad().template cast<double>()) : RMat::Zero(t.rows(), t.cols()));
    }
    return res;
}

inline ChunkResult run_chunk(const SnapTfModel& model, const std::vector<Record>& data,
                             std::span<const std::size_t> idx, const TrainConfig& tc, double weight, bool want_grad) {
    if (tc.precision == Precision::f32) return run_chunk_as<float>(model, data, idx, tc.loss_mask, weight, want_grad);
    return run_chunk_as<double>(model, data, idx, tc.loss_mask, weight, want_grad);
}

inline double entry_count(const std::vector<Record>& data, std::span<const std::size_t> idx, int k_max, bool mask) {
    double n = 0.0;
    for (std::size_t i : idx) n += mask ? data[i].k() : k_max;
    return n;
}

/// Batch loss and accumulated gradients; chunk results are reduced in
/// chunk order, so the sum is independent of the thread count.
inline double batch_pass(const SnapTfModel& model, const std::vector<Record>& data, std::span<const std::size_t> idx,
                         const TrainConfig& tc, std::vector<RMat>* grads) {
    const std::size_t chunk = static_cast<std::size_t>(std::max(1, tc.micro_batch));
    const std::size_t n_chunks = (idx.size() + chunk - 1) / chunk;
    const double total = entry_count(data, idx, model.config.k_max, tc.loss_mask);
    std::vector<ChunkResult> results(n_chunks);
    parallel_for(n_chunks, tc.threads, [&](std::size_t c) {
        const auto sub = idx.subspan(c * chunk, std::min(chunk, idx.size() - c * chunk));
        const double w = entry_count(data, sub, model.config.k_max, tc.loss_mask) / total;
        results[c] = run_chunk(model, data, sub, tc, w, grads != nullptr);
    });
    double loss_sum = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        loss_sum += results[c].weighted_loss;
        if (grads) {
            if (grads->empty()) *grads = std::move(results[c].grads);
            else
                for (std::size_t p = 0; p < grads->size(); ++p) (*grads)[p] += results[c].grads[p];
        }
    }
    return loss_sum;
}

}  // namespace detail

/// Mean training loss over a record set (no gradients).
inline double dataset_loss(const SnapTfModel& model, const std::vector<Record>& data, const TrainConfig& tc) {
    if (data.empty()) return std::nan("");
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t bs = 1024;
    double num = 0.0, den = 0.0;
    for (std::size_t s = 0; s < idx.size(); s += bs) {
        const std::span<const std::size_t> sub(idx.data() + s, std::min(bs, idx.size() - s));
        const double n = detail::entry_count(data, sub, model.config.k_max, tc.loss_mask);
        num += n * detail::batch_pass(model, data, sub, tc, nullptr);
        den += n;
    }
    return num / den;
}

inline long steps_per_epoch(std::size_t records, int batch_size) {
    return static_cast<long>((records + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size));
}

/// Minibatch training with a one-cycle learning-rate schedule over
/// epochs * ceil(records / batch) steps. Epoch e shuffles with a stream
/// derived from (seed, e). `state` carries optimizer progress across calls:
/// training resumes at state.epochs_done and stops at tc.epochs (or
/// tc.stop_after). The schedule always spans tc.epochs.
inline std::vector<EpochStats> train(SnapTfModel& model, const std::vector<Record>& data,
                                     const std::vector<Record>& validation, const TrainConfig& tc, TrainState& state,
                                     const std::function<void(const EpochStats&)>& on_epoch = {}) {
    if (data.empty()) throw DomainError("train: empty dataset");
    if (tc.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    for (const auto& r : data) {
        if (r.y.rows() != model.config.m) throw MismatchError("train: dataset m differs from model m");
        if (r.k() > model.config.k_max) throw MismatchError("train: record k exceeds model k_max");
    }
    if (state.optimizer.kind() != tc.optimizer && state.optimizer.steps() == 0) state.optimizer = nn::Optimizer(tc.optimizer);

    const long per_epoch = steps_per_epoch(data.size(), tc.batch_size);
    const long total_steps = per_epoch * std::max(1, tc.epochs);
    std::vector<EpochStats> curve;
    std::vector<std::size_t> order(data.size());
    const int last = tc.stop_after > 0 ? std::min(tc.stop_after, tc.epochs) : tc.epochs;
    for (int epoch = state.epochs_done; epoch < last; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_rng(tc.seed, {0x7EA1, static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), rng);
        double loss_num = 0.0;
        double lr = 0.0;
        for (long b = 0; b < per_epoch; ++b) {
            const std::size_t start = static_cast<std::size_t>(b) * static_cast<std::size_t>(tc.batch_size);
            const std::span<const std::size_t> idx(order.data() + start,
                                                   std::min<std::size_t>(tc.batch_size, order.size() - start));
            std::vector<RMat> grads;
            const double l = detail::batch_pass(model, data, idx, tc, &grads);
            loss_num += l * static_cast<double>(idx.size());
            lr = nn::onecycle_lr(epoch * per_epoch + b, total_steps, tc.lr_max, tc.schedule);
            for (std::size_t p = 0; p < grads.size(); ++p) model.params[p].grad = std::move(grads[p]);
            state.optimizer.step(model.params, lr);
        }
        EpochStats st{epoch + 1, loss_num / static_cast<double>(data.size()),
                      validation.empty() ? std::nan("") : dataset_loss(model, validation, tc), lr};
        state.epochs_done = epoch + 1;
        curve.push_back(st);
        if (on_epoch) on_epoch(st);
    }
    return curve;
}

inline std::vector<EpochStats> train(SnapTfModel& model, const std::vector<Record>& data,
                                     const std::vector<Record>& validation, const TrainConfig& tc) {
    TrainState state{0, nn::Optimizer(tc.optimizer)};
    return train(model, data, validation, tc, state);
}

// Training state files: "SNAPTS01", u32 epochs_done, u8 optimizer kind,
// i64 optimizer steps, u32 moment count, then for the first and second
// moment lists: u32 rows, u32 cols, f64 data.

inline constexpr std::array<char, 8> kStateMagic = {'S', 'N', 'A', 'P', 'T', 'S', '0', '1'};

inline void save_train_state(const std::string& path, TrainState& st) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kStateMagic.data(), kStateMagic.size());
    io::put(os, static_cast<std::uint32_t>(st.epochs_done));
    io::put(os, static_cast<std::uint8_t>(st.optimizer.kind()));
    io::put(os, static_cast<std::int64_t>(st.optimizer.steps()));
    for (auto* list : {&st.optimizer.first_moment(), &st.optimizer.second_moment()}) {
        io::put(os, static_cast<std::uint32_t>(list->size()));
        for (const auto& m : *list) {
            io::put(os, static_cast<std::uint32_t>(m.rows()));
            io::put(os, static_cast<std::uint32_t>(m.cols()));
            os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

inline TrainState load_train_state(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kStateMagic) throw IoError("not a SNAPTS01 state file");
    TrainState st;
    st.epochs_done = static_cast<int>(io::get<std::uint32_t>(is));
    const auto kind = io::get<std::uint8_t>(is);
    if (kind > 2) throw IoError("state: bad optimizer kind");
    st.optimizer = nn::Optimizer(static_cast<nn::OptimizerKind>(kind));
    st.optimizer.set_steps(static_cast<long>(io::get<std::int64_t>(is)));
    for (auto* list : {&st.optimizer.first_moment(), &st.optimizer.second_moment()}) {
        const auto n = io::get<std::uint32_t>(is);
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto rows = io::get<std::uint32_t>(is);
            const auto cols = io::get<std::uint32_t>(is);
            RMat m(rows, cols);
            is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
            if (!is) throw IoError("state: truncated moment");
            list->push_back(std::move(m));
        }
    }
    return st;
}

}  // namespace snapdoa
