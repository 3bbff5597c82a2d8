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

// Uplink snapshot simulation: DOA sampling, symbol alphabets, path-loss
// draws, coherent (multipath) sources and the noisy array output
//   Y = A(theta) diag(sqrt(p)) S + N,   N ~ CN(0, eta I).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "snapdoa/core.hpp"
#include "snapdoa/geometry.hpp"
#include "snapdoa/rng.hpp"

namespace snapdoa {

enum class Modulation : std::uint8_t { gaussian = 0, qpsk = 1, qam16 = 2, mixed = 3 };

inline std::string_view to_string(Modulation m) {
    switch (m) {
        case Modulation::gaussian: return "gaussian";
        case Modulation::qpsk: return "qpsk";
        case Modulation::qam16: return "qam16";
        case Modulation::mixed: return "mixed";
    }
    return "?";
}

inline Modulation parse_modulation(std::string_view s) {
    if (s == "gaussian") return Modulation::gaussian;
    if (s == "qpsk") return Modulation::qpsk;
    if (s == "qam16" || s == "16qam") return Modulation::qam16;
    if (s == "mixed") return Modulation::mixed;
    throw DomainError("unknown modulation: " + std::string(s));
}

/// Sources whose symbol rows are alpha-multiples of a leader row.
struct CoherenceGroup {
    int leader = 0;                  // 0-based source index
    std::vector<int> members;        // non-leader sources
    std::vector<cplx> alphas;        // one per member
};

struct SourceConfig {
    std::vector<double> thetas;      // radians, ascending
    std::vector<double> powers;      // mean exactly 1
    Modulation modulation = Modulation::gaussian;
    std::vector<CoherenceGroup> coherence;

    int k() const { return static_cast<int>(thetas.size()); }
};

struct SnapshotBatch {
    CMat y;                          // m x t
    double snr_db = 0.0;
    double noise_power = 0.0;
    SourceConfig truth;
    std::uint64_t seed = 0;

    int t() const { return static_cast<int>(y.cols()); }
};

/// Dart-throwing Poisson-disk sampler on [theta_min, theta_max] with minimum
/// spacing delta_min. Restarts after 1e4 consecutive rejections; gives up
/// after 100 restarts.
inline std::vector<double> sample_doas(int k, double theta_min, double theta_max, double delta_min,
                                       Rng& rng) {
    if (k < 1) throw DomainError("sample_doas: k must be >= 1");
    if (!(theta_max >= theta_min)) throw DomainError("sample_doas: empty interval");
    if (delta_min < 0.0) throw DomainError("sample_doas: negative separation");
    if ((k - 1) * delta_min > theta_max - theta_min)
        throw DomainError("sample_doas: infeasible (k-1)*delta_min exceeds the interval");

    std::uniform_real_distribution<double> draw(theta_min, theta_max);
    constexpr int kMaxRejects = 10000;
    constexpr int kMaxRestarts = 100;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int restart = 0; restart < kMaxRestarts; ++restart) {
        out.clear();
        int rejects = 0;
        while (static_cast<int>(out.size()) < k && rejects < kMaxRejects) {
            const double c = draw(rng);
            const bool ok = std::all_of(out.begin(), out.end(),
                                        [&](double a) { return std::abs(a - c) >= delta_min; });
            if (ok) {
                out.push_back(c);
                rejects = 0;
            } else {
                ++rejects;
            }
        }
        if (static_cast<int>(out.size()) == k) {
            std::sort(out.begin(), out.end());
            return out;
        }
    }
    throw DomainError("sample_doas: dart throwing failed after 100 restarts");
}

namespace detail {

inline cplx qpsk_symbol(Rng& rng) {
    static constexpr double a = 0.70710678118654752440;
    const auto bits = rng();
    return {(bits & 1U) ? a : -a, (bits & 2U) ? a : -a};
}

inline cplx qam16_symbol(Rng& rng) {
    static const double s = 1.0 / std::sqrt(10.0);
    static constexpr double levels[4] = {-3.0, -1.0, 1.0, 3.0};
    const auto bits = rng();
    return {levels[bits & 3U] * s, levels[(bits >> 2) & 3U] * s};
}

}  // namespace detail

/// k x t i.i.d. unit-average-power symbols.
inline CMat gen_symbols(Modulation mod, int k, int t, Rng& rng) {
    if (k < 1 || t < 1) throw DomainError("gen_symbols: k and t must be >= 1");
    CMat s(k, t);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    for (int c = 0; c < t; ++c) {
        for (int r = 0; r < k; ++r) {
            switch (mod) {
                case Modulation::gaussian: {
                    const double re = gauss(rng);
                    s(r, c) = cplx(re, gauss(rng));
                    break;
                }
                case Modulation::qpsk: s(r, c) = detail::qpsk_symbol(rng); break;
                case Modulation::qam16: s(r, c) = detail::qam16_symbol(rng); break;
                case Modulation::mixed:
                    s(r, c) = (rng() & 1U) ? detail::qpsk_symbol(rng) : detail::qam16_symbol(rng);
                    break;
            }
        }
    }
    return s;
}

/// Uniform(1, ratio_max) draws rescaled to unit mean.
inline std::vector<double> gen_powers(int k, double ratio_max, Rng& rng) {
    if (k < 1) throw DomainError("gen_powers: k must be >= 1");
    if (ratio_max < 1.0) throw DomainError("gen_powers: ratio_max must be >= 1");
    std::uniform_real_distribution<double> draw(1.0, ratio_max);
    std::vector<double> p(static_cast<std::size_t>(k));
    for (double& v : p) v = ratio_max > 1.0 ? draw(rng) : 1.0;
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v = k * v / sum;
    return p;
}

/// Replaces each member row with alpha * leader row.
inline CMat apply_coherence(CMat symbols, const std::vector<CoherenceGroup>& groups) {
    const int k = static_cast<int>(symbols.rows());
    for (const auto& g : groups) {
        if (g.members.size() != g.alphas.size())
            throw DomainError("apply_coherence: one alpha per member required");
        if (g.leader < 0 || g.leader >= k) throw DomainError("apply_coherence: leader out of range");
        for (std::size_t i = 0; i < g.members.size(); ++i) {
            const int mbr = g.members[i];
            if (mbr < 0 || mbr >= k || mbr == g.leader)
                throw DomainError("apply_coherence: bad member index");
            const cplx a = g.alphas[i];
            if (a == cplx(0.0) || !std::isfinite(a.real()) || !std::isfinite(a.imag()))
                throw DomainError("apply_coherence: alpha must be finite and nonzero");
            symbols.row(mbr) = a * symbols.row(g.leader);
        }
    }
    return symbols;
}

inline void validate(const SourceConfig& cfg) {
    const int k = cfg.k();
    if (k < 1) throw DomainError("source config: no sources");
    if (static_cast<int>(cfg.powers.size()) != k)
        throw DomainError("source config: one power per source required");
    if (!std::is_sorted(cfg.thetas.begin(), cfg.thetas.end()))
        throw DomainError("source config: thetas must be sorted");
    for (double th : cfg.thetas) check_angle(th);
    for (double p : cfg.powers)
        if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("source config: bad power");
}

/// Noise power for a target average SNR.
inline double noise_power_for(const std::vector<double>& powers, double snr_db) {
    const double mean_p = std::accumulate(powers.begin(), powers.end(), 0.0) /
                          static_cast<double>(powers.size());
    return mean_p * std::pow(10.0, -snr_db / 10.0);
}

/// Noiseless array output for given symbols.
inline CMat noiseless_snapshots(const ArrayGeometry& geom, const SourceConfig& cfg, const CMat& s) {
    CMat a = response_matrix(geom, cfg.thetas);
    for (int k = 0; k < cfg.k(); ++k) a.col(k) *= std::sqrt(cfg.powers[static_cast<std::size_t>(k)]);
    return a * s;
}

inline void add_noise(CMat& y, double eta, Rng& rng) {
    if (eta <= 0.0) return;
    std::normal_distribution<double> gauss(0.0, std::sqrt(eta / 2.0));
    for (Eigen::Index c = 0; c < y.cols(); ++c)
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const double re = gauss(rng);
            y(r, c) += cplx(re, gauss(rng));
        }
}

/// Draws symbols (with coherence applied) and noise from rng.
/// snr_db = +inf gives a noiseless batch.
inline SnapshotBatch synthesize(const ArrayGeometry& geom, const SourceConfig& cfg, int t,
                                double snr_db, Rng& rng) {
    validate(cfg);
    if (t < 1) throw DomainError("synthesize: t must be >= 1");
    SnapshotBatch out;
    out.truth = cfg;
    out.snr_db = snr_db;
    out.noise_power = std::isinf(snr_db) && snr_db > 0 ? 0.0 : noise_power_for(cfg.powers, snr_db);
    const CMat s = apply_coherence(gen_symbols(cfg.modulation, cfg.k(), t, rng), cfg.coherence);
    out.y = noiseless_snapshots(geom, cfg, s);
    add_noise(out.y, out.noise_power, rng);
    return out;
}

/// Knobs for drawing a random scenario.
struct ScenarioSpec {
    int k = 3;
    double theta_min = kPi / 6.0;
    double theta_max = 5.0 * kPi / 6.0;
    double delta_min = kPi / 60.0;
    double power_ratio = 10.0;
    Modulation modulation = Modulation::qam16;
    // Coherent groups expressed as source counts: {2} makes sources 0 and 1 coherent.
    std::vector<int> coherent_group_sizes;
    cplx alpha = 1.0;
};

/// Draws DOAs, powers and coherence structure for one record.
inline SourceConfig draw_sources(const ScenarioSpec& spec, Rng& rng) {
    SourceConfig cfg;
    cfg.thetas = sample_doas(spec.k, spec.theta_min, spec.theta_max, spec.delta_min, rng);
    cfg.powers = gen_powers(spec.k, spec.power_ratio, rng);
    cfg.modulation = spec.modulation;
    int next = 0;
    for (int size : spec.coherent_group_sizes) {
        if (size < 2) continue;
        if (next + size > spec.k) throw DomainError("coherence groups exceed k");
        CoherenceGroup g;
        g.leader = next;
        for (int i = 1; i < size; ++i) {
            g.members.push_back(next + i);
            g.alphas.push_back(spec.alpha);
        }
        cfg.coherence.push_back(std::move(g));
        next += size;
    }
    return cfg;
}

/// One complete record: sources drawn then snapshots synthesized, all from `seed`.
inline SnapshotBatch draw_batch(const ArrayGeometry& geom, const ScenarioSpec& spec, int t,
                                double snr_db, std::uint64_t seed) {
    Rng rng(seed);
    SnapshotBatch b = synthesize(geom, draw_sources(spec, rng), t, snr_db, rng);
    b.seed = seed;
    return b;
}

}  // namespace snapdoa
