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

// Monte Carlo MSE curves: the permutation-free angle error, SNR sweeps and
// generalization runs (snapshot count, modulation) for any set of
// estimators, written as CSV.
//
// Every trial draws its scenario from derive_seed(master, {cell, trial}) and
// all methods see the same draw. Per-trial results land in fixed slots and
// are folded in trial order, so output does not depend on --threads.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "snapdoa/core.hpp"
#include "snapdoa/geometry.hpp"
#include "snapdoa/parallel.hpp"
#include "snapdoa/rng.hpp"
#include "snapdoa/sigsim.hpp"
#include "snapdoa/snap_tf.hpp"
#include "snapdoa/subspace.hpp"

namespace snapdoa {

/// (1/K) min over permutations of ||P est - truth||^2, by sorting both sides.
inline double mse_metric(std::vector<double> est, std::vector<double> truth) {
    if (est.size() != truth.size()) throw ShapeError("mse_metric: length mismatch");
    if (est.empty()) throw ShapeError("mse_metric: empty estimate");
    std::sort(est.begin(), est.end());
    std::sort(truth.begin(), truth.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) acc += (est[i] - truth[i]) * (est[i] - truth[i]);
    return acc / static_cast<double>(est.size());
}

struct CurvePoint {
    std::string method;
    double snr_db = 0.0;
    int k = 0;
    int t = 0;
    double mse_rad2 = 0.0;
    int trials = 0;  // trials that produced an estimate
    double ci95 = 0.0;
};

/// Maps one noisy batch and a source count to an estimate.
using Estimator = std::function<DoaEstimate(const SnapshotBatch&, const ArrayGeometry&, int)>;

struct NamedEstimator {
    std::string name;
    Estimator fn;
};

inline NamedEstimator baseline_estimator() {
    return {"coarray_rootmusic",
            [](const SnapshotBatch& b, const ArrayGeometry& g, int k) { return coarray_root_music(b.y, g, k); }};
}

/// Returns the true angles. Test harness only.
inline NamedEstimator oracle_estimator() {
    return {"oracle", [](const SnapshotBatch& b, const ArrayGeometry&, int) {
                std::vector<double> th = b.truth.thetas;
                std::sort(th.begin(), th.end());
                return DoaEstimate{std::move(th), "oracle"};
            }};
}

/// Wraps a trained model; the model must outlive the estimator.
inline NamedEstimator snap_tf_estimator(const SnapTfModel& model, std::string name = "snap_tf") {
    return {std::move(name), [&model](const SnapshotBatch& b, const ArrayGeometry& g, int k) {
                if (g.m() != model.config.m) throw MismatchError("snap_tf: model m differs from geometry m");
                return forward(model, b.y, k);
            }};
}

struct SweepSpec {
    std::vector<double> snr_grid{-10.0, 0.0, 10.0, 20.0};
    std::vector<int> k_list{3};
    int t = 50;
    int trials = 200;
    ArrayGeometry geometry = ArrayGeometry::preset("mra5");
    Modulation modulation = Modulation::qam16;
    std::vector<int> coherent_group_sizes;
    double power_ratio = 10.0;
    std::uint64_t master_seed = 0;
    int threads = 1;

    void validate() const {
        if (snr_grid.empty() || k_list.empty()) throw ConfigError("sweep: grids must be nonempty");
        if (trials < 1) throw ConfigError("sweep: trials must be >= 1");
        if (t < 1) throw ConfigError("sweep: t must be >= 1");
        for (int k : k_list)
            if (k < 1) throw ConfigError("sweep: k must be >= 1");
    }
};

namespace detail {

inline CurvePoint fold(std::string method, double snr, int k, int t, const std::vector<double>& vals) {
    CurvePoint p{std::move(method), snr, k, t, std::nan(""), 0, std::nan("")};
    double sum = 0.0;
    int n = 0;
    for (double v : vals)
        if (std::isfinite(v)) {
            sum += v;
            ++n;
        }
    p.trials = n;
    if (n == 0) return p;
    p.mse_rad2 = sum / n;
    double ss = 0.0;
    for (double v : vals)
        if (std::isfinite(v)) ss += (v - p.mse_rad2) * (v - p.mse_rad2);
    p.ci95 = n > 1 ? 1.96 * std::sqrt(ss / (n - 1) / n) : 0.0;
    return p;
}

}  // namespace detail

/// One cell (snr, k, t): every method on the same `trials` draws.
/// Failed estimates (EstimationFailure) are left out of that method's mean.
inline std::vector<CurvePoint> run_cell(const SweepSpec& spec, const std::vector<NamedEstimator>& methods,
                                        double snr, int k, int t, std::uint64_t cell) {
    const ArrayGeometry& geom = spec.geometry;
    ScenarioSpec scen;
    scen.k = k;
    scen.modulation = spec.modulation;
    scen.coherent_group_sizes = spec.coherent_group_sizes;
    scen.power_ratio = spec.power_ratio;
    const auto n = static_cast<std::size_t>(spec.trials);
    std::vector<std::vector<double>> vals(methods.size(), std::vector<double>(n));
    parallel_for(n, spec.threads, [&](std::size_t i) {
        const SnapshotBatch b = draw_batch(geom, scen, t, snr, derive_seed(spec.master_seed, {cell, i}));
        for (std::size_t m = 0; m < methods.size(); ++m) {
            try {
                vals[m][i] = mse_metric(methods[m].fn(b, geom, k).thetas, b.truth.thetas);
            } catch (const EstimationFailure&) {
                vals[m][i] = std::nan("");
            }
        }
    });
    std::vector<CurvePoint> out;
    for (std::size_t m = 0; m < methods.size(); ++m) out.push_back(detail::fold(methods[m].name, snr, k, t, vals[m]));
    return out;
}

/// Cells in (k, snr) order; cell ids count up from 0 in that order.
inline std::vector<CurvePoint> run_sweep(const SweepSpec& spec, const std::vector<NamedEstimator>& methods) {
    spec.validate();
    if (methods.empty()) throw ConfigError("sweep: no estimators");
    std::vector<CurvePoint> out;
    std::uint64_t cell = 0;
    for (int k : spec.k_list)
        for (double snr : spec.snr_grid) {
            auto pts = run_cell(spec, methods, snr, k, spec.t, cell++);
            out.insert(out.end(), pts.begin(), pts.end());
        }
    return out;
}

enum class GeneralizationAxis { snapshots, modulation };

inline GeneralizationAxis parse_axis(std::string_view s) {
    if (s == "snapshots") return GeneralizationAxis::snapshots;
    if (s == "modulation") return GeneralizationAxis::modulation;
    throw ConfigError("unknown generalization axis: " + std::string(s));
}

/// Re-runs the sweep without retraining, along T (t_grid) or across the
/// three test modulations. Modulation rows carry the method name suffixed
/// with "@<modulation>".
inline std::vector<CurvePoint> run_generalization(const std::vector<NamedEstimator>& methods, GeneralizationAxis axis,
                                                  const SweepSpec& spec,
                                                  const std::vector<int>& t_grid = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100}) {
    spec.validate();
    std::vector<CurvePoint> out;
    if (axis == GeneralizationAxis::snapshots) {
        if (t_grid.empty()) throw ConfigError("generalization: empty T grid");
        for (int t : t_grid) {
            SweepSpec s = spec;
            s.t = t;
            auto pts = run_sweep(s, methods);
            out.insert(out.end(), pts.begin(), pts.end());
        }
        return out;
    }
    for (Modulation mod : {Modulation::qam16, Modulation::qpsk, Modulation::mixed}) {
        SweepSpec s = spec;
        s.modulation = mod;
        auto pts = run_sweep(s, methods);
        for (auto& p : pts) p.method += "@" + std::string(to_string(mod));
        out.insert(out.end(), pts.begin(), pts.end());
    }
    return out;
}

inline void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& pts) {
    os << "method,snr_db,k,t,mse_rad2,trials,ci95\n";
    char buf[256];
    for (const auto& p : pts) {
        std::snprintf(buf, sizeof buf, "%s,%.6g,%d,%d,%.10e,%d,%.4e\n", p.method.c_str(), p.snr_db, p.k, p.t,
                      p.mse_rad2, p.trials, p.ci95);
        os << buf;
    }
}

}  // namespace snapdoa
