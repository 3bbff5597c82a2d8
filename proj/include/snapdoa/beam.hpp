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

// Sensing-assisted multi-user downlink beam management.
//
// A trial draws K users, their uplink DOA estimates and a downlink channel
// h_k = sqrt(p_k) a(theta_DL,k) with theta_DL = theta_UL + N(0, sigma_mis^2).
// Each scheme picks one codebook beam per user, estimates the scalar gain
// along it by least squares, precodes with ZF on the estimated channels and
// scores SINR on the true ones:
//
//   R = max(0, 1 - (t_train + t_fb) / t_c) * sum_k log2(1 + SINR_k)
//
// Beam vectors are normalized (||w|| = 1). Total transmit power is
// P = 10^(snr_dl/10) against unit-variance receiver noise.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "snapdoa/core.hpp"
#include "snapdoa/geometry.hpp"
#include "snapdoa/parallel.hpp"
#include "snapdoa/rng.hpp"
#include "snapdoa/sigsim.hpp"
#include "snapdoa/subspace.hpp"

namespace snapdoa {

struct Codebook {
    int q = 0;
    std::vector<double> u;       // electrical angles 2q/Q - 1, increasing
    std::vector<double> angles;  // arccos(u), decreasing
    CMat vectors;                // m x q, unit-modulus entries

    /// Beam with the smallest angular distance to theta.
    int nearest(double theta) const {
        int best = 0;
        for (int i = 1; i < q; ++i)
            if (std::abs(angles[static_cast<std::size_t>(i)] - theta) <
                std::abs(angles[static_cast<std::size_t>(best)] - theta))
                best = i;
        return best;
    }
};

inline Codebook type1_codebook(const ArrayGeometry& geom, int q) {
    if (q < 1) throw DomainError("type1_codebook: q must be >= 1");
    Codebook cb{q, {}, {}, CMat(geom.m(), q)};
    for (int i = 1; i <= q; ++i) {
        const double u = 2.0 * i / q - 1.0;
        cb.u.push_back(u);
        cb.angles.push_back(angle_from_electrical(u));
        cb.vectors.col(i - 1) = steering_vector_u(geom, u);
    }
    return cb;
}

struct PrunedBeams {
    std::vector<std::vector<int>> sets;  // per user, ascending beam indices
    int overhead = 0;                    // |union of sets|
};

/// Beams with |angle - theta_hat| < delta per user; an empty window falls
/// back to the nearest beam.
inline PrunedBeams prune_beams(const Codebook& cb, const std::vector<double>& theta_hat, double delta) {
    if (!(delta > 0.0)) throw DomainError("prune_beams: delta must be > 0");
    PrunedBeams out;
    std::set<int> all;
    for (double th : theta_hat) {
        std::vector<int> s;
        for (int i = 0; i < cb.q; ++i)
            if (std::abs(cb.angles[static_cast<std::size_t>(i)] - th) < delta) s.push_back(i);
        if (s.empty()) s.push_back(cb.nearest(th));
        all.insert(s.begin(), s.end());
        out.sets.push_back(std::move(s));
    }
    out.overhead = static_cast<int>(all.size());
    return out;
}

enum class BeamScheme { full, pruned, sensing_only };

inline std::string_view to_string(BeamScheme s) {
    switch (s) {
        case BeamScheme::full: return "full";
        case BeamScheme::pruned: return "pruned";
        case BeamScheme::sensing_only: return "sensing_only";
    }
    return "?";
}

inline BeamScheme parse_scheme(std::string_view s) {
    if (s == "full") return BeamScheme::full;
    if (s == "pruned") return BeamScheme::pruned;
    if (s == "sensing_only") return BeamScheme::sensing_only;
    throw ConfigError("unknown beam scheme: " + std::string(s));
}

/// Everything random about one trial, shared by all schemes.
struct DownlinkDraw {
    std::vector<double> theta_ul;   // ascending
    std::vector<double> theta_hat;  // estimates paired with theta_ul
    std::vector<double> theta_dl;
    std::vector<double> powers;
    CMat pilot_noise;               // k x pilots, CN(0, 1)
};

struct BeamParams {
    double delta = 0.0;      // radians, pruning half-width
    double snr_dl_db = 10.0;
    int pilots = 1;          // LS pilots per selected beam
};

struct ThroughputReport {
    BeamScheme scheme = BeamScheme::full;
    int t_train = 0;
    int t_fb = 0;
    std::vector<int> beams;
    std::vector<double> sinr;
    double sum_rate = 0.0;  // sum_k log2(1 + SINR_k), before the overhead factor

    /// Throughput at coherence time t_c; zero once overheads use it all.
    double rate(double t_c) const {
        if (!(t_c > 0.0)) throw DomainError("rate: t_c must be > 0");
        return std::max(0.0, 1.0 - (t_train + t_fb) / t_c) * sum_rate;
    }
};

/// Moore-Penrose inverse through a complete orthogonal decomposition.
inline CMat pseudo_inverse(const CMat& a) {
    Eigen::CompleteOrthogonalDecomposition<CMat> cod(a);
    cod.setThreshold(1e-10);
    return cod.pseudoInverse();
}

/// ZF precoder for estimated channels (columns of h_hat): pinv(H^H) with
/// unit-norm columns scaled to power p_total / K each.
inline CMat zf_precoder(const CMat& h_hat, double p_total) {
    CMat f = pseudo_inverse(h_hat.adjoint());
    const double per_user = std::sqrt(p_total / static_cast<double>(f.cols()));
    for (Eigen::Index k = 0; k < f.cols(); ++k) {
        const double n = f.col(k).norm();
        f.col(k) = n > 0.0 ? CVec(f.col(k) * (per_user / n)) : CVec::Zero(f.rows());
    }
    return f;
}

/// SINR_k = |h_k^H f_k|^2 / (sum_{j != k} |h_k^H f_j|^2 + 1).
inline std::vector<double> zf_sinr(const CMat& h, const CMat& f) {
    const CMat g = h.adjoint() * f;
    std::vector<double> out;
    for (Eigen::Index k = 0; k < g.rows(); ++k) {
        const double sig = std::norm(g(k, k));
        const double tot = g.row(k).squaredNorm();
        out.push_back(sig / (tot - sig + 1.0));
    }
    return out;
}

inline ThroughputReport downlink_trial(const ArrayGeometry& geom, const Codebook& cb, const DownlinkDraw& d,
                                       BeamScheme scheme, const BeamParams& bp) {
    const auto k = static_cast<int>(d.theta_ul.size());
    if (k < 1) throw DomainError("downlink_trial: no users");
    if (k > geom.m()) throw DomainError("downlink_trial: more users than antennas");
    if (bp.pilots < 1) throw DomainError("downlink_trial: pilots must be >= 1");
    const double inv_norm = 1.0 / std::sqrt(static_cast<double>(geom.m()));

    CMat h(geom.m(), k);
    for (int i = 0; i < k; ++i)
        h.col(i) = std::sqrt(d.powers[static_cast<std::size_t>(i)]) *
                   steering_vector_u(geom, std::cos(d.theta_dl[static_cast<std::size_t>(i)]));

    ThroughputReport rep;
    rep.scheme = scheme;
    std::vector<std::vector<int>> sweep(static_cast<std::size_t>(k));
    if (scheme == BeamScheme::full) {
        std::vector<int> all(static_cast<std::size_t>(cb.q));
        for (int i = 0; i < cb.q; ++i) all[static_cast<std::size_t>(i)] = i;
        std::fill(sweep.begin(), sweep.end(), all);
        rep.t_train = cb.q;
        rep.t_fb = k;
    } else if (scheme == BeamScheme::pruned) {
        PrunedBeams pb = prune_beams(cb, d.theta_hat, bp.delta);
        sweep = std::move(pb.sets);
        rep.t_train = pb.overhead;
        rep.t_fb = k;
    }

    for (int i = 0; i < k; ++i) {
        if (scheme == BeamScheme::sensing_only) {
            rep.beams.push_back(cb.nearest(d.theta_hat[static_cast<std::size_t>(i)]));
            continue;
        }
        int best = -1;
        double best_gain = -1.0;
        for (int b : sweep[static_cast<std::size_t>(i)]) {
            const double g = std::abs(h.col(i).dot(cb.vectors.col(b)));
            if (g > best_gain) {
                best_gain = g;
                best = b;
            }
        }
        rep.beams.push_back(best);
    }

    // LS gain along each chosen beam: r = sqrt(P) g + n, averaged over pilots.
    const double p_total = std::pow(10.0, bp.snr_dl_db / 10.0);
    CMat h_hat(geom.m(), k);
    for (int i = 0; i < k; ++i) {
        const CVec w = cb.vectors.col(rep.beams[static_cast<std::size_t>(i)]) * inv_norm;
        const cplx g = h.col(i).dot(w);  // h^H w
        const cplx noise = d.pilot_noise.row(i).head(bp.pilots).mean();
        const cplx g_hat = g + noise / std::sqrt(p_total);
        h_hat.col(i) = std::conj(g_hat) * w;  // h_hat^H w = g_hat
    }
    rep.sinr = zf_sinr(h, zf_precoder(h_hat, p_total));
    for (double s : rep.sinr) rep.sum_rate += std::log2(1.0 + s);
    return rep;
}

// ---------------------------------------------------------------------------
// Monte Carlo driver.

enum class DoaErrorKind { synthetic, estimator };

/// Uplink estimator used by DoaErrorKind::estimator.
using UplinkEstimator = std::function<DoaEstimate(const CMat&, const ArrayGeometry&, int)>;

/// per_user: independent offset per user. common: one offset per trial
/// shared by every user.
enum class MismatchKind { per_user, common };

inline MismatchKind parse_mismatch(std::string_view s) {
    if (s == "per_user") return MismatchKind::per_user;
    if (s == "common") return MismatchKind::common;
    throw ConfigError("unknown mismatch model: " + std::string(s));
}

struct BeamScenario {
    int m = 64;
    int k = 10;
    int t = 100;  // uplink snapshots (estimator error model)
    std::vector<double> t_c_grid{50, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
    std::vector<double> sigma_mis_deg{0.0};
    std::vector<double> delta_deg;  // empty: twice the DOA RMSE
    std::vector<BeamScheme> schemes{BeamScheme::full, BeamScheme::pruned, BeamScheme::sensing_only};
    double snr_dl_db = 10.0;
    int pilots = 1;
    DoaErrorKind error_kind = DoaErrorKind::synthetic;
    double rmse_rad = 0.01;     // synthetic Gaussian error
    double snr_ul_db = 5.0;     // estimator error model
    UplinkEstimator estimator;  // empty: co-array Root-MUSIC
    MismatchKind mismatch = MismatchKind::common;
    Modulation modulation = Modulation::qam16;
    int calibration_trials = 200;
    int trials = 10000;
    std::uint64_t master_seed = 0;
    int threads = 1;

    void validate() const {
        if (m < 1 || k < 1 || t < 1 || trials < 1 || pilots < 1) throw ConfigError("beam: sizes must be >= 1");
        if (k > m) throw DomainError("beam: K exceeds M");
        if (t_c_grid.empty() || sigma_mis_deg.empty() || schemes.empty()) throw ConfigError("beam: empty grid");
        for (double tc : t_c_grid)
            if (!(tc > 0.0)) throw ConfigError("beam: t_c must be > 0");
        for (double dd : delta_deg)
            if (!(dd > 0.0)) throw ConfigError("beam: delta must be > 0");
        if (!(rmse_rad >= 0.0)) throw ConfigError("beam: rmse must be >= 0");
    }
};

struct BeamRow {
    BeamScheme scheme;
    double t_c;
    double sigma_mis_deg;
    double delta_deg;
    double mean_r;
    double ci95;
    double mean_t_train;
};

/// Users and uplink estimates for one trial. The estimator model runs
/// its estimator on simulated uplink data; estimates are paired with
/// users in sorted order. Mismatch and pilot noise are added separately.
inline DownlinkDraw draw_users(const BeamScenario& sc, const ArrayGeometry& geom, std::uint64_t seed) {
    Rng rng(seed);
    ScenarioSpec spec;
    spec.k = sc.k;
    spec.modulation = sc.modulation;
    SourceConfig src = draw_sources(spec, rng);
    std::vector<std::size_t> order(src.thetas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return src.thetas[a] < src.thetas[b]; });
    DownlinkDraw d;
    for (std::size_t i : order) {
        d.theta_ul.push_back(src.thetas[i]);
        d.powers.push_back(src.powers[i]);
    }
    if (sc.error_kind == DoaErrorKind::synthetic) {
        std::normal_distribution<double> err(0.0, 1.0);
        for (double th : d.theta_ul) d.theta_hat.push_back(th + sc.rmse_rad * err(rng));
    } else {
        src.thetas = d.theta_ul;
        src.powers = d.powers;
        const SnapshotBatch b = synthesize(geom, src, sc.t, sc.snr_ul_db, rng);
        d.theta_hat = sc.estimator ? sc.estimator(b.y, geom, sc.k).thetas : coarray_root_music(b.y, geom, sc.k).thetas;
        if (d.theta_hat.size() != d.theta_ul.size()) throw MismatchError("beam: estimator returned wrong count");
        std::sort(d.theta_hat.begin(), d.theta_hat.end());
    }
    return d;
}

inline void draw_downlink(DownlinkDraw& d, double sigma_mis, MismatchKind kind, int pilots, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    d.theta_dl.clear();
    const double shared = n01(rng);
    for (double th : d.theta_ul)
        d.theta_dl.push_back(th + sigma_mis * (kind == MismatchKind::common ? shared : n01(rng)));
    const auto k = static_cast<Eigen::Index>(d.theta_ul.size());
    d.pilot_noise.resize(k, pilots);
    for (Eigen::Index j = 0; j < pilots; ++j)
        for (Eigen::Index i = 0; i < k; ++i) {
            const double re = n01(rng), im = n01(rng);
            d.pilot_noise(i, j) = cplx(re, im) * std::sqrt(0.5);
        }
}

/// RMSE of the error model, measured on a separate seed stream.
inline double calibrate_rmse(const BeamScenario& sc, const ArrayGeometry& geom) {
    if (sc.error_kind == DoaErrorKind::synthetic) return sc.rmse_rad;
    const auto n = static_cast<std::size_t>(std::max(1, sc.calibration_trials));
    std::vector<double> se(n);
    parallel_for(n, sc.threads, [&](std::size_t i) {
        const DownlinkDraw d = draw_users(sc, geom, derive_seed(sc.master_seed, {0xCA11B, i}));
        double s = 0.0;
        for (std::size_t j = 0; j < d.theta_ul.size(); ++j) s += std::pow(d.theta_hat[j] - d.theta_ul[j], 2);
        se[i] = s / static_cast<double>(d.theta_ul.size());
    });
    double acc = 0.0;
    for (double v : se) acc += v;
    return std::sqrt(acc / static_cast<double>(n));
}

/// Mean throughput per (sigma_mis, delta, scheme, t_c). Each trial's users
/// and estimates are drawn once and reused for every mismatch level, window
/// and scheme; t_c only enters through the overhead factor.
inline std::vector<BeamRow> run_beam_sim(const BeamScenario& sc) {
    sc.validate();
    const ArrayGeometry geom = ArrayGeometry::ula(sc.m);
    const Codebook cb = type1_codebook(geom, sc.m);
    std::vector<double> deltas;
    if (sc.delta_deg.empty()) deltas.push_back(std::max(2.0 * calibrate_rmse(sc, geom), 1e-12));
    else
        for (double dd : sc.delta_deg) deltas.push_back(deg2rad(dd));

    const auto n = static_cast<std::size_t>(sc.trials);
    const std::size_t ns = sc.sigma_mis_deg.size(), nd = deltas.size(), nsch = sc.schemes.size();
    // reports[trial][(s * nd + d) * nsch + c]
    std::vector<std::vector<ThroughputReport>> reports(n);
    parallel_for(n, sc.threads, [&](std::size_t i) {
        DownlinkDraw d = draw_users(sc, geom, derive_seed(sc.master_seed, {1, i}));
        auto& out = reports[i];
        out.reserve(ns * nd * nsch);
        for (std::size_t s = 0; s < ns; ++s) {
            Rng rng = make_rng(sc.master_seed, {2, i, s});
            draw_downlink(d, deg2rad(sc.sigma_mis_deg[s]), sc.mismatch, sc.pilots, rng);
            for (std::size_t di = 0; di < nd; ++di)
                for (BeamScheme scheme : sc.schemes)
                    out.push_back(downlink_trial(geom, cb, d, scheme, {deltas[di], sc.snr_dl_db, sc.pilots}));
        }
    });

    std::vector<BeamRow> rows;
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t di = 0; di < nd; ++di)
            for (std::size_t c = 0; c < nsch; ++c)
                for (double tc : sc.t_c_grid) {
                    const std::size_t slot = (s * nd + di) * nsch + c;
                    double sum = 0.0, sq = 0.0, tt = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double r = reports[i][slot].rate(tc);
                        sum += r;
                        sq += r * r;
                        tt += reports[i][slot].t_train;
                    }
                    const double nn = static_cast<double>(n);
                    const double mean = sum / nn;
                    const double var = n > 1 ? std::max(0.0, (sq - nn * mean * mean) / (nn - 1.0)) : 0.0;
                    rows.push_back({sc.schemes[c], tc, sc.sigma_mis_deg[s], rad2deg(deltas[di]), mean,
                                    1.96 * std::sqrt(var / nn), tt / nn});
                }
    return rows;
}

inline void write_beam_csv(std::ostream& os, const std::vector<BeamRow>& rows) {
    os << "scheme,t_c,sigma_mis_deg,delta_deg,mean_R,ci95,mean_t_train\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.6g,%.10e,%.4e,%.6g\n", std::string(to_string(r.scheme)).c_str(),
                      r.t_c, r.sigma_mis_deg, r.delta_deg, r.mean_r, r.ci95, r.mean_t_train);
        os << buf;
    }
}

}  // namespace snapdoa
