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

// Subspace DOA machinery: Hermitian eigendecomposition (cyclic Jacobi),
// MUSIC pseudo-spectrum, Root-MUSIC and the principal-angle subspace
// distance. Estimators here work on a virtual-ULA covariance, i.e. the
// output of coarray_augment.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "snapdoa/core.hpp"
#include "snapdoa/covariance.hpp"
#include "snapdoa/geometry.hpp"

namespace snapdoa {

struct HermitianEig {
    RVec values;   // descending
    CMat vectors;  // column i belongs to values(i)
};

/// Cyclic Jacobi for Hermitian matrices. Stops once the off-diagonal
/// Frobenius norm drops below 1e-12 * ||A||_F, or after 100 sweeps.
inline HermitianEig eig_hermitian_full(const CMat& input) {
    const Eigen::Index n = input.rows();
    if (n != input.cols()) throw ShapeError("eig_hermitian: matrix must be square");
    CMat a = 0.5 * (input + input.adjoint());
    CMat v = CMat::Identity(n, n);

    const double tol = 1e-12 * a.norm();
    auto off_norm = [&] {
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != j) s += std::norm(a(i, j));
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double r = std::abs(a(p, q));
                if (r == 0.0) continue;
                const cplx phase = a(p, q) / r;  // e^{i phi}
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double tau = (aqq - app) / (2.0 * r);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
                const cplx gpp = c, gpq = s;
                const cplx gqp = -s * std::conj(phase), gqq = c * std::conj(phase);
                for (Eigen::Index k = 0; k < n; ++k) {  // A <- A G
                    const cplx akp = a(k, p), akq = a(k, q);
                    a(k, p) = akp * gpp + akq * gqp;
                    a(k, q) = akp * gpq + akq * gqq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {  // A <- G^H A
                    const cplx apk = a(p, k), aqk = a(q, k);
                    a(p, k) = std::conj(gpp) * apk + std::conj(gqp) * aqk;
                    a(q, k) = std::conj(gpq) * apk + std::conj(gqq) * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {  // V <- V G
                    const cplx vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = vkp * gpp + vkq * gqp;
                    v(k, q) = vkp * gpq + vkq * gqq;
                }
                a(p, q) = a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return a(i, i).real() > a(j, j).real(); });
    HermitianEig out{RVec(n), CMat(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index src = order[static_cast<std::size_t>(i)];
        out.values(i) = a(src, src).real();
        out.vectors.col(i) = v.col(src);
    }
    return out;
}

struct EigenSplit {
    RVec values;     // descending
    CMat signal;     // n x k
    CMat noise;      // n x (n - k)
};

inline EigenSplit eig_hermitian(const Scm& scm, int k) {
    const auto n = static_cast<int>(scm.size());
    if (k < 1 || k >= n) throw DomainError("eig_hermitian: need 1 <= K < n, got K=" + std::to_string(k));
    HermitianEig e = eig_hermitian_full(scm.mat);
    return {std::move(e.values), e.vectors.leftCols(k), e.vectors.rightCols(n - k)};
}

/// 1 / ||V^H a(theta)||^2 on the virtual ULA implied by the noise basis.
inline std::vector<double> music_spectrum(const EigenSplit& split, std::span<const double> grid) {
    if (grid.empty()) throw DomainError("music_spectrum: empty grid");
    if (split.noise.cols() == 0) throw DomainError("music_spectrum: empty noise subspace");
    const auto ula = ArrayGeometry::ula(static_cast<int>(split.noise.rows()));
    std::vector<double> out;
    out.reserve(grid.size());
    for (double th : grid) {
        const CVec a = steering_vector(ula, th);
        out.push_back(1.0 / std::max((split.noise.adjoint() * a).squaredNorm(), 1e-300));
    }
    return out;
}

/// Indices of the k largest interior local maxima (grid endpoints count when
/// they dominate their single neighbour), returned in grid order.
inline std::vector<std::size_t> spectrum_peaks(std::span<const double> spec, int k) {
    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const bool left = i == 0 || spec[i] >= spec[i - 1];
        const bool right = i + 1 == spec.size() || spec[i] > spec[i + 1];
        if (left && right) peaks.push_back(i);
    }
    std::stable_sort(peaks.begin(), peaks.end(), [&](auto a, auto b) { return spec[a] > spec[b]; });
    if (static_cast<int>(peaks.size()) > k) peaks.resize(static_cast<std::size_t>(k));
    std::sort(peaks.begin(), peaks.end());
    return peaks;
}

struct DoaEstimate {
    std::vector<double> thetas;  // ascending
    std::string method;

    int k() const { return static_cast<int>(thetas.size()); }
};

/// Roots of sum_i coeffs[i] z^i via companion-matrix eigenvalues.
inline std::vector<cplx> polynomial_roots(std::vector<cplx> coeffs) {
    const double scale = std::accumulate(coeffs.begin(), coeffs.end(), 0.0,
                                         [](double m, cplx c) { return std::max(m, std::abs(c)); });
    if (scale == 0.0 || !std::isfinite(scale)) throw EstimationFailure("polynomial_roots: degenerate polynomial");
    while (coeffs.size() > 1 && std::abs(coeffs.back()) <= 1e-14 * scale) coeffs.pop_back();
    const auto deg = static_cast<Eigen::Index>(coeffs.size()) - 1;
    if (deg < 1) return {};
    CMat comp = CMat::Zero(deg, deg);
    const cplx lead = coeffs.back();
    for (Eigen::Index i = 0; i < deg; ++i) comp(0, i) = -coeffs[static_cast<std::size_t>(deg - 1 - i)] / lead;
    for (Eigen::Index i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    Eigen::ComplexEigenSolver<CMat> solver(comp, false);
    if (solver.info() != Eigen::Success) throw EstimationFailure("polynomial_roots: eigen solver failed");
    const CVec& ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

/// Coefficients (ascending powers of z) of z^{n-1} a(z)^H C a(z), C = V V^H.
inline std::vector<cplx> root_music_polynomial(const CMat& noise) {
    const Eigen::Index n = noise.rows();
    const CMat c = noise * noise.adjoint();
    std::vector<cplx> coeffs(static_cast<std::size_t>(2 * n - 1), 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) coeffs[static_cast<std::size_t>(j - i + n - 1)] += c(i, j);
    return coeffs;
}

/// Root-MUSIC on an n x n virtual-ULA covariance.
inline DoaEstimate root_music(const Scm& scm, int k) {
    const auto n = static_cast<int>(scm.size());
    if (k < 1 || k >= n) throw DomainError("root_music: need 1 <= k <= n-1");
    if (!scm.mat.allFinite()) throw EstimationFailure("root_music: non-finite covariance");
    const EigenSplit split = eig_hermitian(scm, k);
    std::vector<cplx> roots = polynomial_roots(root_music_polynomial(split.noise));
    for (const cplx& r : roots)
        if (!std::isfinite(r.real()) || !std::isfinite(r.imag()))
            throw EstimationFailure("root_music: non-finite root");
    // Roots come in conjugate-reciprocal pairs; the smaller-modulus half lies
    // inside (or numerically on) the unit circle.
    std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
    roots.resize(roots.size() / 2);
    if (static_cast<int>(roots.size()) < k)
        throw EstimationFailure("root_music: fewer than k admissible roots");
    std::vector<double> thetas;
    for (int i = 0; i < k; ++i) {
        const cplx z = roots[roots.size() - 1 - static_cast<std::size_t>(i)];
        thetas.push_back(angle_from_electrical(std::arg(z) / kPi));
    }
    std::sort(thetas.begin(), thetas.end());
    return {std::move(thetas), "root_music"};
}

/// || arccos(sigma(U_a^H U_b)) ||_2 between the k-dimensional signal subspaces.
inline double principal_angle_distance(const Scm& a, const Scm& b, int k) {
    if (a.size() != b.size()) throw ShapeError("principal_angle_distance: size mismatch");
    const EigenSplit sa = eig_hermitian(a, k);
    const EigenSplit sb = eig_hermitian(b, k);
    // Cosines alone lose precision near zero angle; pair them with sines.
    const CMat cross = sa.signal.adjoint() * sb.signal;
    const CMat resid = sb.signal - sa.signal * cross;
    const RVec cosines = Eigen::JacobiSVD<CMat>(cross).singularValues();  // descending
    const RVec sines = Eigen::JacobiSVD<CMat>(resid).singularValues();
    const Eigen::Index n = cosines.size();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ang = std::atan2(sines(n - 1 - i), cosines(i));
        acc += ang * ang;
    }
    return std::sqrt(acc);
}

/// Classical baseline: sample SCM -> co-array augmentation -> Root-MUSIC.
inline DoaEstimate coarray_root_music(const CMat& y, const ArrayGeometry& geom, int k) {
    DoaEstimate est = root_music(coarray_augment(sample_scm(y), geom), k);
    est.method = "coarray_rootmusic";
    return est;
}

}  // namespace snapdoa
