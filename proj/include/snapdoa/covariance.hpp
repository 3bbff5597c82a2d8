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

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "snapdoa/core.hpp"
#include "snapdoa/geometry.hpp"

namespace snapdoa {

enum class ScmKind { sample, noiseless, augmented };

struct Scm {
    CMat mat;
    ScmKind kind = ScmKind::sample;

    Eigen::Index size() const { return mat.rows(); }
};

/// (1/T) Y Y^H.
inline Scm sample_scm(const CMat& y) {
    if (y.cols() < 1) throw DomainError("sample_scm: need at least one snapshot");
    CMat r = (y * y.adjoint()) / static_cast<double>(y.cols());
    // Symmetrize to remove rounding asymmetry from the product.
    r = 0.5 * (r + r.adjoint()).eval();
    return {std::move(r), ScmKind::sample};
}

/// A diag(p) A^H.
inline Scm noiseless_scm(const ArrayGeometry& geom, std::span<const double> thetas,
                         std::span<const double> powers) {
    if (thetas.size() != powers.size()) throw ShapeError("noiseless_scm: one power per angle");
    const CMat a = response_matrix(geom, thetas);
    RVec p(static_cast<Eigen::Index>(powers.size()));
    for (std::size_t i = 0; i < powers.size(); ++i) p(static_cast<Eigen::Index>(i)) = powers[i];
    CMat r = a * p.asDiagonal() * a.adjoint();
    r = 0.5 * (r + r.adjoint()).eval();
    return {std::move(r), ScmKind::noiseless};
}

/// Hermitian Toeplitz matrix with first column r; r[0] is forced real.
inline Scm toeplitz_from_lags(const CVec& r) {
    const Eigen::Index n = r.size();
    if (n < 1) throw DomainError("toeplitz_from_lags: empty lag vector");
    CMat t(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j)
                t(i, j) = r(0).real();
            else if (i > j)
                t(i, j) = r(i - j);
            else
                t(i, j) = std::conj(r(j - i));
        }
    return {std::move(t), ScmKind::augmented};
}

/// First column of a (Hermitian Toeplitz) matrix.
inline CVec lags_of(const CMat& t) { return t.col(0); }

/// Redundancy-averaged lag estimates r[l] = mean{ R[i,j] : idx_i - idx_j = l }.
inline CVec coarray_lags(const CMat& scm_sla, const ArrayGeometry& geom) {
    if (scm_sla.rows() != geom.m() || scm_sla.cols() != geom.m())
        throw ShapeError("coarray_augment: SCM size must equal the antenna count");
    if (!difference_coarray(geom).contiguous)
        throw UnsupportedGeometry("coarray_augment: difference co-array has holes");
    const int n = geom.aperture();
    CVec sum = CVec::Zero(n);
    std::vector<int> count(static_cast<std::size_t>(n), 0);
    const auto& idx = geom.indices();
    for (int i = 0; i < geom.m(); ++i)
        for (int j = 0; j < geom.m(); ++j) {
            const int lag = idx[static_cast<std::size_t>(i)] - idx[static_cast<std::size_t>(j)];
            if (lag < 0) continue;
            sum(lag) += scm_sla(i, j);
            ++count[static_cast<std::size_t>(lag)];
        }
    for (int l = 0; l < n; ++l) sum(l) /= static_cast<double>(count[static_cast<std::size_t>(l)]);
    return sum;
}

/// Virtual-ULA covariance from a sparse-array SCM. With subtract_noise, the
/// given noise power is removed from lag 0 first (off by default).
inline Scm coarray_augment(const Scm& scm_sla, const ArrayGeometry& geom, double subtract_noise = 0.0) {
    CVec r = coarray_lags(scm_sla.mat, geom);
    r(0) -= subtract_noise;
    return toeplitz_from_lags(r);
}

}  // namespace snapdoa
