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

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snapdoa/core.hpp"

namespace snapdoa {

/// Linear array on a half-wavelength grid. Antenna m sits at indices[m] * d,
/// d = lambda / 2, with indices[0] == 1 and indices.back() == aperture().
class ArrayGeometry {
public:
    ArrayGeometry() = default;

    explicit ArrayGeometry(std::vector<int> indices) : indices_(std::move(indices)) {
        if (indices_.empty()) throw DomainError("geometry: empty index set");
        if (indices_.front() != 1) throw DomainError("geometry: first index must be 1");
        for (std::size_t i = 1; i < indices_.size(); ++i) {
            if (indices_[i] <= indices_[i - 1])
                throw DomainError("geometry: indices must be strictly increasing");
        }
    }

    static ArrayGeometry ula(int n) {
        if (n < 1) throw DomainError("geometry: ULA needs n >= 1");
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
        return ArrayGeometry(std::move(idx));
    }

    /// Named presets: "mra5", "mra79" and "ulaN" (e.g. "ula64").
    static ArrayGeometry preset(std::string_view name) {
        if (name == "mra5") return ArrayGeometry({1, 2, 5, 8, 10});
        // Listed with 14 positions even though it is usually called the 15-element MRA.
        if (name == "mra79")
            return ArrayGeometry({1, 2, 3, 6, 11, 16, 27, 38, 49, 60, 66, 72, 78, 79});
        if (name.starts_with("ula") && name.size() > 3) {
            int n = 0;
            for (char c : name.substr(3)) {
                if (c < '0' || c > '9') throw DomainError("geometry: bad preset " + std::string(name));
                n = n * 10 + (c - '0');
            }
            return ula(n);
        }
        throw DomainError("geometry: unknown preset " + std::string(name));
    }

    const std::vector<int>& indices() const { return indices_; }
    int m() const { return static_cast<int>(indices_.size()); }
    int aperture() const { return indices_.empty() ? 0 : indices_.back(); }
    bool is_ula() const { return m() == aperture(); }

    bool operator==(const ArrayGeometry&) const = default;

private:
    std::vector<int> indices_;
};

/// Electrical angle u(theta) = cos(theta); injective on [0, pi].
inline double electrical_angle(double theta) { return std::cos(theta); }

/// Inverse of electrical_angle; u is clamped to [-1, 1].
inline double angle_from_electrical(double u) { return std::acos(std::clamp(u, -1.0, 1.0)); }

inline void check_angle(double theta) {
    if (!(theta >= 0.0 && theta <= kPi))
        throw DomainError("angle outside [0, pi]: " + std::to_string(theta));
}

/// Steering vector exp(j*pi*(idx-1)*u) built directly from an electrical angle.
inline CVec steering_vector_u(const ArrayGeometry& geom, double u) {
    CVec a(geom.m());
    for (int i = 0; i < geom.m(); ++i) {
        const double phase = kPi * (geom.indices()[static_cast<std::size_t>(i)] - 1) * u;
        a(i) = cplx(std::cos(phase), std::sin(phase));
    }
    return a;
}

inline CVec steering_vector(const ArrayGeometry& geom, double theta) {
    check_angle(theta);
    return steering_vector_u(geom, electrical_angle(theta));
}

inline CMat response_matrix(const ArrayGeometry& geom, std::span<const double> thetas) {
    if (thetas.empty()) throw DomainError("response_matrix: empty angle list");
    CMat a(geom.m(), static_cast<Eigen::Index>(thetas.size()));
    for (std::size_t k = 0; k < thetas.size(); ++k)
        a.col(static_cast<Eigen::Index>(k)) = steering_vector(geom, thetas[k]);
    return a;
}

struct Coarray {
    std::vector<int> lags;
    bool contiguous = false;
};

/// Nonnegative lags |idx_i - idx_j|; negative lags follow by Hermitian symmetry.
inline Coarray difference_coarray(const ArrayGeometry& geom) {
    std::set<int> lags;
    for (int a : geom.indices())
        for (int b : geom.indices()) lags.insert(std::abs(a - b));
    Coarray out{{lags.begin(), lags.end()}, false};
    out.contiguous = static_cast<int>(out.lags.size()) == geom.aperture() &&
                     out.lags.back() == geom.aperture() - 1;
    return out;
}

/// Distinct idx_i + idx_j - 2 over unordered pairs including i == j.
inline std::vector<int> sum_coarray(const ArrayGeometry& geom) {
    std::set<int> sums;
    const auto& idx = geom.indices();
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = i; j < idx.size(); ++j) sums.insert(idx[i] + idx[j] - 2);
    return {sums.begin(), sums.end()};
}

/// Applies the row-selection matrix: out[k] = full[idx_k - 1].
inline CVec select_rows(const ArrayGeometry& geom, const CVec& full) {
    if (full.size() != geom.aperture())
        throw ShapeError("select_rows: expected length " + std::to_string(geom.aperture()));
    CVec out(geom.m());
    for (int k = 0; k < geom.m(); ++k) out(k) = full(geom.indices()[static_cast<std::size_t>(k)] - 1);
    return out;
}

}  // namespace snapdoa
