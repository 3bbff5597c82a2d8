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

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace snapdoa {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

// Error hierarchy. The CLI maps each family onto a distinct exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Incompatible tensor / matrix / vector dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Geometry whose difference co-array has holes.
class UnsupportedGeometry : public Error {
public:
    using Error::Error;
};

/// A numerical routine could not produce the requested output.
class EstimationFailure : public Error {
public:
    using Error::Error;
};

/// Invalid or unknown configuration keys and values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Data and model (or two data sources) disagree on dimensions.
class MismatchError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace snapdoa
