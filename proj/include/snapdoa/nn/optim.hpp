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
#include <string>
#include <string_view>
#include <vector>

#include "snapdoa/core.hpp"

namespace snapdoa::nn {

struct Parameter {
    std::string name;
    RMat value;
    RMat grad;  // empty until gradients are accumulated
};

struct OneCycle {
    double div_factor = 25.0;
    double final_div_factor = 2500.0;
    double pct_start = 0.3;
};

/// Linear warm-up from lr_max/div to lr_max over the first pct_start of the
/// run, then cosine annealing to lr_max/final_div at the last step.
inline double onecycle_lr(long step, long total_steps, double lr_max, const OneCycle& shape = {}) {
    if (total_steps < 1 || step < 0 || step >= total_steps) throw DomainError("onecycle_lr: step out of range");
    const double lo = lr_max / shape.div_factor;
    const double fin = lr_max / shape.final_div_factor;
    if (total_steps == 1) return lo;
    const double peak = shape.pct_start * static_cast<double>(total_steps);
    const auto s = static_cast<double>(step);
    if (s <= peak) return peak <= 0.0 ? lr_max : lo + (lr_max - lo) * s / peak;
    const double last = static_cast<double>(total_steps - 1);
    const double prog = last > peak ? (s - peak) / (last - peak) : 1.0;
    return fin + (lr_max - fin) * 0.5 * (1.0 + std::cos(kPi * prog));
}

/// p <- p - lr * grad, then clears the gradient.
inline void sgd_step(std::vector<Parameter>& params, double lr) {
    for (auto& p : params) {
        if (p.grad.size() == 0) throw DomainError("sgd_step: missing gradient for " + p.name);
        p.value.noalias() -= lr * p.grad;
        p.grad.resize(0, 0);
    }
}

enum class OptimizerKind { sgd, momentum, adam };

inline OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "momentum") return OptimizerKind::momentum;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer: " + std::string(s));
}

inline std::string_view to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::momentum: return "momentum";
        case OptimizerKind::adam: return "adam";
    }
    return "?";
}

/// Stateful update rule. Plain SGD delegates to sgd_step; momentum is
/// heavy-ball (beta 0.9); adam uses the usual (0.9, 0.999, 1e-8).
class Optimizer {
public:
    explicit Optimizer(OptimizerKind kind = OptimizerKind::sgd) : kind_(kind) {}

    OptimizerKind kind() const { return kind_; }
    long steps() const { return t_; }
    std::vector<RMat>& first_moment() { return m_; }
    std::vector<RMat>& second_moment() { return v_; }
    void set_steps(long t) { t_ = t; }

    void step(std::vector<Parameter>& params, double lr) {
        if (kind_ == OptimizerKind::sgd) {
            sgd_step(params, lr);
            ++t_;
            return;
        }
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.push_back(RMat::Zero(p.value.rows(), p.value.cols()));
                if (kind_ == OptimizerKind::adam) v_.push_back(RMat::Zero(p.value.rows(), p.value.cols()));
            }
        }
        ++t_;
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (p.grad.size() == 0) throw DomainError("optimizer: missing gradient for " + p.name);
            if (kind_ == OptimizerKind::momentum) {
                m_[i] = 0.9 * m_[i] + p.grad;
                p.value.noalias() -= lr * m_[i];
            } else {
                constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
                m_[i] = b1 * m_[i] + (1.0 - b1) * p.grad;
                v_[i] = b2 * v_[i] + (1.0 - b2) * p.grad.cwiseAbs2();
                const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
                const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
                p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
            }
            p.grad.resize(0, 0);
        }
    }

private:
    OptimizerKind kind_;
    long t_ = 0;
    std::vector<RMat> m_;
    std::vector<RMat> v_;
};

}  // namespace snapdoa::nn
