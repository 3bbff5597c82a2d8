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

// JSON run configurations for the command-line tool. Every object is read
// through a Section, which records the keys it hands out; finish() rejects
// anything left over, so a misspelt key is an error rather than a silent
// default.

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "snapdoa/beam.hpp"
#include "snapdoa/bench.hpp"
#include "snapdoa/core.hpp"
#include "snapdoa/geometry.hpp"
#include "snapdoa/sigsim.hpp"
#include "snapdoa/snap_tf.hpp"

namespace snapdoa::config {

using Json = nlohmann::json;

inline Json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    try {
        return Json::parse(is);
    } catch (const Json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

class Section {
public:
    Section(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    T get(const std::string& key, const T& fallback) {
        if (!j_.contains(key)) return fallback;
        return require<T>(key);
    }

    template <class T>
    T require(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
        try {
            return j_.at(key).get<T>();
        } catch (const Json::exception&) {
            throw ConfigError(where_ + ": key '" + key + "' has the wrong type");
        }
    }

    const Json& raw(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
        return j_.at(key);
    }

    Section child(const std::string& key) { return Section(raw(key), where_ + "." + key); }

    void finish() const {
        for (const auto& item : j_.items())
            if (!used_.contains(item.key())) throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> used_;
};

/// A preset name ("mra5", "ula64", ...) or a literal 1-based index list.
inline ArrayGeometry parse_geometry(const Json& j) {
    try {
        if (j.is_string()) return ArrayGeometry::preset(j.get<std::string>());
        if (j.is_array()) return ArrayGeometry(j.get<std::vector<int>>());
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    } catch (const Json::exception&) {
    }
    throw ConfigError("geometry: expected a preset name or an index list");
}

/// A number (fixed) or a [lo, hi] pair (uniform per record).
struct SnrRange {
    double lo = 10.0;
    double hi = 10.0;
};

inline SnrRange parse_snr(const Json& j) {
    if (j.is_number()) return {j.get<double>(), j.get<double>()};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        SnrRange r{j[0].get<double>(), j[1].get<double>()};
        if (r.lo > r.hi) throw ConfigError("snr_db: lo > hi");
        return r;
    }
    throw ConfigError("snr_db: expected a number or [lo, hi]");
}

template <class E, class F>
E parse_enum(Section& s, const std::string& key, E fallback, F&& parse) {
    if (!s.has(key)) return fallback;
    return parse(s.require<std::string>(key));
}

// ---------------------------------------------------------------------------

struct GenDataConfig {
    std::string output;
    ArrayGeometry geometry = ArrayGeometry::preset("mra5");
    int records = 10000;
    int k_lo = 3;
    int k_hi = 3;
    int k_max = 9;
    int t = 50;
    SnrRange snr{0.0, 20.0};
    ScenarioSpec scenario;
    std::uint64_t seed = 0;
};

inline GenDataConfig parse_gen_data(const Json& j) {
    Section s(j, "gen-data");
    GenDataConfig c;
    c.output = s.require<std::string>("output");
    if (s.has("geometry")) c.geometry = parse_geometry(s.raw("geometry"));
    c.records = s.get("records", c.records);
    if (s.has("k") && s.has("k_range")) throw ConfigError("gen-data: give either k or k_range");
    if (s.has("k")) c.k_lo = c.k_hi = s.require<int>("k");
    if (s.has("k_range")) {
        const auto r = s.require<std::vector<int>>("k_range");
        if (r.size() != 2 || r[0] > r[1]) throw ConfigError("gen-data: k_range must be [lo, hi]");
        c.k_lo = r[0];
        c.k_hi = r[1];
    }
    c.k_max = s.get("k_max", c.k_max);
    c.t = s.get("t", c.t);
    if (s.has("snr_db")) c.snr = parse_snr(s.raw("snr_db"));
    c.scenario.modulation = parse_enum(s, "modulation", c.scenario.modulation, parse_modulation);
    c.scenario.power_ratio = s.get("power_ratio", c.scenario.power_ratio);
    c.scenario.delta_min = deg2rad(s.get("delta_min_deg", rad2deg(c.scenario.delta_min)));
    c.scenario.coherent_group_sizes = s.get("coherent_groups", c.scenario.coherent_group_sizes);
    c.scenario.alpha = s.get("alpha", 1.0);
    c.seed = s.get<std::uint64_t>("seed", 0);
    s.finish();
    if (c.records < 1 || c.t < 1 || c.k_lo < 1) throw ConfigError("gen-data: records, t and k must be >= 1");
    if (c.k_hi > c.k_max) throw ConfigError("gen-data: k exceeds k_max");
    return c;
}

/// Record i gets K = k_lo + (i mod span), an SNR and a scenario drawn from
/// derive_seed(seed, {i}).
inline Dataset generate_dataset(const GenDataConfig& c, int threads = 1) {
    Dataset ds;
    ds.header = {static_cast<std::uint32_t>(c.geometry.m()), static_cast<std::uint32_t>(c.t),
                 static_cast<std::uint32_t>(c.k_max), static_cast<std::uint32_t>(c.records), c.scenario.modulation};
    ds.records.resize(static_cast<std::size_t>(c.records));
    const int span = c.k_hi - c.k_lo + 1;
    parallel_for(ds.records.size(), threads, [&](std::size_t i) {
        ScenarioSpec spec = c.scenario;
        spec.k = c.k_lo + static_cast<int>(i % static_cast<std::size_t>(span));
        Rng rng = make_rng(c.seed, {i});
        const double snr = c.snr.lo == c.snr.hi ? c.snr.lo : std::uniform_real_distribution<double>(c.snr.lo, c.snr.hi)(rng);
        ds.records[i] = to_record(synthesize(c.geometry, draw_sources(spec, rng), c.t, snr, rng));
    });
    return ds;
}

// ---------------------------------------------------------------------------

struct TrainJob {
    std::string dataset;
    std::string validation;  // optional
    std::string checkpoint;
    std::string curve;       // optional CSV
    std::string state;       // optional resume file
    bool resume = false;
    SnapTfConfig model;
    TrainConfig train;
};

inline TrainJob parse_train(const Json& j) {
    Section s(j, "train");
    TrainJob job;
    job.dataset = s.require<std::string>("dataset");
    job.validation = s.get<std::string>("validation", "");
    job.checkpoint = s.require<std::string>("checkpoint");
    job.curve = s.get<std::string>("curve", "");
    job.state = s.get<std::string>("state", "");
    job.resume = s.get("resume", false);
    if (job.resume && job.state.empty()) throw ConfigError("train: resume needs a state path");
    auto& m = job.model;
    m.l = s.get("layers", m.l);
    m.d_attn = s.get("d_attn", m.d_attn);
    m.d_model = s.get("d_model", m.d_attn);
    m.d_ff = s.get("d_ff", m.d_ff);
    m.hidden_out = s.get("hidden_out", m.hidden_out);
    m.k_max = s.get("k_max", m.k_max);
    auto& t = job.train;
    t.batch_size = s.get("batch_size", t.batch_size);
    t.epochs = s.get("epochs", t.epochs);
    t.lr_max = s.get("lr_max", t.lr_max);
    t.seed = s.get<std::uint64_t>("seed", t.seed);
    t.loss_mask = s.get("loss_mask", t.loss_mask);
    t.optimizer = parse_enum(s, "optimizer", t.optimizer, nn::parse_optimizer);
    t.micro_batch = s.get("micro_batch", t.micro_batch);
    t.precision = parse_enum(s, "precision", t.precision, parse_precision);
    t.stop_after = s.get("stop_after", t.stop_after);
    s.finish();
    if (t.epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (t.batch_size < 1 || t.micro_batch < 1) throw ConfigError("train: batch sizes must be >= 1");
    if (!(t.lr_max >= 0.0)) throw ConfigError("train: lr_max must be >= 0");
    return job;
}

// ---------------------------------------------------------------------------

struct EvalJob {
    std::string output;
    std::vector<std::string> methods{"coarray_rootmusic"};
    std::string checkpoint;  // needed by snap_tf
    SweepSpec sweep;
    std::optional<GeneralizationAxis> generalization;
    std::vector<int> t_grid{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
};

inline EvalJob parse_eval(const Json& j) {
    Section s(j, "eval");
    EvalJob job;
    job.output = s.require<std::string>("output");
    job.methods = s.get("methods", job.methods);
    job.checkpoint = s.get<std::string>("checkpoint", "");
    if (s.has("generalization")) job.generalization = parse_axis(s.require<std::string>("generalization"));
    job.t_grid = s.get("t_grid", job.t_grid);
    job.sweep.master_seed = s.get<std::uint64_t>("seed", 0);
    if (s.has("sweep")) {
        Section w = s.child("sweep");
        auto& sw = job.sweep;
        sw.snr_grid = w.get("snr_db", sw.snr_grid);
        sw.k_list = w.get("k", sw.k_list);
        sw.t = w.get("t", sw.t);
        sw.trials = w.get("trials", sw.trials);
        if (w.has("geometry")) sw.geometry = parse_geometry(w.raw("geometry"));
        sw.modulation = parse_enum(w, "modulation", sw.modulation, parse_modulation);
        sw.coherent_group_sizes = w.get("coherent_groups", sw.coherent_group_sizes);
        sw.power_ratio = w.get("power_ratio", sw.power_ratio);
        w.finish();
    }
    s.finish();
    if (job.methods.empty()) throw ConfigError("eval: methods must be nonempty");
    for (const auto& m : job.methods) {
        if (m != "coarray_rootmusic" && m != "snap_tf") throw ConfigError("eval: unknown method " + m);
        if (m == "snap_tf" && job.checkpoint.empty()) throw ConfigError("eval: snap_tf needs a checkpoint");
    }
    job.sweep.validate();
    return job;
}

// ---------------------------------------------------------------------------

struct BeamJob {
    std::string output;
    BeamScenario scenario;
    std::string checkpoint;  // doa_error.model == "checkpoint"
};

inline BeamJob parse_beam(const Json& j) {
    Section s(j, "beam-sim");
    BeamJob job;
    auto& sc = job.scenario;
    job.output = s.require<std::string>("output");
    sc.m = s.get("m", sc.m);
    sc.k = s.get("k", sc.k);
    sc.t = s.get("t", sc.t);
    sc.t_c_grid = s.get("t_c", sc.t_c_grid);
    sc.sigma_mis_deg = s.get("sigma_mis_deg", sc.sigma_mis_deg);
    sc.delta_deg = s.get("delta_deg", sc.delta_deg);
    if (s.has("schemes")) {
        sc.schemes.clear();
        for (const auto& name : s.require<std::vector<std::string>>("schemes")) sc.schemes.push_back(parse_scheme(name));
    }
    sc.snr_dl_db = s.get("snr_dl_db", sc.snr_dl_db);
    sc.pilots = s.get("pilots", sc.pilots);
    sc.mismatch = parse_enum(s, "mismatch", sc.mismatch, parse_mismatch);
    sc.trials = s.get("trials", sc.trials);
    sc.master_seed = s.get<std::uint64_t>("seed", 0);
    if (s.has("doa_error")) {
        Section e = s.child("doa_error");
        const auto model = e.get<std::string>("model", "synthetic");
        if (model == "synthetic") {
            sc.error_kind = DoaErrorKind::synthetic;
            sc.rmse_rad = e.get("rmse_rad", sc.rmse_rad);
        } else if (model == "baseline" || model == "checkpoint") {
            sc.error_kind = DoaErrorKind::estimator;
            sc.snr_ul_db = e.get("snr_ul_db", sc.snr_ul_db);
            sc.calibration_trials = e.get("calibration_trials", sc.calibration_trials);
            sc.modulation = parse_enum(e, "modulation", sc.modulation, parse_modulation);
            if (model == "checkpoint") job.checkpoint = e.require<std::string>("checkpoint");
        } else {
            throw ConfigError("beam-sim: unknown doa_error model " + model);
        }
        e.finish();
    }
    s.finish();
    sc.validate();
    return job;
}

}  // namespace snapdoa::config
