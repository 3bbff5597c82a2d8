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

// snapdoa: dataset generation, training, evaluation and beam-management
// simulation from JSON configs.
//
// Exit codes: 0 ok, 1 I/O or other failure, 2 bad configuration,
// 3 data/model mismatch, 4 numerical failure.

#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "snapdoa/beam.hpp"
#include "snapdoa/bench.hpp"
#include "snapdoa/config.hpp"
#include "snapdoa/dataset.hpp"
#include "snapdoa/snap_tf.hpp"

namespace {

using namespace snapdoa;

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kMismatch = 3, kNumerical = 4 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string output;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
    cmd->add_option("--threads", c.threads, "worker threads (default: SNAPDOA_THREADS, else all cores)");
    cmd->add_option("-o,--output", c.output, "output path (overrides the config)");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    return os;
}

int cmd_gen_data(const Common& c) {
    auto cfg = config::parse_gen_data(config::load_json(c.config));
    if (c.seed) cfg.seed = *c.seed;
    if (!c.output.empty()) cfg.output = c.output;
    const Dataset ds = config::generate_dataset(cfg, resolve_threads(c.threads));
    write_dataset(cfg.output, ds);
    std::fprintf(stderr, "wrote %u records (m=%u, t=%u) to %s\n", ds.header.record_count, ds.header.m, ds.header.t,
                 cfg.output.c_str());
    return kOk;
}

int cmd_train(const Common& c) {
    auto job = config::parse_train(config::load_json(c.config));
    if (c.seed) job.train.seed = *c.seed;
    if (!c.output.empty()) job.checkpoint = c.output;
    job.train.threads = resolve_threads(c.threads);

    const Dataset data = read_dataset(job.dataset);
    std::vector<Record> validation;
    if (!job.validation.empty()) {
        Dataset v = read_dataset(job.validation);
        if (v.header.m != data.header.m) throw MismatchError("validation m differs from training m");
        validation = std::move(v.records);
    }
    job.model.m = static_cast<int>(data.header.m);

    SnapTfModel model;
    TrainState state{0, nn::Optimizer(job.train.optimizer)};
    if (job.resume) {
        model = load_checkpoint(job.checkpoint);
        if (model.config != job.model) throw MismatchError("resume: checkpoint config differs from run config");
        state = load_train_state(job.state);
        if (state.optimizer.kind() != job.train.optimizer) throw MismatchError("resume: optimizer differs");
    } else {
        model = init_model(job.model, derive_seed(job.train.seed, {0x1417}));
    }
    std::fprintf(stderr, "model: %ld parameters, %zu records, epochs %d..%d\n", model.parameter_count(),
                 data.records.size(), state.epochs_done + 1, job.train.epochs);

    std::ofstream curve;
    if (!job.curve.empty()) {
        curve.open(job.curve, job.resume ? std::ios::app : std::ios::trunc);
        if (!curve) throw IoError("cannot open for writing: " + job.curve);
        if (!job.resume) curve << "epoch,train_loss,val_loss,lr\n";
    }
    train(model, data.records, validation, job.train, state, [&](const EpochStats& st) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%d,%.10e,%.10e,%.6e\n", st.epoch, st.train_loss, st.val_loss, st.lr);
        if (curve.is_open()) curve << buf << std::flush;
        std::fprintf(stderr, "epoch %d train %.6g val %.6g lr %.3g\n", st.epoch, st.train_loss, st.val_loss, st.lr);
        save_checkpoint(job.checkpoint, model);
        if (!job.state.empty()) save_train_state(job.state, state);
    });
    save_checkpoint(job.checkpoint, model);
    if (!job.state.empty()) save_train_state(job.state, state);
    return kOk;
}

int cmd_eval(const Common& c) {
    auto job = config::parse_eval(config::load_json(c.config));
    if (c.seed) job.sweep.master_seed = *c.seed;
    if (!c.output.empty()) job.output = c.output;
    job.sweep.threads = resolve_threads(c.threads);

    std::optional<SnapTfModel> model;
    if (!job.checkpoint.empty()) {
        model = load_checkpoint(job.checkpoint);
        if (model->config.m != job.sweep.geometry.m())
            throw MismatchError("checkpoint was trained for m=" + std::to_string(model->config.m) +
                                " but the sweep geometry has m=" + std::to_string(job.sweep.geometry.m()));
        for (int k : job.sweep.k_list)
            if (k > model->config.k_max) throw MismatchError("sweep k exceeds the checkpoint's k_max");
    }
    std::vector<NamedEstimator> methods;
    for (const auto& name : job.methods)
        methods.push_back(name == "snap_tf" ? snap_tf_estimator(*model) : baseline_estimator());

    const auto pts = job.generalization ? run_generalization(methods, *job.generalization, job.sweep, job.t_grid)
                                        : run_sweep(job.sweep, methods);
    auto os = open_out(job.output);
    write_curve_csv(os, pts);
    std::fprintf(stderr, "wrote %zu curve points to %s\n", pts.size(), job.output.c_str());
    return kOk;
}

int cmd_beam_sim(const Common& c) {
    auto job = config::parse_beam(config::load_json(c.config));
    if (c.seed) job.scenario.master_seed = *c.seed;
    if (!c.output.empty()) job.output = c.output;
    job.scenario.threads = resolve_threads(c.threads);

    std::optional<SnapTfModel> model;
    if (!job.checkpoint.empty()) {
        model = load_checkpoint(job.checkpoint);
        if (model->config.m != job.scenario.m) throw MismatchError("checkpoint m differs from the beam scenario m");
        if (model->config.k_max < job.scenario.k) throw MismatchError("scenario k exceeds the checkpoint's k_max");
        job.scenario.estimator = [&model](const CMat& y, const ArrayGeometry&, int k) { return forward(*model, y, k); };
    }
    const auto rows = run_beam_sim(job.scenario);
    auto os = open_out(job.output);
    write_beam_csv(os, rows);
    std::fprintf(stderr, "wrote %zu rows to %s\n", rows.size(), job.output.c_str());
    return kOk;
}

int cmd_inspect(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    is.seekg(0);
    if (magic == kDatasetMagic) {
        const DatasetHeader h = read_header(is);
        std::printf("dataset %s\n  m %u\n  t %u\n  k_max %u\n  records %u\n  modulation %s\n", path.c_str(), h.m, h.t,
                    h.k_max, h.record_count, std::string(to_string(h.modulation)).c_str());
    } else if (magic == kCheckpointMagic) {
        const SnapTfModel m = read_checkpoint(is);
        const auto& c = m.config;
        std::printf("checkpoint %s\n  layers %d\n  d_model %d\n  d_attn %d\n  d_ff %d\n  hidden_out %d\n  k_max %d\n"
                    "  m %d\n  parameters %ld\n",
                    path.c_str(), c.l, c.d_model, c.d_attn, c.d_ff, c.hidden_out, c.k_max, c.m, m.parameter_count());
    } else if (magic == kStateMagic) {
        is.close();
        TrainState st = load_train_state(path);
        std::printf("train state %s\n  epochs_done %d\n  optimizer %s\n  steps %ld\n", path.c_str(), st.epochs_done,
                    std::string(nn::to_string(st.optimizer.kind())).c_str(), st.optimizer.steps());
    } else {
        throw IoError("unrecognized file: " + path);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"snapdoa: sparse-array DOA estimation from data snapshots"};
    app.require_subcommand(1);
    Common common;
    std::string inspect_path;
    auto* gen = app.add_subcommand("gen-data", "generate a SNAPDOA1 dataset");
    auto* trn = app.add_subcommand("train", "train a snapshot transformer");
    auto* evl = app.add_subcommand("eval", "MSE sweep or generalization curves");
    auto* bms = app.add_subcommand("beam-sim", "downlink beam-management throughput");
    auto* ins = app.add_subcommand("inspect", "print a dataset, checkpoint or train-state header");
    for (auto* cmd : {gen, trn, evl, bms}) add_common(cmd, common);
    ins->add_option("file", inspect_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(common);
        if (trn->parsed()) return cmd_train(common);
        if (evl->parsed()) return cmd_eval(common);
        if (bms->parsed()) return cmd_beam_sim(common);
        if (ins->parsed()) return cmd_inspect(inspect_path);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const UnsupportedGeometry& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const MismatchError& e) {
        std::fprintf(stderr, "mismatch: %s\n", e.what());
        return kMismatch;
    } catch (const EstimationFailure& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailure;
    }
    return kFailure;
}
