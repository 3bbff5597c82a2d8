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

// SNAPDOA1 dataset files (little-endian):
//
//   "SNAPDOA1"                       8 bytes
//   m, t, k_max, record_count        u32 x 4
//   modulation code                  u8 (0 gaussian, 1 qpsk, 2 qam16, 3 mixed)
//   record_count x {
//     k                              u16
//     doas                           f64 x k, ascending, radians
//     powers                         f64 x k
//     snapshots                      f32 x 2*m*t, (re, im) interleaved,
//                                    column-major (snapshot by snapshot)
//   }

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "snapdoa/core.hpp"
#include "snapdoa/sigsim.hpp"

namespace snapdoa {

inline constexpr std::array<char, 8> kDatasetMagic = {'S', 'N', 'A', 'P', 'D', 'O', 'A', '1'};

struct Record {
    std::vector<double> doas;
    std::vector<double> powers;
    CMat y;  // values are exactly representable in f32

    int k() const { return static_cast<int>(doas.size()); }
};

struct DatasetHeader {
    std::uint32_t m = 0;
    std::uint32_t t = 0;
    std::uint32_t k_max = 0;
    std::uint32_t record_count = 0;
    Modulation modulation = Modulation::gaussian;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Record> records;
};

namespace io {

static_assert(std::endian::native == std::endian::little, "SNAPDOA/SNAPTF files assume a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("unexpected end of file");
    return v;
}

}  // namespace io

/// Rounds a snapshot matrix to the f32 values it will have on disk.
inline CMat quantize_f32(const CMat& y) {
    CMat out(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        out(i) = cplx(static_cast<float>(y(i).real()), static_cast<float>(y(i).imag()));
    return out;
}

inline Record to_record(const SnapshotBatch& b) {
    return {b.truth.thetas, b.truth.powers, quantize_f32(b.y)};
}

inline void write_header(std::ostream& os, const DatasetHeader& h) {
    os.write(kDatasetMagic.data(), kDatasetMagic.size());
    io::put(os, h.m);
    io::put(os, h.t);
    io::put(os, h.k_max);
    io::put(os, h.record_count);
    io::put(os, static_cast<std::uint8_t>(h.modulation));
}

inline void write_record(std::ostream& os, const DatasetHeader& h, const Record& r) {
    if (r.y.rows() != static_cast<Eigen::Index>(h.m) || r.y.cols() != static_cast<Eigen::Index>(h.t))
        throw MismatchError("dataset: record snapshot shape differs from header");
    if (r.k() < 1 || r.k() > static_cast<int>(h.k_max) || r.powers.size() != r.doas.size())
        throw MismatchError("dataset: record source count out of range");
    io::put(os, static_cast<std::uint16_t>(r.k()));
    for (double d : r.doas) io::put(os, d);
    for (double p : r.powers) io::put(os, p);
    for (Eigen::Index c = 0; c < r.y.cols(); ++c)
        for (Eigen::Index i = 0; i < r.y.rows(); ++i) {
            io::put(os, static_cast<float>(r.y(i, c).real()));
            io::put(os, static_cast<float>(r.y(i, c).imag()));
        }
}

inline void write_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    DatasetHeader h = ds.header;
    h.record_count = static_cast<std::uint32_t>(ds.records.size());
    write_header(os, h);
    for (const auto& r : ds.records) write_record(os, h, r);
    if (!os) throw IoError("write failed: " + path);
}

inline DatasetHeader read_header(std::istream& is) {
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kDatasetMagic) throw IoError("not a SNAPDOA1 file");
    DatasetHeader h;
    h.m = io::get<std::uint32_t>(is);
    h.t = io::get<std::uint32_t>(is);
    h.k_max = io::get<std::uint32_t>(is);
    h.record_count = io::get<std::uint32_t>(is);
    const auto code = io::get<std::uint8_t>(is);
    if (code > 3) throw IoError("dataset: bad modulation code");
    h.modulation = static_cast<Modulation>(code);
    return h;
}

inline Record read_record(std::istream& is, const DatasetHeader& h) {
    Record r;
    const int k = io::get<std::uint16_t>(is);
    if (k < 1 || k > static_cast<int>(h.k_max)) throw IoError("dataset: record k out of range");
    r.doas.resize(static_cast<std::size_t>(k));
    r.powers.resize(static_cast<std::size_t>(k));
    for (double& d : r.doas) d = io::get<double>(is);
    for (double& p : r.powers) p = io::get<double>(is);
    r.y.resize(h.m, h.t);
    for (Eigen::Index c = 0; c < r.y.cols(); ++c)
        for (Eigen::Index i = 0; i < r.y.rows(); ++i) {
            const float re = io::get<float>(is);
            const float im = io::get<float>(is);
            r.y(i, c) = cplx(re, im);
        }
    return r;
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    Dataset ds;
    ds.header = read_header(is);
    ds.records.reserve(ds.header.record_count);
    for (std::uint32_t i = 0; i < ds.header.record_count; ++i) ds.records.push_back(read_record(is, ds.header));
    return ds;
}

inline DatasetHeader read_dataset_header(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    return read_header(is);
}

}  // namespace snapdoa
