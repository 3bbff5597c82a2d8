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


#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "snapdoa/dataset.hpp"

using namespace snapdoa;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("snapdoa_test_" + name)).string();
}

Dataset small_dataset() {
    const auto geom = ArrayGeometry::preset("mra5");
    ScenarioSpec spec;
    Dataset ds;
    ds.header = {5, 8, 4, 0, Modulation::qam16};
    for (int i = 0; i < 6; ++i) {
        spec.k = 1 + i % 4;
        ds.records.push_back(to_record(draw_batch(geom, spec, 8, 5.0, 100 + i)));
    }
    return ds;
}

}  // namespace

TEST(Dataset, RoundTrip) {
    const Dataset ds = small_dataset();
    const std::string path = tmp_path("rt.bin");
    write_dataset(path, ds);
    const Dataset back = read_dataset(path);
    EXPECT_EQ(back.header.m, 5U);
    EXPECT_EQ(back.header.t, 8U);
    EXPECT_EQ(back.header.k_max, 4U);
    EXPECT_EQ(back.header.record_count, 6U);
    EXPECT_EQ(back.header.modulation, Modulation::qam16);
    ASSERT_EQ(back.records.size(), ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        EXPECT_EQ(back.records[i].doas, ds.records[i].doas);
        EXPECT_EQ(back.records[i].powers, ds.records[i].powers);
        EXPECT_EQ(back.records[i].y, ds.records[i].y);
    }
    std::filesystem::remove(path);
}

TEST(Dataset, ByteLayout) {
    Dataset ds;
    ds.header = {1, 1, 1, 0, Modulation::qpsk};
    Record r{{0.5}, {1.0}, CMat::Constant(1, 1, cplx(1.5, -2.0))};
    ds.records.push_back(r);
    const std::string path = tmp_path("layout.bin");
    write_dataset(path, ds);
    std::ifstream is(path, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    ASSERT_EQ(bytes.size(), 8U + 16 + 1 + 2 + 8 + 8 + 8);
    EXPECT_EQ(bytes.substr(0, 8), "SNAPDOA1");
    EXPECT_EQ(bytes[8], 1);                  // m
    EXPECT_EQ(bytes[20], 1);                 // record_count
    EXPECT_EQ(bytes[24], 1);                 // modulation code
    EXPECT_EQ(bytes[25], 1);                 // k (u16)
    float re = 0, im = 0;
    std::memcpy(&re, bytes.data() + 43, 4);
    std::memcpy(&im, bytes.data() + 47, 4);
    EXPECT_EQ(re, 1.5F);
    EXPECT_EQ(im, -2.0F);
    std::filesystem::remove(path);
}

TEST(Dataset, RejectsBadInput) {
    std::istringstream junk("NOTADATASET.....................");
    EXPECT_THROW(read_header(junk), IoError);
    EXPECT_THROW(read_dataset(tmp_path("missing.bin")), IoError);

    Dataset ds = small_dataset();
    ds.header.k_max = 2;
    EXPECT_THROW(write_dataset(tmp_path("bad.bin"), ds), MismatchError);

    ds = small_dataset();
    const std::string path = tmp_path("trunc.bin");
    write_dataset(path, ds);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
    EXPECT_THROW(read_dataset(path), IoError);
    std::filesystem::remove(path);
    std::filesystem::remove(tmp_path("bad.bin"));
}

TEST(Dataset, QuantizeIsIdempotent) {
    Rng rng(1);
    CMat y = CMat::Random(3, 4);
    const CMat q = quantize_f32(y);
    EXPECT_EQ(quantize_f32(q), q);
    EXPECT_LT((q - y).cwiseAbs().maxCoeff(), 1e-7);
}
