/*
 * Copyright 2026 The npuguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>

#include "npuguard/tiny_mlp.hpp"

using namespace npuguard;

TEST_SUITE("tiny_mlp") {
  TEST_CASE("blobs are balanced and reproducible") {
    const BlobSpec spec{8, 4, 1.0, 0.5, 3};
    const auto a = make_blobs(spec, 0, 40);
    const auto b = make_blobs(spec, 0, 40);
    CHECK(a.x == b.x);
    CHECK(a.labels == b.labels);
    std::vector<int> count(4, 0);
    for (auto l : a.labels) ++count[l];
    for (int c : count) CHECK(c == 10);
    const auto other = make_blobs(spec, 1, 40);
    CHECK_FALSE(other.x == a.x);
  }

  TEST_CASE("forward pass matches a hand computation") {
    Mlp m;
    DenseLayer l1{Matrix<float>(2, 2), {0.5f, -1.0f}};
    l1.w(0, 0) = 1;
    l1.w(0, 1) = -1;
    l1.w(1, 0) = 2;
    l1.w(1, 1) = 1;
    DenseLayer l2{Matrix<float>(2, 1), {0.25f}};
    l2.w(0, 0) = 1;
    l2.w(1, 0) = 3;
    m.layers = {l1, l2};
    const std::vector<float> x{1.0f, 2.0f};
    // Hidden: [0.5 + 1 + 4, -1 - 1 + 2] = [5.5, 0]; out: 0.25 + 5.5 = 5.75.
    const auto y = mlp_forward(m, x);
    REQUIRE(y.size() == 1);
    CHECK(y[0] == 5.75f);
    CHECK(m.dims() == std::vector<std::size_t>{2, 2, 1});
  }

  TEST_CASE("argmax skips NaN and keeps the first maximum") {
    CHECK(argmax(std::vector<float>{1, 3, 3}) == 1);
    CHECK(argmax(std::vector<float>{NAN, 0.5f, 0.1f}) == 1);
  }

  TEST_CASE("training beats chance and quantisation stays close") {
    const BlobSpec spec{64, 10, 1.0, 2.0, 7};
    const auto train = make_blobs(spec, 0, 1024);
    const auto test = make_blobs(spec, 1, 256);
    const std::vector<std::size_t> dims{64, 32, 10};
    const auto m = train_mlp(train, dims, TrainConfig{});
    const double acc = mlp_accuracy(m, test);
    CHECK(acc > 0.8);
    const auto q = quantize_mlp(m, train);
    CHECK(quant_accuracy(q, test) > acc - 0.05);
    CHECK(train_mlp(train, dims, TrainConfig{}).layers[0].w == m.layers[0].w);
  }

  TEST_CASE("int8 saturation rounds half to even") {
    CHECK(saturate_int8(2.5f) == 2);
    CHECK(saturate_int8(3.5f) == 4);
    CHECK(saturate_int8(-200.0f) == -128);
    CHECK(saturate_int8(1000.0f) == 127);
  }

  TEST_CASE("shape errors") {
    const auto d = make_blobs(BlobSpec{8, 2, 1.0, 1.0, 1}, 0, 8);
    CHECK_THROWS_AS(train_mlp(d, std::vector<std::size_t>{8}, TrainConfig{}), std::invalid_argument);
    CHECK_THROWS_AS(train_mlp(d, std::vector<std::size_t>{4, 2}, TrainConfig{}), std::invalid_argument);
  }
}
