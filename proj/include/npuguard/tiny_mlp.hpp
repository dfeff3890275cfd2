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

/**
 * @file tiny_mlp.hpp
 * @brief Small dense classifier on synthetic Gaussian blobs.
 *
 * Hidden layers use ReLU, the last layer produces logits. Training is plain
 * minibatch SGD on softmax cross-entropy in binary32 with a fixed loop order,
 * so a given seed always yields the same weights. Quantisation is symmetric
 * per tensor: int8 weights and activations, int32 biases.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "npuguard/matrix.hpp"

namespace npuguard {

struct BlobSpec {
  std::size_t features = 64;
  std::size_t classes = 10;
  double separation = 1.0;  // std-dev of the class centres
  double noise = 1.0;       // std-dev of samples around their centre
  std::uint64_t seed = 7;
};

struct Dataset {
  Matrix<float> x;  // samples x features
  std::vector<std::uint32_t> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
};

/// Draws `samples` points; `split` selects an independent sample stream
/// while the class centres depend on `spec.seed` only. Labels cycle through
/// the classes so every split is balanced.
Dataset make_blobs(const BlobSpec& spec, std::uint64_t split, std::size_t samples);

struct DenseLayer {
  Matrix<float> w;  // in x out
  std::vector<float> b;

  std::size_t in() const { return w.rows(); }
  std::size_t out() const { return w.cols(); }
};

struct Mlp {
  std::vector<DenseLayer> layers;

  /// Layer widths including the input, e.g. {64, 32, 10}.
  std::vector<std::size_t> dims() const;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch = 32;
  float learning_rate = 0.05f;
  std::uint64_t seed = 11;
};

/// Throws std::invalid_argument for fewer than two dims or a mismatch with
/// the dataset.
Mlp train_mlp(const Dataset& data, std::span<const std::size_t> dims, const TrainConfig& cfg);

/// Logits for one sample: acc = b[j], then acc += x[k] * w[k][j] for k ascending.
std::vector<float> mlp_forward(const Mlp& m, std::span<const float> x);
/// Index of the largest logit; NaN never wins; ties keep the lowest index.
std::size_t argmax(std::span<const float> v);
double mlp_accuracy(const Mlp& m, const Dataset& data);

struct QuantLayer {
  Matrix<std::int8_t> w;
  std::vector<std::int32_t> b;  // in units of in_scale * w_scale
  float in_scale = 1.0f;
  float w_scale = 1.0f;
  float out_scale = 1.0f;  // hidden layers only
  /// Hidden: in_scale * w_scale / out_scale (requantisation).
  /// Last: in_scale * w_scale (dequantisation of the logits).
  float multiplier = 1.0f;
  bool relu = true;
};

struct QuantMlp {
  std::vector<QuantLayer> layers;
  float input_scale = 1.0f;
};

/// Scales come from max-abs calibration over `calibration`.
QuantMlp quantize_mlp(const Mlp& m, const Dataset& calibration);

/// Round half to even, saturate to [-128, 127].
std::int8_t saturate_int8(float v);
std::vector<std::int8_t> quantize_input(std::span<const float> x, float scale);

/// Integer reference: acc = b + sum x*w (int32, ascending k); hidden layers
/// requantise with `multiplier` then apply ReLU; returns dequantised logits.
std::vector<float> quant_forward(const QuantMlp& q, std::span<const std::int8_t> x);
double quant_accuracy(const QuantMlp& q, const Dataset& data);

}  // namespace npuguard
