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

#include "npuguard/tiny_mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "npuguard/rng.hpp"

namespace npuguard {

namespace {
constexpr std::uint64_t kCentreStream = 0xCE;
constexpr std::uint64_t kSampleStream = 0x5A;
constexpr std::uint64_t kInitStream = 0x1A;
constexpr std::uint64_t kShuffleStream = 0x5F;
}  // namespace

Dataset make_blobs(const BlobSpec& spec, std::uint64_t split, std::size_t samples) {
  if (spec.features == 0 || spec.classes < 2) throw std::invalid_argument("blobs need features and >= 2 classes");
  CounterRng centre_rng(spec.seed, kCentreStream);
  Matrix<float> centres(spec.classes, spec.features);
  for (auto& c : centres.flat()) c = static_cast<float>(centre_rng.normal() * spec.separation);

  CounterRng rng(spec.seed, kSampleStream, split);
  Dataset d;
  d.classes = spec.classes;
  d.x = Matrix<float>(samples, spec.features);
  d.labels.resize(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto label = static_cast<std::uint32_t>(s % spec.classes);
    d.labels[s] = label;
    for (std::size_t f = 0; f < spec.features; ++f)
      d.x(s, f) = centres(label, f) + static_cast<float>(rng.normal() * spec.noise);
  }
  return d;
}

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> out;
  if (layers.empty()) return out;
  out.push_back(layers.front().in());
  for (const auto& l : layers) out.push_back(l.out());
  return out;
}

std::vector<float> mlp_forward(const Mlp& m, std::span<const float> x) {
  std::vector<float> cur(x.begin(), x.end());
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const auto& l = m.layers[li];
    std::vector<float> next(l.out());
    for (std::size_t j = 0; j < l.out(); ++j) {
      float acc = l.b[j];
      for (std::size_t k = 0; k < l.in(); ++k) acc += cur[k] * l.w(k, j);
      next[j] = (li + 1 < m.layers.size()) ? std::max(acc, 0.0f) : acc;
    }
    cur = std::move(next);
  }
  return cur;
}

std::size_t argmax(std::span<const float> v) {
  std::size_t best = 0;
  bool found = false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) continue;
    if (!found || v[i] > v[best]) {
      best = i;
      found = true;
    }
  }
  return best;
}

double mlp_accuracy(const Mlp& m, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t s = 0; s < data.size(); ++s)
    if (argmax(mlp_forward(m, data.x.row(s))) == data.labels[s]) ++hits;
  return data.size() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
}

Mlp train_mlp(const Dataset& data, std::span<const std::size_t> dims, const TrainConfig& cfg) {
  if (dims.size() < 2) throw std::invalid_argument("an MLP needs at least an input and an output width");
  if (dims.front() != data.x.cols() || dims.back() != data.classes)
    throw std::invalid_argument("MLP dims do not match the dataset");
  if (cfg.batch == 0) throw std::invalid_argument("batch size must be positive");

  Mlp m;
  CounterRng init(cfg.seed, kInitStream);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer{Matrix<float>(dims[l], dims[l + 1]), std::vector<float>(dims[l + 1], 0.0f)};
    const double he = std::sqrt(2.0 / static_cast<double>(dims[l]));
    for (auto& w : layer.w.flat()) w = static_cast<float>(init.normal() * he);
    m.layers.push_back(std::move(layer));
  }

  const std::size_t nl = m.layers.size();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Matrix<float>> gw;
  std::vector<std::vector<float>> gb;
  for (const auto& l : m.layers) {
    gw.emplace_back(l.in(), l.out());
    gb.emplace_back(l.out(), 0.0f);
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    CounterRng shuffle(cfg.seed, kShuffleStream, epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      for (auto& g : gw) std::fill(g.flat().begin(), g.flat().end(), 0.0f);
      for (auto& g : gb) std::fill(g.begin(), g.end(), 0.0f);

      for (std::size_t p = start; p < end; ++p) {
        const std::size_t s = order[p];
        // Forward, keeping every activation.
        std::vector<std::vector<float>> acts{std::vector<float>(data.x.row(s).begin(), data.x.row(s).end())};
        for (std::size_t li = 0; li < nl; ++li) {
          const auto& l = m.layers[li];
          std::vector<float> next(l.out());
          for (std::size_t j = 0; j < l.out(); ++j) {
            float acc = l.b[j];
            for (std::size_t k = 0; k < l.in(); ++k) acc += acts.back()[k] * l.w(k, j);
            next[j] = (li + 1 < nl) ? std::max(acc, 0.0f) : acc;
          }
          acts.push_back(std::move(next));
        }
        // Softmax cross-entropy gradient on the logits.
        std::vector<float> delta = acts.back();
        const float top = *std::max_element(delta.begin(), delta.end());
        float total = 0.0f;
        for (auto& v : delta) {
          v = std::exp(v - top);
          total += v;
        }
        for (auto& v : delta) v /= total;
        delta[data.labels[s]] -= 1.0f;

        for (std::size_t li = nl; li-- > 0;) {
          const auto& l = m.layers[li];
          const auto& in = acts[li];
          for (std::size_t k = 0; k < l.in(); ++k)
            for (std::size_t j = 0; j < l.out(); ++j) gw[li](k, j) += in[k] * delta[j];
          for (std::size_t j = 0; j < l.out(); ++j) gb[li][j] += delta[j];
          if (li == 0) break;
          std::vector<float> prev(l.in(), 0.0f);
          for (std::size_t k = 0; k < l.in(); ++k) {
            if (in[k] <= 0.0f) continue;  // ReLU gate
            float acc = 0.0f;
            for (std::size_t j = 0; j < l.out(); ++j) acc += l.w(k, j) * delta[j];
            prev[k] = acc;
          }
          delta = std::move(prev);
        }
      }

      const float step = cfg.learning_rate / static_cast<float>(end - start);
      for (std::size_t li = 0; li < nl; ++li) {
        auto w = m.layers[li].w.flat();
        const auto g = gw[li].flat();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * g[i];
        for (std::size_t j = 0; j < m.layers[li].out(); ++j) m.layers[li].b[j] -= step * gb[li][j];
      }
    }
  }
  return m;
}

std::int8_t saturate_int8(float v) {
  const float r = std::nearbyint(v);
  return static_cast<std::int8_t>(std::clamp(r, -128.0f, 127.0f));
}

std::vector<std::int8_t> quantize_input(std::span<const float> x, float scale) {
  std::vector<std::int8_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = saturate_int8(x[i] / scale);
  return out;
}

namespace {

float max_abs(std::span<const float> v) {
  float m = 0.0f;
  for (const float x : v) m = std::max(m, std::abs(x));
  return m;
}

float scale_for(float max_abs_value) { return max_abs_value > 0.0f ? max_abs_value / 127.0f : 1.0f; }

}  // namespace

QuantMlp quantize_mlp(const Mlp& m, const Dataset& calibration) {
  if (m.layers.empty()) throw std::invalid_argument("cannot quantise an empty MLP");
  const std::size_t nl = m.layers.size();
  // Largest activation magnitude seen at the input of every layer.
  std::vector<float> act_max(nl, 0.0f);
  for (std::size_t s = 0; s < calibration.size(); ++s) {
    std::vector<float> cur(calibration.x.row(s).begin(), calibration.x.row(s).end());
    for (std::size_t li = 0; li < nl; ++li) {
      act_max[li] = std::max(act_max[li], max_abs(cur));
      const auto& l = m.layers[li];
      std::vector<float> next(l.out());
      for (std::size_t j = 0; j < l.out(); ++j) {
        float acc = l.b[j];
        for (std::size_t k = 0; k < l.in(); ++k) acc += cur[k] * l.w(k, j);
        next[j] = std::max(acc, 0.0f);
      }
      cur = std::move(next);
    }
  }

  QuantMlp q;
  q.input_scale = scale_for(act_max[0]);
  for (std::size_t li = 0; li < nl; ++li) {
    const auto& l = m.layers[li];
    QuantLayer ql;
    ql.relu = li + 1 < nl;
    ql.in_scale = scale_for(act_max[li]);
    ql.w_scale = scale_for(max_abs(l.w.flat()));
    ql.w = Matrix<std::int8_t>(l.in(), l.out());
    for (std::size_t k = 0; k < l.in(); ++k)
      for (std::size_t j = 0; j < l.out(); ++j) ql.w(k, j) = saturate_int8(l.w(k, j) / ql.w_scale);
    const float acc_scale = ql.in_scale * ql.w_scale;
    ql.b.resize(l.out());
    for (std::size_t j = 0; j < l.out(); ++j) ql.b[j] = static_cast<std::int32_t>(std::nearbyint(l.b[j] / acc_scale));
    if (ql.relu) {
      ql.out_scale = scale_for(act_max[li + 1]);
      ql.multiplier = acc_scale / ql.out_scale;
    } else {
      ql.out_scale = 1.0f;
      ql.multiplier = acc_scale;
    }
    q.layers.push_back(std::move(ql));
  }
  return q;
}

std::vector<float> quant_forward(const QuantMlp& q, std::span<const std::int8_t> x) {
  std::vector<std::int8_t> cur(x.begin(), x.end());
  for (const auto& l : q.layers) {
    std::vector<std::int32_t> acc(l.b);
    for (std::size_t j = 0; j < l.w.cols(); ++j)
      for (std::size_t k = 0; k < l.w.rows(); ++k)
        acc[j] = static_cast<std::int32_t>(static_cast<std::uint32_t>(acc[j]) +
                                           static_cast<std::uint32_t>(cur[k] * l.w(k, j)));
    if (!l.relu) {
      std::vector<float> logits(acc.size());
      for (std::size_t j = 0; j < acc.size(); ++j) logits[j] = static_cast<float>(acc[j]) * l.multiplier;
      return logits;
    }
    std::vector<std::int8_t> next(acc.size());
    for (std::size_t j = 0; j < acc.size(); ++j)
      next[j] = std::max<std::int8_t>(0, saturate_int8(static_cast<float>(acc[j]) * l.multiplier));
    cur = std::move(next);
  }
  throw std::logic_error("quantised MLP has no output layer");
}

double quant_accuracy(const QuantMlp& q, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t s = 0; s < data.size(); ++s)
    if (argmax(quant_forward(q, quantize_input(data.x.row(s), q.input_scale))) == data.labels[s]) ++hits;
  return data.size() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace npuguard
