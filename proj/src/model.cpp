// Copyright 2026 The mia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "binio.hpp"
#include "rng.hpp"
#include "util.hpp"

namespace mia {

namespace {

constexpr char kClassifierMagic[4] = {'M', 'I', 'A', 'C'};
constexpr std::uint16_t kClassifierVersion = 1;

void forward(const Classifier& clf, std::span<const double> x,
             std::vector<std::vector<double>>& activations) {
  // activations[l] holds the input to layer l; activations.back() the logits.
  activations.resize(clf.layers.size() + 1);
  activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < clf.layers.size(); ++l) {
    const auto& layer = clf.layers[l];
    const std::vector<double>& in = activations[l];
    std::vector<double>& out = activations[l + 1];
    out.assign(layer.out, 0.0);
    for (int r = 0; r < layer.out; ++r) {
      const double* w = layer.weights.data() + static_cast<std::size_t>(r) * layer.in;
      double acc = layer.bias[r];
      for (int c = 0; c < layer.in; ++c) acc += w[c] * in[c];
      out[r] = acc;
    }
    if (l + 1 < clf.layers.size())
      for (double& v : out) v = v > 0.0 ? v : 0.0;  // ReLU
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

std::vector<double> Classifier::logits(std::span<const double> x) const {
  if (layers.empty()) throw std::invalid_argument("classifier has no layers");
  if (static_cast<int>(x.size()) != input_dim())
    throw std::invalid_argument("feature dimension " + std::to_string(x.size()) +
                                " does not match classifier input " + std::to_string(input_dim()));
  std::vector<std::vector<double>> acts;
  forward(*this, x, acts);
  return acts.back();
}

std::vector<double> Classifier::predict_proba(std::span<const double> x) const {
  return softmax(logits(x));
}

std::size_t Classifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

void Classifier::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("classifier save: cannot open " + path);
  out.write(kClassifierMagic, 4);
  write_le<std::uint16_t>(out, kClassifierVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.out));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.in));
    for (double w : l.weights) write_le<double>(out, w);
    for (double b : l.bias) write_le<double>(out, b);
  }
  if (!out) throw IoError("classifier save: write failed for " + path);
}

Classifier Classifier::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("classifier load: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kClassifierMagic, 4) != 0)
    throw FormatError("classifier load: bad magic in " + path);
  const auto version = read_le<std::uint16_t>(in);
  if (version != kClassifierVersion)
    throw FormatError("classifier load: unsupported version " + std::to_string(version));
  const auto n_layers = read_le<std::uint32_t>(in);
  Classifier clf;
  clf.layers.resize(n_layers);
  for (auto& l : clf.layers) {
    l.out = static_cast<int>(read_le<std::uint32_t>(in));
    l.in = static_cast<int>(read_le<std::uint32_t>(in));
    if (l.out <= 0 || l.in <= 0) throw FormatError("classifier load: bad layer shape");
    l.weights.resize(static_cast<std::size_t>(l.out) * l.in);
    for (double& w : l.weights) w = read_le<double>(in);
    l.bias.resize(l.out);
    for (double& b : l.bias) b = read_le<double>(in);
    for (double w : l.weights)
      if (!std::isfinite(w)) throw FormatError("classifier load: non-finite weight");
    for (double b : l.bias)
      if (!std::isfinite(b)) throw FormatError("classifier load: non-finite bias");
  }
  for (std::size_t l = 1; l < clf.layers.size(); ++l)
    if (clf.layers[l].in != clf.layers[l - 1].out)
      throw FormatError("classifier load: layer dimensions do not chain");
  return clf;
}

namespace {

Classifier init_classifier(int input_dim, const std::vector<int>& hidden, int num_classes,
                           std::uint64_t seed) {
  std::vector<int> sizes;
  sizes.push_back(input_dim);
  for (int h : hidden) {
    if (h <= 0) throw std::invalid_argument("hidden layer size must be positive");
    sizes.push_back(h);
  }
  sizes.push_back(num_classes);

  Classifier clf;
  Rng rng(hash_combine(seed, 0x696e6974ULL));  // "init"
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Classifier::Layer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    layer.weights.resize(static_cast<std::size_t>(layer.out) * layer.in);
    for (double& w : layer.weights) w = rng.next_uniform(-a, a);
    layer.bias.assign(layer.out, 0.0);
    clf.layers.push_back(std::move(layer));
  }
  return clf;
}

// Accumulates the gradient of the mean cross-entropy over `indices` into
// `grad` (same flat layout as flatten_parameters). Returns the mean loss.
double backward_batch(const Classifier& clf, const Dataset& data,
                      std::span<const std::size_t> indices, std::vector<double>& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(indices.size());
  double total_loss = 0.0;

  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> deltas(clf.layers.size());
  // Per-layer gradient offsets into the flat vector.
  std::vector<std::size_t> offsets(clf.layers.size());
  std::size_t off = 0;
  for (std::size_t l = 0; l < clf.layers.size(); ++l) {
    offsets[l] = off;
    off += clf.layers[l].weights.size() + clf.layers[l].bias.size();
  }

  for (std::size_t idx : indices) {
    const Instance& inst = data.instances[idx];
    forward(clf, inst.features, acts);
    const std::vector<double> p = softmax(acts.back());
    total_loss += -std::log(std::max(p[inst.label], 1e-300));

    // dL/dlogits = p - onehot(y), scaled by 1/batch.
    const std::size_t last = clf.layers.size() - 1;
    deltas[last] = p;
    deltas[last][inst.label] -= 1.0;
    for (double& v : deltas[last]) v *= inv_b;

    for (std::size_t l = clf.layers.size(); l-- > 0;) {
      const auto& layer = clf.layers[l];
      const std::vector<double>& in = acts[l];
      const std::vector<double>& delta = deltas[l];
      double* gw = grad.data() + offsets[l];
      double* gb = gw + layer.weights.size();
      for (int r = 0; r < layer.out; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        double* grow = gw + static_cast<std::size_t>(r) * layer.in;
        for (int c = 0; c < layer.in; ++c) grow[c] += d * in[c];
        gb[r] += d;
      }
      if (l > 0) {
        // Propagate through the ReLU of the previous layer.
        std::vector<double>& prev = deltas[l - 1];
        prev.assign(layer.in, 0.0);
        for (int r = 0; r < layer.out; ++r) {
          const double d = delta[r];
          if (d == 0.0) continue;
          const double* w = layer.weights.data() + static_cast<std::size_t>(r) * layer.in;
          for (int c = 0; c < layer.in; ++c) prev[c] += d * w[c];
        }
        for (int c = 0; c < layer.in; ++c)
          if (acts[l][c] <= 0.0) prev[c] = 0.0;
      }
    }
  }
  return total_loss * inv_b;
}

}  // namespace

Classifier train(const Dataset& dataset, const TrainConfig& config) {
  if (dataset.instances.empty()) throw std::invalid_argument("train: empty dataset");
  if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (config.learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be > 0");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

  Classifier clf = init_classifier(dataset.dim(), config.hidden_sizes, dataset.num_classes,
                                   config.seed);

  std::vector<double> grad(clf.parameter_count(), 0.0);
  std::vector<double> velocity(clf.parameter_count(), 0.0);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(hash_combine(config.seed, 0x73687566ULL));  // "shuf"

  const std::size_t n = dataset.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      const double mean_loss =
          backward_batch(clf, dataset, {order.data() + start, len}, grad);
      if (!std::isfinite(mean_loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch offset " + std::to_string(start) +
                                 " (diverged; lower the learning rate)");
      std::size_t k = 0;
      for (auto& layer : clf.layers) {
        for (double& w : layer.weights) {
          const double g = grad[k] + config.weight_decay * w;
          velocity[k] = config.momentum * velocity[k] - config.learning_rate * g;
          w += velocity[k];
          ++k;
        }
        for (double& b : layer.bias) {
          velocity[k] = config.momentum * velocity[k] - config.learning_rate * grad[k];
          b += velocity[k];
          ++k;
        }
      }
    }
  }
  return clf;
}

double clamp_prob(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

double logit_scale(double p) {
  p = clamp_prob(p);
  // Mirror small probabilities through the complement so that
  // logit_scale(p) == -logit_scale(1-p) bit-for-bit.
  if (p < 0.5) {
    const double q = 1.0 - p;
    return -std::log(q / (1.0 - q));
  }
  return std::log(p / (1.0 - p));
}

double sigmoid(double phi) {
  if (phi >= 0.0) return 1.0 / (1.0 + std::exp(-phi));
  const double e = std::exp(phi);
  return e / (1.0 + e);
}

double loss_from_logit(double phi) {
  // log(1 + exp(-phi)) without overflow.
  if (phi > 0.0) return std::log1p(std::exp(-phi));
  return -phi + std::log1p(std::exp(phi));
}

double loss(const Classifier& classifier, const Instance& instance) {
  const std::vector<double> p = classifier.predict_proba(instance.features);
  if (instance.label < 0 || instance.label >= static_cast<int>(p.size()))
    throw std::invalid_argument("loss: label out of range");
  return -std::log(clamp_prob(p[instance.label]));
}

std::vector<std::vector<double>> augment(const Instance& instance, const AugmentConfig& config,
                                         std::uint64_t seed) {
  if (config.n_queries < 1) throw std::invalid_argument("augment: n_queries must be >= 1");
  if (config.noise_scale < 0.0) throw std::invalid_argument("augment: noise_scale must be >= 0");
  std::vector<std::vector<double>> views;
  views.reserve(config.n_queries);
  views.push_back(instance.features);
  Rng rng(hash_combine(seed, static_cast<std::uint64_t>(instance.id), 0x617567ULL));  // "aug"
  for (int v = 1; v < config.n_queries; ++v) {
    std::vector<double> f = instance.features;
    for (double& x : f) x += config.noise_scale * rng.next_normal();
    views.push_back(std::move(f));
  }
  return views;
}

std::vector<double> flatten_parameters(const Classifier& classifier) {
  std::vector<double> out;
  out.reserve(classifier.parameter_count());
  for (const auto& l : classifier.layers) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void set_parameters(Classifier& classifier, std::span<const double> params) {
  if (params.size() != classifier.parameter_count())
    throw std::invalid_argument("set_parameters: size mismatch");
  std::size_t k = 0;
  for (auto& l : classifier.layers) {
    for (double& w : l.weights) w = params[k++];
    for (double& b : l.bias) b = params[k++];
  }
}

double batch_loss(const Classifier& classifier, const Dataset& batch) {
  if (batch.instances.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double total = 0.0;
  for (const auto& inst : batch.instances) {
    const std::vector<double> p = classifier.predict_proba(inst.features);
    total += -std::log(std::max(p[inst.label], 1e-300));
  }
  return total / static_cast<double>(batch.size());
}

std::vector<double> batch_gradient(const Classifier& classifier, const Dataset& batch) {
  if (batch.instances.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  std::vector<double> grad(classifier.parameter_count(), 0.0);
  std::vector<std::size_t> indices(batch.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  backward_batch(classifier, batch, indices, grad);
  return grad;
}

}  // namespace mia
