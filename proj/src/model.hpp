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

#ifndef MIA_MODEL_HPP_
#define MIA_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"

namespace mia {

struct TrainConfig {
  std::vector<int> hidden_sizes;  // empty = multinomial logistic regression
  int epochs = 100;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

struct AugmentConfig {
  int n_queries = 1;        // augmented views per instance; view 0 is the original
  double noise_scale = 0.0; // isotropic Gaussian feature noise for views 1..n-1
};

// Fully connected softmax classifier with ReLU hidden layers. Immutable after
// training; safe to share across threads.
class Classifier {
 public:
  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> bias;     // out
  };

  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int num_classes() const { return layers.empty() ? 0 : layers.back().out; }

  std::vector<double> logits(std::span<const double> x) const;
  std::vector<double> predict_proba(std::span<const double> x) const;

  // Versioned binary format: magic "MIAC", u16 version, u32 layer count, then
  // per layer u32 rows, u32 cols, float64 row-major weights, float64 biases.
  void save(const std::string& path) const;
  static Classifier load(const std::string& path);

  std::size_t parameter_count() const;
};

// Mini-batch SGD with momentum and weight decay at a constant learning rate.
// Shuffling and initialization are driven solely by config.seed; the loop is
// single-threaded, so identical inputs give bit-identical parameters.
Classifier train(const Dataset& dataset, const TrainConfig& config);

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-12;
double clamp_prob(double p);

// log(p / (1-p)) on the clamped probability. Structured so that
// logit_scale(p) + logit_scale(1-p) == 0 exactly.
double logit_scale(double p);

// Inverse of logit_scale (without the clamp): 1 / (1 + exp(-phi)).
double sigmoid(double phi);

// Cross-entropy loss recovered from a scaled confidence: log(1 + exp(-phi)).
double loss_from_logit(double phi);

// -log p_y with the same clamping as logit_scale.
double loss(const Classifier& classifier, const Instance& instance);

// Deterministic augmented views keyed by (instance.id, seed): view 0 is the
// unmodified feature vector, views 1..n-1 add noise_scale * N(0, I).
std::vector<std::vector<double>> augment(const Instance& instance, const AugmentConfig& config,
                                         std::uint64_t seed);

// Flat parameter access plus batch loss/gradient, used by the trainer and by
// the finite-difference gradient check.
std::vector<double> flatten_parameters(const Classifier& classifier);
void set_parameters(Classifier& classifier, std::span<const double> params);
double batch_loss(const Classifier& classifier, const Dataset& batch);
std::vector<double> batch_gradient(const Classifier& classifier, const Dataset& batch);

}  // namespace mia

#endif  // MIA_MODEL_HPP_
