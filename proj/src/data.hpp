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

#ifndef MIA_DATA_HPP_
#define MIA_DATA_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mia {

struct Instance {
  std::int64_t id = 0;
  std::vector<double> features;
  int label = 0;
};

// A labeled dataset in canonical order (ascending id). Ids are unique, all
// feature vectors share one dimension, and labels lie in [0, num_classes).
struct Dataset {
  std::vector<Instance> instances;
  int num_classes = 0;

  std::size_t size() const { return instances.size(); }
  int dim() const { return instances.empty() ? 0 : static_cast<int>(instances[0].features.size()); }

  // Binary search by id; nullptr if absent.
  const Instance* find(std::int64_t id) const;

  std::vector<std::int64_t> ids() const;

  // Subset by id; missing ids are an error. Result is canonical.
  Dataset subset(const std::vector<std::int64_t>& keep_ids) const;

  // Sorts by id and checks the invariants above. Throws on violation.
  void canonicalize();
};

struct SyntheticConfig {
  int num_classes = 2;
  int dim = 2;
  int per_class_count = 10;
  double class_separation = 1.0;  // minimum pairwise distance between class means
  double within_class_sigma = 1.0;
  std::uint64_t seed = 0;
};

// Gaussian mixture sampler: class means are drawn in random directions and
// rescaled so the minimum pairwise distance equals class_separation; class c
// then gets per_class_count draws from N(mean_c, sigma^2 I). Ids are assigned
// sequentially, so canonical order equals generation order.
Dataset gen_synthetic(const SyntheticConfig& config);

// CSV loader: first row is a header, the label column is named, all other
// columns must be numeric. A column named "id" supplies ids (snapshots written
// by save_csv round-trip); otherwise ids are assigned by row order. Labels are
// mapped to a dense [0, m) range (numeric sort when all labels parse as
// integers, lexicographic otherwise).
Dataset load_csv(const std::string& path, const std::string& label_column);

// Writes header "id,f0,...,f{d-1},label".
void save_csv(const Dataset& dataset, const std::string& path);

// Disjoint splits by id. Sizes are floor(fraction*n) except the last subset,
// which gets round(fraction*n) capped by the remaining instances.
std::vector<Dataset> split_disjoint(const Dataset& dataset,
                                    const std::vector<double>& fractions,
                                    std::uint64_t seed);

// Per-feature affine transform fitted by standardize(); constant columns map
// to zero (inv_std == 0).
struct ScalerParams {
  std::vector<double> mean;
  std::vector<double> inv_std;
};

// Centers each feature to mean 0 and scales to unit variance (population
// convention, n denominator). Returns the transformed set and the fitted
// parameters so the same transform can be applied to other sets.
std::pair<Dataset, ScalerParams> standardize(const Dataset& dataset);

Dataset apply_scaler(const Dataset& dataset, const ScalerParams& params);

}  // namespace mia

#endif  // MIA_DATA_HPP_
