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
//
// Proxy membership inference for the non-adaptive setting: approximate the
// IN-distribution of a query instance from the shadow-IN behavior of similar
// pool instances, then apply the two-sided likelihood ratio.

#ifndef MIA_PMIA_HPP_
#define MIA_PMIA_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attacks.hpp"
#include "data.hpp"
#include "shadow.hpp"

namespace mia {

enum class ProxyKind { global, class_level, instance_level };
enum class ProxyMetric { cosine, euclidean, wasserstein };

struct ProxyStrategy {
  ProxyKind kind = ProxyKind::class_level;
  int k = 10;                            // instance-level neighbor count
  ProxyMetric metric = ProxyMetric::euclidean;
  bool restrict_to_class = true;         // instance-level: same-label neighbors only
};

struct ProxySet {
  std::int64_t query_id = 0;
  std::vector<std::int64_t> proxy_ids;   // subset of the adversary pool
  bool fell_back_to_global = false;      // class strategy with an unseen label
};

// Global: the whole pool. Class: all same-label instances (global fallback
// with a warning flag when the label is unseen). Instance: the k nearest
// same-label instances under the metric on standardized features, ties broken
// by ascending id. The query itself is excluded when present in the pool.
ProxySet find_proxy(const Dataset& pool, const Instance& query, const ProxyStrategy& strategy);

// Two-sided likelihood ratio with a proxied IN side: the OUT Gaussian is fit
// from the query's own rows with membership 0, the IN Gaussian from the
// concatenated shadow-IN confidences of the proxies. Returns
// log p(obs | IN) - log p(obs | OUT).
double pmia_score(std::span<const double> query_phi, const ScoreMatrix& matrix,
                  const ProxySet& proxies);

// End-to-end attack over a frozen ensemble. Queries must be disjoint from the
// ensemble's training pool (the non-adaptive contract); scoring the trained
// models on the queries is allowed and supplies the OUT side.
AttackResult pmia_attack(const Classifier& target, const ShadowEnsemble& ensemble,
                         const Dataset& pool, const std::vector<Instance>& queries,
                         const ProxyStrategy& strategy, const AugmentConfig& aug,
                         std::uint64_t aug_seed, int n_threads = 0);

// Audit dump: query_id, proxy_id, distance rows (distance blank for the
// global and class strategies).
void save_proxy_csv(const std::vector<ProxySet>& sets, const std::string& path);

}  // namespace mia

#endif  // MIA_PMIA_HPP_
