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

#include "pmia.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_set>

#include "parallel.hpp"
#include "util.hpp"

namespace mia {

namespace {

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom == 0.0) return 1.0;
  return 1.0 - dot / denom;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double ss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    ss += d * d;
  }
  return std::sqrt(ss);
}

// 1-D Wasserstein between the two feature-value distributions: mean absolute
// difference of the sorted vectors.
double wasserstein_distance(std::span<const double> a, std::span<const double> b) {
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double acc = 0.0;
  for (std::size_t k = 0; k < sa.size(); ++k) acc += std::abs(sa[k] - sb[k]);
  return acc / static_cast<double>(sa.size());
}

double distance(ProxyMetric metric, std::span<const double> a, std::span<const double> b) {
  switch (metric) {
    case ProxyMetric::cosine: return cosine_distance(a, b);
    case ProxyMetric::euclidean: return euclidean_distance(a, b);
    case ProxyMetric::wasserstein: return wasserstein_distance(a, b);
  }
  throw std::invalid_argument("unknown proxy metric");
}

// Gathers the shadow-IN confidences of all proxies, concatenated in proxy
// order then row order. Each sample is one n_aug vector.
std::vector<double> gather_in_samples(const ScoreMatrix& matrix, const ProxySet& proxies) {
  std::vector<double> samples;
  for (std::int64_t id : proxies.proxy_ids) {
    auto col = matrix.column_of(id);
    if (!col)
      throw std::invalid_argument("pmia: proxy instance " + std::to_string(id) +
                                  " missing from score matrix");
    for (int j = 0; j < matrix.n_models; ++j) {
      if (!matrix.member(j, *col)) continue;
      for (int a = 0; a < matrix.n_aug; ++a) samples.push_back(matrix.value(j, *col, a));
    }
  }
  return samples;
}

struct SphericalFit {
  std::vector<double> mean;
  double var = 0.0;
};

SphericalFit fit_in_side(const ScoreMatrix& matrix, const ProxySet& proxies) {
  const std::vector<double> samples = gather_in_samples(matrix, proxies);
  if (samples.empty())
    throw std::runtime_error("pmia: no shadow-IN samples among proxies of query " +
                             std::to_string(proxies.query_id));
  SphericalFit fit;
  fit_spherical(samples, matrix.n_aug, fit.mean, fit.var);
  return fit;
}

double score_with_in_fit(std::span<const double> query_phi, const ScoreMatrix& matrix,
                         std::int64_t query_id, const SphericalFit& in_fit) {
  auto col = matrix.column_of(query_id);
  if (!col)
    throw std::invalid_argument("pmia_score: query instance " + std::to_string(query_id) +
                                " missing from score matrix");
  std::vector<double> out_samples;
  for (int j = 0; j < matrix.n_models; ++j) {
    if (matrix.member(j, *col)) continue;
    for (int a = 0; a < matrix.n_aug; ++a) out_samples.push_back(matrix.value(j, *col, a));
  }
  if (out_samples.size() < 2 * static_cast<std::size_t>(matrix.n_aug))
    throw std::runtime_error("pmia_score: fewer than 2 OUT rows for query " +
                             std::to_string(query_id));
  std::vector<double> mean_out;
  double var_out;
  fit_spherical(out_samples, matrix.n_aug, mean_out, var_out);
  return log_normal_spherical(query_phi, in_fit.mean, in_fit.var) -
         log_normal_spherical(query_phi, mean_out, var_out);
}

}  // namespace

ProxySet find_proxy(const Dataset& pool, const Instance& query, const ProxyStrategy& strategy) {
  if (pool.instances.empty()) throw std::invalid_argument("find_proxy: empty pool");
  ProxySet set;
  set.query_id = query.id;

  auto push_if_not_query = [&](const Instance& inst) {
    if (inst.id != query.id) set.proxy_ids.push_back(inst.id);
  };

  switch (strategy.kind) {
    case ProxyKind::global: {
      for (const auto& inst : pool.instances) push_if_not_query(inst);
      break;
    }
    case ProxyKind::class_level: {
      for (const auto& inst : pool.instances)
        if (inst.label == query.label) push_if_not_query(inst);
      if (set.proxy_ids.empty()) {
        // No same-label instance available; fall back to the whole pool.
        set.fell_back_to_global = true;
        for (const auto& inst : pool.instances) push_if_not_query(inst);
      }
      break;
    }
    case ProxyKind::instance_level: {
      if (strategy.k < 1) throw std::invalid_argument("find_proxy: k must be >= 1");
      auto [scaled_pool, scaler] = standardize(pool);
      Instance scaled_query = query;
      {
        Dataset tmp;
        tmp.num_classes = pool.num_classes;
        tmp.instances.push_back(query);
        scaled_query = apply_scaler(tmp, scaler).instances[0];
      }
      std::vector<std::pair<double, std::int64_t>> candidates;
      for (const auto& inst : scaled_pool.instances) {
        if (inst.id == query.id) continue;
        if (strategy.restrict_to_class && inst.label != query.label) continue;
        candidates.emplace_back(distance(strategy.metric, scaled_query.features, inst.features),
                                inst.id);
      }
      if (candidates.empty())
        throw std::invalid_argument("find_proxy: no candidates for instance-level strategy");
      std::sort(candidates.begin(), candidates.end());  // ties break by ascending id
      const std::size_t take = std::min<std::size_t>(candidates.size(),
                                                     static_cast<std::size_t>(strategy.k));
      for (std::size_t i = 0; i < take; ++i) set.proxy_ids.push_back(candidates[i].second);
      break;
    }
  }
  if (set.proxy_ids.empty()) throw std::invalid_argument("find_proxy: empty proxy set");
  return set;
}

double pmia_score(std::span<const double> query_phi, const ScoreMatrix& matrix,
                  const ProxySet& proxies) {
  if (static_cast<int>(query_phi.size()) != matrix.n_aug)
    throw std::invalid_argument("pmia_score: observation size does not match n_aug");
  return score_with_in_fit(query_phi, matrix, proxies.query_id, fit_in_side(matrix, proxies));
}

AttackResult pmia_attack(const Classifier& target, const ShadowEnsemble& ensemble,
                         const Dataset& pool, const std::vector<Instance>& queries,
                         const ProxyStrategy& strategy, const AugmentConfig& aug,
                         std::uint64_t aug_seed, int n_threads) {
  // Non-adaptive purity: no shadow model may have trained on a query.
  for (const auto& q : queries)
    if (ensemble.plan.column_of(q.id))
      throw std::invalid_argument("pmia_attack: query instance " + std::to_string(q.id) +
                                  " appears in the shadow training pool");

  // One matrix over pool + queries: pool columns carry real membership bits,
  // query columns are all-OUT by construction.
  std::vector<Instance> all = pool.instances;
  all.insert(all.end(), queries.begin(), queries.end());
  const ScoreMatrix matrix = score_matrix(ensemble, all, aug, aug_seed, n_threads);

  const TargetObservation obs = observe(target, queries, aug, aug_seed);

  // Proxy sets per query; the IN fit is shared across queries for the global
  // strategy and per label for the class strategy.
  std::vector<ProxySet> sets(obs.size());
  if (strategy.kind == ProxyKind::global) {
    ProxySet global;
    for (const auto& inst : pool.instances) global.proxy_ids.push_back(inst.id);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      sets[i] = global;
      sets[i].query_id = obs.ids[i];
    }
  } else if (strategy.kind == ProxyKind::class_level) {
    std::map<int, std::vector<std::int64_t>> by_label;
    for (const auto& inst : pool.instances) by_label[inst.label].push_back(inst.id);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      sets[i].query_id = obs.ids[i];
      auto it = by_label.find(obs.labels[i]);
      if (it != by_label.end() && !it->second.empty()) {
        sets[i].proxy_ids = it->second;
      } else {
        sets[i].fell_back_to_global = true;
        for (const auto& inst : pool.instances) sets[i].proxy_ids.push_back(inst.id);
      }
    }
  } else {
    // Instance level: standardize the pool once, then rank per query.
    auto [scaled_pool, scaler] = standardize(pool);
    Dataset query_set;
    query_set.num_classes = pool.num_classes;
    for (const auto& q : queries) query_set.instances.push_back(q);
    query_set.canonicalize();
    const Dataset scaled_queries = apply_scaler(query_set, scaler);
    parallel_for(obs.size(), n_threads, [&](std::size_t i) {
      const Instance* q = scaled_queries.find(obs.ids[i]);
      std::vector<std::pair<double, std::int64_t>> candidates;
      for (const auto& inst : scaled_pool.instances) {
        if (strategy.restrict_to_class && inst.label != q->label) continue;
        candidates.emplace_back(distance(strategy.metric, q->features, inst.features), inst.id);
      }
      if (candidates.empty())
        throw std::runtime_error("pmia_attack: no proxy candidates for query " +
                                 std::to_string(obs.ids[i]));
      std::sort(candidates.begin(), candidates.end());
      const std::size_t take = std::min<std::size_t>(candidates.size(),
                                                     static_cast<std::size_t>(strategy.k));
      sets[i].query_id = obs.ids[i];
      for (std::size_t c = 0; c < take; ++c) sets[i].proxy_ids.push_back(candidates[c].second);
    });
  }

  // IN fits are shared: one for the global strategy, one per label for the
  // class strategy, per query at the instance level.
  SphericalFit global_fit;
  bool have_global_fit = false;
  std::map<int, SphericalFit> class_fits;
  auto ensure_global = [&]() -> const SphericalFit& {
    if (!have_global_fit) {
      ProxySet all;
      for (const auto& inst : pool.instances) all.proxy_ids.push_back(inst.id);
      global_fit = fit_in_side(matrix, all);
      have_global_fit = true;
    }
    return global_fit;
  };
  if (strategy.kind == ProxyKind::global) {
    ensure_global();
  } else if (strategy.kind == ProxyKind::class_level) {
    std::map<int, std::vector<std::int64_t>> by_label;
    for (const auto& inst : pool.instances) by_label[inst.label].push_back(inst.id);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (sets[i].fell_back_to_global) {
        ensure_global();
      } else if (!class_fits.count(obs.labels[i])) {
        ProxySet class_set;
        class_set.proxy_ids = by_label.at(obs.labels[i]);
        class_fits.emplace(obs.labels[i], fit_in_side(matrix, class_set));
      }
    }
  }

  AttackResult result;
  result.attack_name = "pmia";
  result.instance_ids = obs.ids;
  result.scores.assign(obs.size(), 0.0);
  parallel_for(obs.size(), n_threads, [&](std::size_t i) {
    switch (strategy.kind) {
      case ProxyKind::global:
        result.scores[i] = score_with_in_fit(obs.phi_of(i), matrix, obs.ids[i], global_fit);
        break;
      case ProxyKind::class_level:
        result.scores[i] = score_with_in_fit(
            obs.phi_of(i), matrix, obs.ids[i],
            sets[i].fell_back_to_global ? global_fit : class_fits.at(obs.labels[i]));
        break;
      case ProxyKind::instance_level:
        result.scores[i] = score_with_in_fit(obs.phi_of(i), matrix, obs.ids[i],
                                             fit_in_side(matrix, sets[i]));
        break;
    }
  });
  return result;
}

void save_proxy_csv(const std::vector<ProxySet>& sets, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_proxy_csv: cannot open " + path);
  out << "query_id,proxy_id\n";
  for (const auto& set : sets)
    for (std::int64_t id : set.proxy_ids) out << set.query_id << ',' << id << '\n';
  if (!out) throw IoError("save_proxy_csv: write failed for " + path);
}

}  // namespace mia
