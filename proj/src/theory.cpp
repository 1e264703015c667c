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

#include "theory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "rng.hpp"
#include "util.hpp"

namespace mia {

namespace {

double entropy_term(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

}  // namespace

void JointUniverse::validate() const {
  if (n < 1 || n > 20) throw std::invalid_argument("joint universe: n must be in [1, 20]");
  if (prior_in.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("joint universe: prior size mismatch");
  for (double p : prior_in)
    if (!(p > 0.0 && p < 1.0))
      throw std::invalid_argument("joint universe: priors must be strictly inside (0, 1)");
  if (loglik.size() != states())
    throw std::invalid_argument("joint universe: loglik table must have 2^n entries");
}

JointUniverse JointUniverse::random(int n, std::uint64_t seed, double loglik_scale,
                                    double prior_lo, double prior_hi) {
  JointUniverse u;
  u.n = n;
  Rng rng(hash_combine(seed, 0x756e6976ULL));  // "univ"
  u.prior_in.resize(n);
  for (double& p : u.prior_in) p = rng.next_uniform(prior_lo, prior_hi);
  u.loglik.resize(u.states());
  for (double& l : u.loglik) l = loglik_scale * rng.next_normal();
  u.validate();
  return u;
}

JointUniverse JointUniverse::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("joint universe: cannot open " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  if (doc.contains("family")) {
    const std::string family = doc.at("family");
    if (family != "random")
      throw ConfigError("joint universe: unknown family '" + family + "'");
    return random(doc.at("n"), doc.value("seed", 0ULL), doc.value("loglik_scale", 1.0),
                  doc.value("prior_lo", 0.2), doc.value("prior_hi", 0.8));
  }
  JointUniverse u;
  u.prior_in = doc.at("prior_in").get<std::vector<double>>();
  u.n = static_cast<int>(u.prior_in.size());
  u.loglik = doc.at("loglik").get<std::vector<double>>();
  u.validate();
  return u;
}

PosteriorTable enum_posterior(const JointUniverse& universe) {
  universe.validate();
  const std::size_t states = universe.states();
  const int n = universe.n;

  std::vector<double> log_p1(n), log_p0(n);
  for (int i = 0; i < n; ++i) {
    log_p1[i] = std::log(universe.prior_in[i]);
    log_p0[i] = std::log1p(-universe.prior_in[i]);
  }

  PosteriorTable table;
  table.probability.resize(states);
  double max_logw = -std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < states; ++mask) {
    double logw = universe.loglik[mask];
    for (int i = 0; i < n; ++i) logw += (mask >> i) & 1u ? log_p1[i] : log_p0[i];
    table.probability[mask] = logw;
    max_logw = std::max(max_logw, logw);
  }
  double sum = 0.0;
  for (double& w : table.probability) {
    w = std::exp(w - max_logw);
    sum += w;
  }
  for (double& w : table.probability) w /= sum;

  table.marginals.assign(n, 0.0);
  for (std::size_t mask = 0; mask < states; ++mask)
    for (int i = 0; i < n; ++i)
      if ((mask >> i) & 1u) table.marginals[i] += table.probability[mask];

  // Pairwise mutual information; the diagonal carries the marginal entropy.
  table.mutual_information.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double pi1 = table.marginals[i];
    table.mutual_information[static_cast<std::size_t>(i) * n + i] =
        entropy_term(pi1) + entropy_term(1.0 - pi1);
    for (int j = i + 1; j < n; ++j) {
      double joint[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
      for (std::size_t mask = 0; mask < states; ++mask)
        joint[(mask >> i) & 1u][(mask >> j) & 1u] += table.probability[mask];
      const double pj1 = table.marginals[j];
      const double pm_i[2] = {1.0 - pi1, pi1};
      const double pm_j[2] = {1.0 - pj1, pj1};
      double mi = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          if (joint[a][b] > 0.0 && pm_i[a] > 0.0 && pm_j[b] > 0.0)
            mi += joint[a][b] * std::log(joint[a][b] / (pm_i[a] * pm_j[b]));
      table.mutual_information[static_cast<std::size_t>(i) * n + j] = mi;
      table.mutual_information[static_cast<std::size_t>(j) * n + i] = mi;
    }
  }
  return table;
}

namespace {

// Pr(M_i = 1 | M_{-i}, o) from the two single-bit-flip states. Equal logliks
// collapse to the prior exactly.
double flip_probability(const JointUniverse& universe, std::uint32_t mask, int i) {
  const std::uint32_t m1 = mask | (1u << i);
  const std::uint32_t m0 = mask & ~(1u << i);
  const double l1 = universe.loglik[m1];
  const double l0 = universe.loglik[m0];
  const double p = universe.prior_in[i];
  if (l1 == l0) return p;
  // logit = log(p/(1-p)) + l1 - l0; stabilized logistic.
  const double logit = std::log(p) - std::log1p(-p) + l1 - l0;
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

}  // namespace

GibbsResult gibbs_sample(const JointUniverse& universe, const GibbsConfig& config) {
  universe.validate();
  if (config.burn_in >= config.sweeps)
    throw std::invalid_argument("gibbs_sample: burn_in must be below sweeps");

  const int n = universe.n;
  Rng rng(hash_combine(config.seed, 0x67696262ULL));  // "gibb"

  // Initial state drawn from the priors.
  std::uint32_t state = 0;
  for (int i = 0; i < n; ++i)
    if (rng.next_unit() < universe.prior_in[i]) state |= (1u << i);

  GibbsResult result;
  result.trace.reserve(static_cast<std::size_t>(config.sweeps));
  std::vector<std::uint64_t> counts(universe.states(), 0);

  for (long long t = 0; t < config.sweeps; ++t) {
    if (config.scan == GibbsConfig::Scan::systematic) {
      for (int i = 0; i < n; ++i) {
        const double p1 = flip_probability(universe, state, i);
        if (rng.next_unit() < p1)
          state |= (1u << i);
        else
          state &= ~(1u << i);
      }
    } else {
      for (int step = 0; step < n; ++step) {
        const int i = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
        const double p1 = flip_probability(universe, state, i);
        if (rng.next_unit() < p1)
          state |= (1u << i);
        else
          state &= ~(1u << i);
      }
    }
    result.trace.push_back(state);
    if (t >= config.burn_in) ++counts[state];
  }

  const double total = static_cast<double>(config.sweeps - config.burn_in);
  result.empirical.resize(universe.states());
  for (std::size_t s = 0; s < counts.size(); ++s)
    result.empirical[s] = static_cast<double>(counts[s]) / total;
  return result;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("total_variation: size mismatch");
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a[i] - b[i]);
  return 0.5 * l1;
}

double detailed_balance_max_violation(const JointUniverse& universe, bool corrupt_kernel) {
  const PosteriorTable table = enum_posterior(universe);
  const std::size_t states = universe.states();
  double worst = 0.0;
  for (std::size_t mask = 0; mask < states; ++mask) {
    for (int i = 0; i < universe.n; ++i) {
      const std::uint32_t other = static_cast<std::uint32_t>(mask) ^ (1u << i);
      // Probability that resampling coordinate i moves mask -> other.
      double p_fwd = (other >> i) & 1u ? flip_probability(universe, mask, i)
                                       : 1.0 - flip_probability(universe, mask, i);
      double p_bwd = (mask >> i) & 1u ? flip_probability(universe, other, i)
                                      : 1.0 - flip_probability(universe, other, i);
      if (corrupt_kernel) p_fwd = 1.0 - p_fwd;
      const double violation =
          std::abs(table.probability[mask] * p_fwd - table.probability[other] * p_bwd);
      worst = std::max(worst, violation);
    }
  }
  return worst;
}

// -------------------------------------------------------------------------

std::vector<std::int64_t> DiscreteOddsUniverse::item_pool() const {
  std::set<std::int64_t> items;
  for (const auto& d : datasets) items.insert(d.begin(), d.end());
  return {items.begin(), items.end()};
}

double DiscreteOddsUniverse::observation_probability(int letter) const {
  double p = 0.0;
  for (std::size_t s = 0; s < datasets.size(); ++s) p += prior[s] * channel[s][letter];
  return p;
}

void DiscreteOddsUniverse::validate() const {
  if (datasets.empty()) throw std::invalid_argument("odds universe: no candidate datasets");
  if (prior.size() != datasets.size() || channel.size() != datasets.size())
    throw std::invalid_argument("odds universe: prior/channel size mismatch");
  double prior_sum = 0.0;
  for (double p : prior) {
    if (p < 0.0) throw std::invalid_argument("odds universe: negative prior");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-12)
    throw std::invalid_argument("odds universe: prior does not sum to 1");
  const std::size_t letters = channel[0].size();
  for (const auto& row : channel) {
    if (row.size() != letters)
      throw std::invalid_argument("odds universe: ragged observation channel");
    double row_sum = 0.0;
    for (double p : row) {
      if (p < 0.0) throw std::invalid_argument("odds universe: negative channel probability");
      row_sum += p;
    }
    if (std::abs(row_sum - 1.0) > 1e-12)
      throw std::invalid_argument("odds universe: channel row does not sum to 1");
  }
}

DiscreteOddsUniverse DiscreteOddsUniverse::random(int max_datasets, int alphabet_size,
                                                  int item_pool_size, std::uint64_t seed) {
  if (max_datasets < 2 || alphabet_size < 2 || item_pool_size < 1)
    throw std::invalid_argument("odds universe: need >= 2 datasets, >= 2 letters, >= 1 item");
  Rng rng(hash_combine(seed, 0x6f646473ULL));  // "odds"
  DiscreteOddsUniverse u;
  const int n_datasets =
      2 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_datasets - 1)));

  // Distinct item subsets; resampling on collision keeps them unique.
  std::set<std::vector<std::int64_t>> seen;
  while (static_cast<int>(u.datasets.size()) < n_datasets) {
    std::vector<std::int64_t> members;
    for (std::int64_t item = 0; item < item_pool_size; ++item)
      if (rng.next_unit() < 0.5) members.push_back(item);
    if (seen.insert(members).second) u.datasets.push_back(std::move(members));
  }

  u.prior.resize(u.datasets.size());
  double prior_total = 0.0;
  for (double& p : u.prior) {
    p = 0.05 + rng.next_unit();
    prior_total += p;
  }
  for (double& p : u.prior) p /= prior_total;
  // Renormalization drift guard.
  double fix = 0.0;
  for (double p : u.prior) fix += p;
  u.prior.back() += 1.0 - fix;

  u.channel.resize(u.datasets.size());
  for (auto& row : u.channel) {
    row.resize(alphabet_size);
    double row_total = 0.0;
    for (double& p : row) {
      p = 0.01 + rng.next_unit();
      row_total += p;
    }
    for (double& p : row) p /= row_total;
    double row_fix = 0.0;
    for (double p : row) row_fix += p;
    row.back() += 1.0 - row_fix;
  }
  u.validate();
  return u;
}

DiscreteOddsUniverse DiscreteOddsUniverse::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("odds universe: cannot open " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  if (doc.contains("family")) {
    const std::string family = doc.at("family");
    if (family != "random")
      throw ConfigError("odds universe: unknown family '" + family + "'");
    return random(doc.value("max_datasets", 8), doc.value("alphabet", 8),
                  doc.value("item_pool", 6), doc.value("seed", 0ULL));
  }
  DiscreteOddsUniverse u;
  u.datasets = doc.at("datasets").get<std::vector<std::vector<std::int64_t>>>();
  u.prior = doc.at("prior").get<std::vector<double>>();
  u.channel = doc.at("channel").get<std::vector<std::vector<double>>>();
  u.validate();
  return u;
}

OddsTestResult odds_test(const DiscreteOddsUniverse& universe, std::int64_t query_id,
                         int observation, OddsWeighting weighting) {
  universe.validate();
  if (observation < 0 || observation >= universe.alphabet())
    throw std::invalid_argument("odds_test: observation letter out of range");
  if (universe.observation_probability(observation) <= 0.0)
    throw std::invalid_argument("odds_test: observation has zero probability");

  double prior_in = 0.0, prior_out = 0.0;
  double lik_in = 0.0, lik_out = 0.0;      // prior-weighted likelihood sums
  double count_in = 0.0, count_out = 0.0;  // family sizes (uniform weighting)
  double unif_in = 0.0, unif_out = 0.0;
  for (std::size_t s = 0; s < universe.datasets.size(); ++s) {
    const bool contains =
        std::find(universe.datasets[s].begin(), universe.datasets[s].end(), query_id) !=
        universe.datasets[s].end();
    const double lik = universe.channel[s][observation];
    if (contains) {
      prior_in += universe.prior[s];
      lik_in += universe.prior[s] * lik;
      unif_in += lik;
      count_in += 1.0;
    } else {
      prior_out += universe.prior[s];
      lik_out += universe.prior[s] * lik;
      unif_out += lik;
      count_out += 1.0;
    }
  }

  OddsTestResult result;
  if (prior_in <= 0.0) {
    // The query is never a member of a positive-prior dataset: the prior odds
    // threshold is infinite and the test must answer non-member.
    result.prior_membership_impossible = true;
    result.rhs = std::numeric_limits<double>::infinity();
    result.lhs = 0.0;
    result.direct_posterior_ratio = 0.0;
    result.decision = 0;
    return result;
  }

  // E_{D ~ S+}[L] with the proof's prior-conditional weights, or plain
  // averages under the uniform test-only mode.
  double expect_in, expect_out;
  if (weighting == OddsWeighting::prior_conditional) {
    expect_in = lik_in / prior_in;
    expect_out = prior_out > 0.0 ? lik_out / prior_out : 0.0;
  } else {
    expect_in = count_in > 0.0 ? unif_in / count_in : 0.0;
    expect_out = count_out > 0.0 ? unif_out / count_out : 0.0;
  }

  result.rhs = prior_out / prior_in;
  result.lhs = expect_out > 0.0 ? expect_in / expect_out
                                : std::numeric_limits<double>::infinity();
  result.decision = result.lhs > result.rhs ? 1 : 0;
  result.direct_posterior_ratio =
      lik_out > 0.0 ? lik_in / lik_out : std::numeric_limits<double>::infinity();
  return result;
}

int bayes_optimal_decision(const DiscreteOddsUniverse& universe, std::int64_t query_id,
                           int observation) {
  double p_in = 0.0, p_out = 0.0;
  for (std::size_t s = 0; s < universe.datasets.size(); ++s) {
    const bool contains =
        std::find(universe.datasets[s].begin(), universe.datasets[s].end(), query_id) !=
        universe.datasets[s].end();
    const double mass = universe.prior[s] * universe.channel[s][observation];
    (contains ? p_in : p_out) += mass;
  }
  return p_in > p_out ? 1 : 0;
}

}  // namespace mia
