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
// Brute-force-enumerable oracles: a Gibbs sampler over joint membership
// vectors checked against exact enumeration, and the posterior odds test over
// discrete dataset universes checked against direct Bayes.

#ifndef MIA_THEORY_HPP_
#define MIA_THEORY_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace mia {

// An enumerable joint-membership world with n query instances. loglik[mask]
// is log Pr(o | M = mask) for the fixed, implicit observation o; prior_in[i]
// is the marginal inclusion probability of instance i.
struct JointUniverse {
  int n = 0;
  std::vector<double> prior_in;  // size n, values in (0, 1)
  std::vector<double> loglik;    // size 2^n

  std::size_t states() const { return std::size_t{1} << n; }
  void validate() const;

  // Random world: priors uniform in [prior_lo, prior_hi], loglik i.i.d.
  // N(0, loglik_scale^2).
  static JointUniverse random(int n, std::uint64_t seed, double loglik_scale = 1.0,
                              double prior_lo = 0.2, double prior_hi = 0.8);

  static JointUniverse from_json_file(const std::string& path);
};

struct PosteriorTable {
  std::vector<double> probability;        // size 2^n, sums to 1
  std::vector<double> marginals;          // Pr(M_i = 1 | o)
  std::vector<double> mutual_information; // n x n; diagonal = marginal entropy (nats)
};

// Exact posterior: Pr(M | o) proportional to exp(loglik(M)) * prod_i
// prior^{M_i} (1-prior)^{1-M_i}. Enumerates all 2^n states; n <= 20.
PosteriorTable enum_posterior(const JointUniverse& universe);

struct GibbsConfig {
  enum class Scan { systematic, random_scan };
  Scan scan = Scan::systematic;
  long long sweeps = 100000;   // T; each sweep performs n single-site updates
  long long burn_in = 1000;    // sweeps discarded before counting
  std::uint64_t seed = 0;
};

struct GibbsResult {
  std::vector<double> empirical;      // size 2^n; post-burn-in state frequencies
  std::vector<std::uint32_t> trace;   // state after every sweep (all T of them)
};

// Single-site Gibbs sampler targeting the enum_posterior distribution. The
// conditional for coordinate i comes from the two single-bit-flip states with
// log-sum stabilization; equal logliks yield exactly prior_in[i].
GibbsResult gibbs_sample(const JointUniverse& universe, const GibbsConfig& config);

// Half the L1 distance between two probability tables.
double total_variation(const std::vector<double>& a, const std::vector<double>& b);

// Max over all single-coordinate transitions of
// |pi(M) P(M'|M) - pi(M') P(M|M')| with exact pi. corrupt_kernel swaps the
// flip probability for its complement (negative control).
double detailed_balance_max_violation(const JointUniverse& universe, bool corrupt_kernel = false);

// -------------------------------------------------------------------------
// Posterior odds test over a finite family of candidate training sets.

struct DiscreteOddsUniverse {
  std::vector<std::vector<std::int64_t>> datasets;  // member ids per candidate
  std::vector<double> prior;                        // Pr(D = S), sums to 1
  std::vector<std::vector<double>> channel;         // [dataset][letter] = Pr(e | S)

  int alphabet() const { return channel.empty() ? 0 : static_cast<int>(channel[0].size()); }
  std::vector<std::int64_t> item_pool() const;  // union of all dataset items
  double observation_probability(int letter) const;
  void validate() const;

  static DiscreteOddsUniverse random(int max_datasets, int alphabet_size, int item_pool_size,
                                     std::uint64_t seed);
  static DiscreteOddsUniverse from_json_file(const std::string& path);
};

enum class OddsWeighting {
  prior_conditional,  // expectations weighted by Pr(D=S)/Pr(D in family)
  uniform             // test-only: unweighted average over each family
};

struct OddsTestResult {
  int decision = 0;                      // 1 iff lhs > rhs (strict)
  double lhs = 0.0;                      // likelihood ratio E+[L] / E-[L]
  double rhs = 0.0;                      // prior odds Pr(M=0)/Pr(M=1)
  double direct_posterior_ratio = 0.0;   // Pr(M=1|e)/Pr(M=0|e) by full Bayes
  bool prior_membership_impossible = false;  // rhs infinite; decision forced 0
};

// Evaluates the posterior odds test for one query item and observation letter
// and, independently, the directly enumerated posterior ratio.
OddsTestResult odds_test(const DiscreteOddsUniverse& universe, std::int64_t query_id,
                         int observation,
                         OddsWeighting weighting = OddsWeighting::prior_conditional);

// Brute-force Bayes-optimal decision: argmax of the enumerated posterior,
// ties resolved to non-member.
int bayes_optimal_decision(const DiscreteOddsUniverse& universe, std::int64_t query_id,
                           int observation);

}  // namespace mia

#endif  // MIA_THEORY_HPP_
