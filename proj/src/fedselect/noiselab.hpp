// Copyright 2026 The fedselect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDSELECT_NOISELAB_HPP
#define FEDSELECT_NOISELAB_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fedselect/mipfl.hpp"

namespace fedselect {

/// First-order sensitivity of plug-in MI (bits) to each joint count.
///
/// With n the table total, PMI(x,y) = log p_xy / (p_x p_y) and MI in the same
/// base, dMI/dn_xy = (PMI(x,y) - MI) / n. The calculus is done in nats and
/// converted once; the finite-difference tests pin the result.
struct MiSensitivity {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double total = 0.0;
  double mi = 0.0;                // bits
  std::vector<double> gradient;   // bits per count, row-major
  std::vector<double> pmi;        // bits, row-major
  double spread = 0.0;            // sum (PMI - MI)^2, bits^2

  double predicted_variance(std::size_t k, double sigma) const;
};

/// Requires every cell > 0.
MiSensitivity mi_gradient(const ContingencyTable& table);

/// k sigma^2 / n^2 * sum (PMI - MI)^2: delta-method variance of the MI error
/// when each of k releases adds N(0, sigma^2) per cell.
double predict_mi_variance(const ContingencyTable& table, std::size_t k, double sigma);

struct SnrLevel {
  double snr = 0.0;            // infinity means no noise
  double sigma = 0.0;
  double bias = 0.0;           // mean(noisy MI - clean MI)
  double std = 0.0;
  double predicted_std = 0.0;
  bool unbiased = false;       // |bias| < 3 std / sqrt(trials)
  std::optional<double> std_ratio;  // std / predicted_std
  std::size_t degenerate = 0;  // trials whose noisy table had no positive total
  std::vector<double> errors;
};

struct SnrStudy {
  ContingencyTable table;
  double clean_mi = 0.0;
  std::size_t trials = 0;
  std::vector<SnrLevel> levels;

  /// level, snr, sigma, trial, error
  void write_csv(std::ostream& out) const;
  nlohmann::json summary() const;
};

/// Monte Carlo study of the MI error at each SNR (mean |count| / sigma).
SnrStudy snr_study(const ContingencyTable& clean, std::span<const double> snr_levels,
                   std::size_t trials, std::uint64_t seed);

/// Exact client releases plus what is needed to re-noise and score them.
struct NoiseExperiment {
  SchemaPtr schema;
  std::vector<TableBundle> exact;
  PflWeights weights;

  BundlePool exact_pool() const;
  BundlePool noisy_pool(double sigma, std::uint64_t seed) const;
};

struct DecisionVarianceReport {
  Federation w;
  Federation w_prime;
  std::size_t k = 0;
  double sigma = 0.0;
  std::size_t trials = 0;
  double mean_d = 0.0;
  double var_d = 0.0;
  double sigma2_pfl = 0.0;                  // empirical Var Y(W)
  std::optional<double> variance_ratio;     // var_d / (2 sigma2_pfl / k)

  nlohmann::json to_json(const BundlePool& pool) const;
};

/// Fixes W (random, from seed) and a single-swap neighbour W' and re-noises
/// every release per trial to measure Var(Y(W') - Y(W)).
DecisionVarianceReport decision_variance_check(const NoiseExperiment& ex, std::size_t k,
                                               double sigma, std::size_t trials,
                                               std::uint64_t seed);
DecisionVarianceReport decision_variance_check(const NoiseExperiment& ex, const Federation& w,
                                               const Federation& w_prime, double sigma,
                                               std::size_t trials, std::uint64_t seed);

struct MisorderReport {
  Federation w;
  Federation w_prime;
  std::size_t k = 0;
  double sigma = 0.0;
  std::size_t trials = 0;
  double delta_gap = 0.0;       // PFL(W') - PFL(W) on exact tables
  double sigma2_pfl = 0.0;
  double var_d = 0.0;
  std::size_t misorders = 0;
  double rate = 0.0;
  double bound = 1.0;           // exp(-k Delta^2 / (4 sigma2_pfl))
  double standard_error = 0.0;  // binomial, at the bound
  double gaussian_rate = 0.0;   // Phi(-Delta / sqrt(2 sigma2_pfl / k))
  bool within_bound = true;     // rate <= bound + 3 standard_error

  nlohmann::json to_json(const BundlePool& pool) const;
};

/// W' must be a single swap away from W and strictly worse on exact tables.
MisorderReport misorder_check(const NoiseExperiment& ex, const Federation& w,
                              const Federation& w_prime, double sigma, std::size_t trials,
                              std::uint64_t seed);

struct GlobalOptimalityLevel {
  double mu = 0.0;
  std::size_t failures = 0;
  double rate = 0.0;
  std::optional<double> bound;  // only when mu > 2 E||xi||_inf
  double standard_error = 0.0;
  bool within_bound = true;
};

struct GlobalOptimalityReport {
  std::size_t k = 0;
  std::size_t federations = 0;
  std::size_t trials = 0;
  double sigma = 0.0;
  Federation true_best;
  double true_best_pfl = 0.0;
  double sup_noise_mean = 0.0;  // Monte Carlo E||xi||_inf
  double sigma2_pfl = 0.0;      // max over W of Var xi_W
  std::vector<double> gaps;     // PFL(W*_Y) - PFL(W*) per trial
  std::vector<GlobalOptimalityLevel> levels;

  nlohmann::json to_json(const BundlePool& pool) const;
};

/// Per trial: re-noise, enumerate every federation, take the noisy minimizer
/// and record its true gap. Levels are evaluated for each absolute `mus`
/// entry and for each margin m in `margins`, meaning mu/2 = E||xi|| + m sigma_PFL.
GlobalOptimalityReport global_optimality_check(const NoiseExperiment& ex, std::size_t k,
                                               double sigma, std::size_t trials,
                                               std::span<const double> mus,
                                               std::span<const double> margins,
                                               std::uint64_t seed);

double normal_cdf(double x);

}  // namespace fedselect

#endif  // FEDSELECT_NOISELAB_HPP
