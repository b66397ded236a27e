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

#ifndef FEDSELECT_PRIVACY_HPP
#define FEDSELECT_PRIVACY_HPP

#include <cstddef>
#include <cstdint>

#include "fedselect/tabular.hpp"

namespace fedselect {

enum class Phase { selection, training };

struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 1e-5;
  Phase phase = Phase::selection;

  void validate() const;
};

struct NoiseCalibration {
  std::size_t query_count = 1;
  double sigma = 0.0;
  /// RDP order minimizing the (epsilon, delta) conversion at `sigma`.
  double optimal_order = 0.0;
  /// L2 sensitivity of one contingency-table query.
  double sensitivity = 1.0;
  /// Smallest sigma meeting the budget found by bisection on verify_epsilon.
  double sigma_numeric = 0.0;
};

/// K(K+1)/2: every unordered pair of the K features and the target.
std::size_t query_count(std::size_t feature_count);

/// Closed-form Gaussian noise scale for M composed unit-sensitivity queries.
NoiseCalibration calibrate_sigma(const PrivacyBudget& budget, std::size_t query_count);

/// min over alpha > 1 of M*alpha/(2 sigma^2) + ln(1/delta)/(alpha-1), found
/// numerically (golden section in log(alpha-1)).
double verify_epsilon(double sigma, std::size_t query_count, double delta);

/// Adds N(0, sigma^2) to every cell of an exact bundle. Noisy cells are
/// rounded to a 2^-24 grid, which keeps server-side aggregation exact and
/// order-independent; negative cells are kept.
TableBundle noise_bundle(const TableBundle& bundle, const NoiseCalibration& calibration,
                         std::uint64_t seed);

/// Per-client budget: eps1 always, plus eps2 for selected clients.
double total_budget(bool selected, double eps1, double eps2);

nlohmann::json calibration_report(const PrivacyBudget& budget, std::size_t feature_count,
                                  const NoiseCalibration& calibration);

inline constexpr double kNoiseGrid = 1.0 / 16777216.0;  // 2^-24

}  // namespace fedselect

#endif  // FEDSELECT_PRIVACY_HPP
