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

#include "fedselect/privacy.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "fedselect/common.hpp"

namespace fedselect {

void PrivacyBudget::validate() const {
  require(std::isfinite(epsilon) && epsilon > 0.0, Errc::invalid_argument,
          "epsilon must be positive, got " + std::to_string(epsilon));
  require(delta > 0.0 && delta < 1.0, Errc::invalid_argument,
          "delta must lie in (0,1), got " + std::to_string(delta));
}

std::size_t query_count(std::size_t feature_count) {
  require(feature_count >= 1, Errc::invalid_argument, "feature count must be >= 1");
  return feature_count * (feature_count + 1) / 2;
}

NoiseCalibration calibrate_sigma(const PrivacyBudget& budget, std::size_t m) {
  budget.validate();
  require(m >= 1, Errc::invalid_argument, "query count must be >= 1");
  const double eps = budget.epsilon;
  const double b = std::log(1.0 / budget.delta);
  const double md = static_cast<double>(m);

  NoiseCalibration c;
  c.query_count = m;
  c.sigma = (std::sqrt(2.0 * md * b) + std::sqrt(2.0 * md * (b + eps))) / (2.0 * eps);
  // The closed form can land a few ulps short of the budget after rounding.
  for (int i = 0; i < 64 && verify_epsilon(c.sigma, m, budget.delta) > eps; ++i)
    c.sigma = std::nextafter(c.sigma, std::numeric_limits<double>::infinity());
  const double a = md / (2.0 * c.sigma * c.sigma);
  c.optimal_order = 1.0 + std::sqrt(b / a);

  // Bisection for the smallest sigma with verify_epsilon <= eps.
  double lo = c.sigma * 0.5, hi = c.sigma * 2.0;
  while (verify_epsilon(hi, m, budget.delta) > eps) hi *= 2.0;
  while (verify_epsilon(lo, m, budget.delta) <= eps) lo *= 0.5;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (verify_epsilon(mid, m, budget.delta) <= eps ? hi : lo) = mid;
  }
  c.sigma_numeric = hi;
  return c;
}

double verify_epsilon(double sigma, std::size_t m, double delta) {
  require(sigma > 0.0, Errc::invalid_argument, "sigma must be positive");
  require(m >= 1, Errc::invalid_argument, "query count must be >= 1");
  require(delta > 0.0 && delta < 1.0, Errc::invalid_argument, "delta must lie in (0,1)");
  const double a = static_cast<double>(m) / (2.0 * sigma * sigma);
  const double b = std::log(1.0 / delta);
  // f(u) = a(1 + e^u) + b e^{-u} with alpha = 1 + e^u is convex in u.
  auto f = [&](double u) { return a * (1.0 + std::exp(u)) + b * std::exp(-u); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = -30.0, hi = 40.0;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < 300 && hi - lo > 1e-13; ++i) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min(f1, f2);
}

TableBundle noise_bundle(const TableBundle& bundle, const NoiseCalibration& calibration,
                         std::uint64_t seed) {
  require(bundle.exact(), Errc::invalid_argument,
          "bundle for '" + bundle.client_id + "' is already noisy");
  require(calibration.query_count == bundle.tables.size(), Errc::mismatch,
          "calibration covers " + std::to_string(calibration.query_count) +
              " queries but bundle '" + bundle.client_id + "' holds " +
              std::to_string(bundle.tables.size()) + " tables");
  require(calibration.sigma >= 0.0 && std::isfinite(calibration.sigma), Errc::invalid_argument,
          "sigma must be finite and non-negative");

  TableBundle out = bundle;
  out.noise_scale = calibration.sigma;
  std::mt19937_64 rng(derive_seed(seed, bundle.client_id));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& table : out.tables) {
    table.set_exact(false);
    if (calibration.sigma == 0.0) continue;
    for (double& cell : table.cells()) {
      const double noisy = cell + calibration.sigma * gauss(rng);
      cell = std::nearbyint(noisy / kNoiseGrid) * kNoiseGrid;
    }
  }
  return out;
}

double total_budget(bool selected, double eps1, double eps2) {
  require(eps1 > 0.0 && eps2 >= 0.0, Errc::invalid_argument,
          "phase budgets must be positive (eps2 may be 0)");
  return selected ? eps1 + eps2 : eps1;
}

nlohmann::json calibration_report(const PrivacyBudget& budget, std::size_t feature_count,
                                  const NoiseCalibration& c) {
  return {{"epsilon", budget.epsilon},     {"delta", budget.delta},
          {"K", feature_count},            {"M", c.query_count},
          {"sigma", c.sigma},              {"sigma_numeric", c.sigma_numeric},
          {"optimal_order", c.optimal_order}};
}

}  // namespace fedselect
