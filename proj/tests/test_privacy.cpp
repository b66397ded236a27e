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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fedselect/privacy.hpp"
#include "support.hpp"

using namespace fedselect;

namespace {

// Brute-force RDP-to-DP conversion on a dense log-spaced order grid.
double grid_epsilon(double sigma, std::size_t m, double delta) {
  double best = std::numeric_limits<double>::infinity();
  for (double la = -8.0; la <= 8.0; la += 1e-4) {
    const double alpha = 1.0 + std::exp(la);
    best = std::min(best, m * alpha / (2 * sigma * sigma) + std::log(1 / delta) / (alpha - 1));
  }
  return best;
}

// Smallest sigma meeting epsilon, by bisection on the grid conversion.
double grid_sigma(double eps, std::size_t m, double delta) {
  double lo = 1e-3, hi = 1e5;
  for (int i = 0; i < 80; ++i) {
    const double mid = std::sqrt(lo * hi);
    (grid_epsilon(mid, m, delta) <= eps ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

TEST(QueryCount, PairsOfFeaturesAndTarget) {
  EXPECT_EQ(query_count(10), 55u);
  EXPECT_EQ(query_count(5), 15u);
  EXPECT_EQ(query_count(1), 1u);
  EXPECT_THROW(query_count(0), Error);
}

TEST(Calibrate, ReferenceSigmasWithinFivePercent) {
  const std::pair<std::size_t, double> rows[] = {
      {5, 18.2}, {10, 36.5}, {20, 71.8}, {30, 107.4}, {50, 179.2}};
  for (const auto& [k, reference] : rows) {
    const auto c = calibrate_sigma({1.0, 1e-5}, query_count(k));
    EXPECT_NEAR(c.sigma / reference, 1.0, 0.05) << "K=" << k;
  }
}

TEST(Calibrate, MatchesIndependentOracle) {
  // Frozen from grid_sigma(1, 1, 1e-5) = 4.8996...
  const auto c = calibrate_sigma({1.0, 1e-5}, 1);
  EXPECT_NEAR(c.sigma, 4.90, 0.01);
  EXPECT_NEAR(c.sigma_numeric, grid_sigma(1.0, 1, 1e-5), 1e-3);
  EXPECT_NEAR(calibrate_sigma({1.0, 1e-5}, 55).sigma, 36.3, 0.1);
  EXPECT_NEAR(calibrate_sigma({1.0, 1e-5}, 15).sigma, 19.0, 0.05);
  EXPECT_GT(c.optimal_order, 1.0);
  EXPECT_EQ(c.sensitivity, 1.0);
}

TEST(Calibrate, RejectsInvalidBudgets) {
  EXPECT_THROW(calibrate_sigma({0.0, 1e-5}, 5), Error);
  EXPECT_THROW(calibrate_sigma({1.0, 0.0}, 5), Error);
  EXPECT_THROW(calibrate_sigma({1.0, 1.0}, 5), Error);
  EXPECT_THROW(calibrate_sigma({1.0, 1e-5}, 0), Error);
}

TEST(Calibrate, RoundTripTightOnGrid) {
  for (double eps : {0.1, 0.5, 1.0, 2.0, 5.0})
    for (double delta : {1e-5, 1e-6})
      for (std::size_t m : {1, 15, 55, 210, 465, 1275}) {
        const double sigma = calibrate_sigma({eps, delta}, m).sigma;
        EXPECT_LE(verify_epsilon(sigma, m, delta), eps);
        EXPECT_GT(verify_epsilon(0.98 * sigma, m, delta), eps);
      }
}

TEST(Calibrate, MonotoneInQueriesAndEpsilon) {
  const std::size_t ms[] = {1, 15, 55, 210, 465, 1275};
  const double eps[] = {0.1, 0.5, 1.0, 2.0, 5.0};
  for (double delta : {1e-5, 1e-6}) {
    for (double e : eps)
      for (std::size_t i = 1; i < std::size(ms); ++i)
        EXPECT_GT(calibrate_sigma({e, delta}, ms[i]).sigma,
                  calibrate_sigma({e, delta}, ms[i - 1]).sigma);
    for (std::size_t m : ms)
      for (std::size_t i = 1; i < std::size(eps); ++i)
        EXPECT_LT(calibrate_sigma({eps[i], delta}, m).sigma,
                  calibrate_sigma({eps[i - 1], delta}, m).sigma);
  }
}

TEST(VerifyEpsilon, AgreesWithGridOracle) {
  for (double sigma : {2.0, 18.2, 71.8})
    for (std::size_t m : {1, 55, 210})
      EXPECT_NEAR(verify_epsilon(sigma, m, 1e-5), grid_epsilon(sigma, m, 1e-5), 1e-6);
}

TEST(VerifyEpsilon, Examples) {
  EXPECT_LE(verify_epsilon(calibrate_sigma({1.0, 1e-5}, 55).sigma, 55, 1e-5), 1.0);
  EXPECT_LT(verify_epsilon(1e9, 1, 1e-5), 1e-6);
  EXPECT_LE(verify_epsilon(71.8, 210, 1e-5), 1.0);
}

TEST(VerifyEpsilon, RdpComposesLinearly) {
  for (double sigma : {5.0, 20.0, 80.0})
    for (std::size_t m : {1, 15, 100})
      EXPECT_NEAR(verify_epsilon(sigma * std::sqrt(2.0), 2 * m, 1e-5),
                  verify_epsilon(sigma, m, 1e-5), 1e-6);
}

TEST(NoiseBundle, ZeroSigmaKeepsCells) {
  auto s = fstest::binary_schema(2);
  const auto b = compute_tables(fstest::random_dataset(s, 30, 1));
  const auto n = noise_bundle(b, NoiseCalibration{3, 0.0}, 4);
  ASSERT_EQ(n.tables.size(), b.tables.size());
  for (std::size_t i = 0; i < b.tables.size(); ++i) {
    EXPECT_TRUE(std::equal(n.tables[i].cells().begin(), n.tables[i].cells().end(),
                           b.tables[i].cells().begin()));
    EXPECT_FALSE(n.tables[i].exact());
  }
}

TEST(NoiseBundle, DeterministicPerSeedAndOnGrid) {
  auto s = fstest::binary_schema(3);
  const auto b = compute_tables(fstest::random_dataset(s, 30, 1));
  const NoiseCalibration c{6, 5.0};
  EXPECT_EQ(noise_bundle(b, c, 9), noise_bundle(b, c, 9));
  EXPECT_NE(noise_bundle(b, c, 9), noise_bundle(b, c, 10));
  bool negative = false;
  for (const auto& t : noise_bundle(b, c, 9).tables)
    for (double x : t.cells()) {
      EXPECT_EQ(std::round(x / kNoiseGrid) * kNoiseGrid, x);
      negative |= x < 0;
    }
  EXPECT_TRUE(negative);  // negatives are kept
}

TEST(NoiseBundle, MomentsAndIndependence) {
  // 10^5 noised cells of a zero table, sigma = 36.5.
  auto s = fstest::binary_schema(1);
  const auto zero = compute_tables(ClientDataset{"z", s, {}});
  std::vector<double> a, b, all;
  for (std::uint64_t seed = 0; all.size() < 100000; ++seed) {
    const auto n = noise_bundle(zero, NoiseCalibration{1, 36.5}, seed);
    const auto cells = n.tables[0].cells();
    a.push_back(cells[0]);
    b.push_back(cells[1]);
    all.insert(all.end(), cells.begin(), cells.end());
  }
  EXPECT_NEAR(std::sqrt(fstest::var_of(all)) / 36.5, 1.0, 0.01);
  double cov = 0;
  for (std::size_t i = 0; i < a.size(); ++i) cov += a[i] * b[i];
  cov /= static_cast<double>(a.size());
  const double se = 36.5 * 36.5 / std::sqrt(static_cast<double>(a.size()));
  EXPECT_LT(std::abs(cov), 3 * se);
}

TEST(TotalBudget, PhaseComposition) {
  EXPECT_EQ(total_budget(false, 1.0, 2.0), 1.0);
  EXPECT_EQ(total_budget(true, 1.0, 2.0), 3.0);
  EXPECT_EQ(total_budget(true, 1.0, 0.0), 1.0);
}
