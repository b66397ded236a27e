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
#include <random>
#include <sstream>

#include "fedselect/anneal.hpp"
#include "fedselect/noiselab.hpp"
#include "fedselect/privacy.hpp"
#include "support.hpp"

using namespace fedselect;

namespace {

ContingencyTable table2(std::vector<double> cells, std::size_t r, std::size_t c) {
  return ContingencyTable(VarPair{0, 1}, r, c, std::move(cells), true);
}

// Central differences of plug-in MI, one cell at a time.
std::vector<double> numeric_gradient(const ContingencyTable& t, double h) {
  std::vector<double> g;
  for (std::size_t i = 0; i < t.cells().size(); ++i) {
    auto up = t, down = t;
    up.cells()[i] += h;
    down.cells()[i] -= h;
    g.push_back((mi_from_counts(up) - mi_from_counts(down)) / (2 * h));
  }
  return g;
}

void expect_gradient_matches(const ContingencyTable& t) {
  const auto analytic = mi_gradient(t);
  const auto numeric = numeric_gradient(t, 0.5);
  double scale = 0;
  for (double x : numeric) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < numeric.size(); ++i)
    EXPECT_NEAR(analytic.gradient[i], numeric[i], 1e-3 * std::max(scale, 1e-12)) << i;
}

}  // namespace

TEST(Gradient, ZeroAtIndependence) {
  const auto s = mi_gradient(table2({25, 25, 25, 25}, 2, 2));
  for (double g : s.gradient) EXPECT_NEAR(g, 0.0, 1e-15);
  for (double p : s.pmi) EXPECT_NEAR(p, 0.0, 1e-15);
  EXPECT_EQ(predict_mi_variance(table2({25, 25, 25, 25}, 2, 2), 3, 10.0), 0.0);
}

TEST(Gradient, FiniteDifferenceOnHandTable) {
  expect_gradient_matches(table2({40, 10, 10, 40}, 2, 2));
  // (PMI - MI)/n with PMI(0,0) = log2 1.6: frozen 0.003280...
  const auto s = mi_gradient(table2({40, 10, 10, 40}, 2, 2));
  EXPECT_NEAR(s.gradient[0], (std::log2(1.6) - 0.278071905112638) / 100, 1e-12);
  EXPECT_NEAR(s.gradient[1], (std::log2(0.4) - 0.278071905112638) / 100, 1e-12);
}

TEST(Gradient, FiniteDifferenceOnRandomTables) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 2 + rng() % 3, c = 2 + rng() % 3;
    std::vector<double> cells(r * c);
    for (auto& x : cells) x = 20 + static_cast<double>(rng() % 200);
    expect_gradient_matches(table2(cells, r, c));
  }
}

TEST(Gradient, TransposeSymmetryAndPositivity) {
  const auto t = table2({5, 9, 14, 3, 8, 22}, 2, 3);
  const auto a = mi_gradient(t), b = mi_gradient(t.transpose());
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 3; ++y) EXPECT_NEAR(a.gradient[x * 3 + y], b.gradient[y * 2 + x], 1e-15);
  EXPECT_THROW(mi_gradient(table2({0, 1, 1, 1}, 2, 2)), Error);
}

TEST(Gradient, VarianceShrinksQuadraticallyInN) {
  const auto small = table2({40, 10, 10, 40}, 2, 2), large = table2({80, 20, 20, 80}, 2, 2);
  EXPECT_NEAR(predict_mi_variance(small, 2, 3.0) / predict_mi_variance(large, 2, 3.0), 4.0, 1e-9);
  EXPECT_NEAR(predict_mi_variance(small, 4, 3.0) / predict_mi_variance(small, 1, 3.0), 4.0, 1e-9);
}

TEST(SnrStudy, NoNoiseMeansNoError) {
  const double levels[] = {INFINITY};
  const auto s = snr_study(table2({40, 10, 10, 40}, 2, 2), levels, 100, 1);
  for (double e : s.levels[0].errors) EXPECT_EQ(e, 0.0);
}

TEST(SnrStudy, ShapeOfTheErrorCurve) {
  const auto t = table2({400, 100, 100, 100, 100, 400, 100, 100, 100, 100, 400, 100, 100, 100,
                         100, 400},
                        4, 4);
  const double levels[] = {2, 10, 50, 100};
  const auto s = snr_study(t, levels, 1000, 3);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_LT(s.levels[i].std, s.levels[i - 1].std);
  for (std::size_t i = 2; i < 4; ++i) {
    EXPECT_TRUE(s.levels[i].unbiased);
    ASSERT_TRUE(s.levels[i].std_ratio);
    EXPECT_NEAR(*s.levels[i].std_ratio, 1.0, 0.15);
  }
  EXPECT_GT(s.levels[0].bias, s.levels[3].bias);
  std::ostringstream csv;
  s.write_csv(csv);
  std::size_t lines = 0;
  for (char ch : csv.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 1 + 4 * 1000u);
  EXPECT_THROW(snr_study(t, levels, 50, 3), Error);
}

TEST(SnrStudy, DeltaMethodBracketsWhenNoiseIsSmall) {
  // sigma sqrt(k) / n < 0.02 with n = 5000, k = 1.
  const auto t = table2({1800, 700, 500, 2000}, 2, 2);
  const double levels[] = {1250.0 / 60.0};  // sigma = 60
  const auto s = snr_study(t, levels, 2000, 4);
  EXPECT_GE(*s.levels[0].std_ratio, 0.85);
  EXPECT_LE(*s.levels[0].std_ratio, 1.15);
}

TEST(Noise, AggregatedNoiseVarianceIsKSigma2) {
  auto s = fstest::binary_schema(1);
  const auto zero = compute_tables(ClientDataset{"z", s, {}});
  const std::size_t k = 5;
  const double sigma = 4.0;
  std::vector<double> sums;
  for (std::uint64_t t = 0; sums.size() < 100000; ++t) {
    std::vector<double> acc(4, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      const auto n = noise_bundle(zero, NoiseCalibration{1, sigma}, derive_seed(t, c));
      for (std::size_t i = 0; i < 4; ++i) acc[i] += n.tables[0].cells()[i];
    }
    sums.insert(sums.end(), acc.begin(), acc.end());
  }
  EXPECT_NEAR(fstest::var_of(sums) / (k * sigma * sigma), 1.0, 0.02);
}

TEST(DecisionVariance, RatioNearOneAndZeroWithoutNoise) {
  const auto ex = fstest::homogeneous_experiment(12, 3000, 7);
  const double sigma = 15.5;
  for (std::size_t k : {1, 10}) {
    const auto r = decision_variance_check(ex, k, sigma, 3000, 11);
    ASSERT_TRUE(r.variance_ratio);
    EXPECT_GT(*r.variance_ratio, 0.8) << "k=" << k;
    EXPECT_LT(*r.variance_ratio, 1.2) << "k=" << k;
    EXPECT_EQ(r.w.size(), k);
    if (k == 1) {
      EXPECT_NE(r.w.members, r.w_prime.members);
    }
  }
  const auto r0 = decision_variance_check(ex, 3, 0.0, 200, 11);
  EXPECT_EQ(r0.var_d, 0.0);
  EXPECT_FALSE(r0.variance_ratio);
}

TEST(DecisionVariance, RejectsNonNeighbours) {
  const auto ex = fstest::homogeneous_experiment(6, 200, 7);
  EXPECT_THROW(decision_variance_check(ex, Federation{{0, 1}}, Federation{{2, 3}}, 1.0, 10, 1),
               Error);
}

namespace {

struct Pair {
  Federation better, worse;
  double gap;
};

Pair strict_neighbour_pair(const NoiseExperiment& ex, std::size_t k, std::uint64_t seed) {
  const auto pool = ex.exact_pool();
  std::mt19937_64 rng(seed);
  const auto w = random_federation(pool.size(), k, rng);
  while (true) {
    const auto w2 = neighbor(w, pool.size(), rng);
    const double a = pfl(aggregate(pool, w), ex.weights, pool.schema());
    const double b = pfl(aggregate(pool, w2), ex.weights, pool.schema());
    if (a < b) return {w, w2, b - a};
    if (b < a) return {w2, w, a - b};
  }
}

}  // namespace

TEST(Misorder, GaussianRateInModerateRegime) {
  const auto ex = fstest::planted_experiment(10, 2000, 3);
  const auto p = strict_neighbour_pair(ex, 4, 5);
  // Scale sigma so that sd(d) is about the gap.
  const auto probe = decision_variance_check(ex, p.better, p.worse, 1.0, 400, 2);
  const double sigma = p.gap / std::sqrt(probe.var_d);
  const auto r = misorder_check(ex, p.better, p.worse, sigma, 4000, 9);
  const double se = std::sqrt(r.gaussian_rate * (1 - r.gaussian_rate) / r.trials);
  EXPECT_NEAR(r.rate, r.gaussian_rate, 3 * se + 0.01);
  EXPECT_TRUE(r.within_bound);
  EXPECT_LE(r.rate, r.bound + 3 * r.standard_error);
  EXPECT_GT(r.misorders, 0u);
}

TEST(Misorder, LargeGapAndNoNoise) {
  const auto ex = fstest::planted_experiment(10, 2000, 3);
  const auto p = strict_neighbour_pair(ex, 4, 5);
  const auto probe = decision_variance_check(ex, p.better, p.worse, 1.0, 400, 2);
  const double sigma = 0.8 * p.gap / (6 * std::sqrt(probe.var_d));
  EXPECT_EQ(misorder_check(ex, p.better, p.worse, sigma, 3000, 9).misorders, 0u);
  const auto z = misorder_check(ex, p.better, p.worse, 0.0, 100, 9);
  EXPECT_EQ(z.rate, 0.0);
  EXPECT_THROW(misorder_check(ex, p.worse, p.better, 1.0, 10, 9), Error);
}

TEST(GlobalOptimality, NoNoiseAndNestedFailures) {
  const auto ex = fstest::planted_experiment(6, 1500, 4);
  const double none[] = {0.0};
  const auto z = global_optimality_check(ex, 3, 0.0, 50, none, {}, 1);
  for (double g : z.gaps) EXPECT_EQ(g, 0.0);
  const double mus[] = {0.0, 1e-4, 1e-3, 1e-2};
  const double margins[] = {0.0, 1.0, 6.0};
  const auto r = global_optimality_check(ex, 3, 20.0, 2000, mus, margins, 2);
  EXPECT_EQ(r.federations, 20u);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_LE(r.levels[i].failures, r.levels[i - 1].failures);
  for (const auto& l : r.levels) EXPECT_TRUE(l.within_bound);
  EXPECT_EQ(r.levels.back().failures, 0u);
  EXPECT_GT(r.sup_noise_mean, 0.0);
  const auto j = r.to_json(ex.exact_pool());
  EXPECT_TRUE(j.contains("sup_noise_estimate"));
}

TEST(NormalCdf, KnownValues) {
  EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-15);
  EXPECT_NEAR(normal_cdf(-1.0), 0.15865525393145707, 1e-12);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
}
