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

#include "fedselect/noiselab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "fedselect/anneal.hpp"
#include "fedselect/common.hpp"
#include "fedselect/privacy.hpp"

namespace fedselect {

using nlohmann::json;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // sample variance
};

Moments moments(std::span<const double> xs) {
  Moments m;
  if (xs.empty()) return m;
  // Constant samples: the summed mean can round away from the value.
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
    m.mean = xs.front();
    return m;
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.var = ss / static_cast<double>(xs.size() - 1);
  return m;
}

double binomial_se(double p, std::size_t trials) {
  p = std::clamp(p, 0.0, 1.0);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Sensitivity ------------------------------------------------------------------

double MiSensitivity::predicted_variance(std::size_t k, double sigma) const {
  return static_cast<double>(k) * sigma * sigma / (total * total) * spread;
}

MiSensitivity mi_gradient(const ContingencyTable& table) {
  const std::size_t r = table.rows(), c = table.cols();
  require(r > 0 && c > 0, Errc::invalid_argument, "empty table");
  for (double v : table.cells())
    require(v > 0.0 && std::isfinite(v), Errc::invalid_argument,
            "MI gradient is undefined at a zero or negative cell");
  MiSensitivity s;
  s.rows = r;
  s.cols = c;
  std::vector<double> row(r, 0.0), col(c, 0.0);
  for (std::size_t x = 0; x < r; ++x)
    for (std::size_t y = 0; y < c; ++y) {
      row[x] += table.at(x, y);
      col[y] += table.at(x, y);
      s.total += table.at(x, y);
    }
  const double n = s.total;

  // Natural log throughout, one conversion at the end.
  std::vector<double> pmi(r * c);
  double mi = 0.0;
  for (std::size_t x = 0; x < r; ++x)
    for (std::size_t y = 0; y < c; ++y) {
      const double v = table.at(x, y);
      pmi[x * c + y] = std::log(v * n / (row[x] * col[y]));
      mi += v / n * pmi[x * c + y];
    }
  constexpr double to_bits = 1.0 / std::numbers::ln2;
  s.mi = mi * to_bits;
  s.pmi.resize(r * c);
  s.gradient.resize(r * c);
  for (std::size_t i = 0; i < r * c; ++i) {
    const double centered = (pmi[i] - mi) * to_bits;
    s.pmi[i] = pmi[i] * to_bits;
    s.gradient[i] = centered / n;
    s.spread += centered * centered;
  }
  return s;
}

double predict_mi_variance(const ContingencyTable& table, std::size_t k, double sigma) {
  require(sigma >= 0.0 && std::isfinite(sigma), Errc::invalid_argument,
          "sigma must be finite and non-negative");
  return mi_gradient(table).predicted_variance(k, sigma);
}

// SNR study --------------------------------------------------------------------

SnrStudy snr_study(const ContingencyTable& clean, std::span<const double> snr_levels,
                   std::size_t trials, std::uint64_t seed) {
  require(trials >= 100, Errc::invalid_argument, "SNR study needs at least 100 trials");
  require(!snr_levels.empty(), Errc::invalid_argument, "no SNR levels given");
  const auto sens = mi_gradient(clean);
  double magnitude = 0.0;
  for (double v : clean.cells()) magnitude += std::abs(v);
  magnitude /= static_cast<double>(clean.cells().size());

  SnrStudy study;
  study.table = clean;
  study.clean_mi = sens.mi;
  study.trials = trials;
  for (std::size_t li = 0; li < snr_levels.size(); ++li) {
    const double snr = snr_levels[li];
    require(snr > 0.0, Errc::invalid_argument, "SNR levels must be positive");
    SnrLevel level;
    level.snr = snr;
    level.sigma = std::isinf(snr) ? 0.0 : magnitude / snr;
    level.predicted_std = std::sqrt(sens.predicted_variance(1, level.sigma));
    std::vector<double> errors(trials, std::numeric_limits<double>::quiet_NaN());
    const std::uint64_t level_seed = derive_seed(seed, li);
    parallel_for(trials, [&](std::size_t t) {
      std::mt19937_64 rng(derive_seed(level_seed, t));
      std::normal_distribution<double> noise(0.0, 1.0);
      std::vector<double> cells(clean.cells().begin(), clean.cells().end());
      if (level.sigma > 0.0)
        for (double& v : cells) v += level.sigma * noise(rng);
      try {
        errors[t] = mi_from_counts(cells, clean.rows(), clean.cols()) - study.clean_mi;
      } catch (const Error& e) {
        if (e.code() != Errc::degenerate) throw;
      }
    });
    for (double e : errors)
      if (std::isnan(e))
        ++level.degenerate;
      else
        level.errors.push_back(e);
    const auto m = moments(level.errors);
    level.bias = m.mean;
    level.std = std::sqrt(m.var);
    level.unbiased =
        std::abs(level.bias) <= 3.0 * level.std / std::sqrt(static_cast<double>(trials));
    if (level.predicted_std > 0.0) level.std_ratio = level.std / level.predicted_std;
    study.levels.push_back(std::move(level));
  }
  return study;
}

void SnrStudy::write_csv(std::ostream& out) const {
  out << "level,snr,sigma,trial,error\n";
  out.precision(17);
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const auto& l = levels[li];
    for (std::size_t t = 0; t < l.errors.size(); ++t)
      out << li << ',' << l.snr << ',' << l.sigma << ',' << t << ',' << l.errors[t] << '\n';
  }
}

json SnrStudy::summary() const {
  json levels_json = json::array();
  for (const auto& l : levels)
    levels_json.push_back({{"snr", std::isinf(l.snr) ? json("inf") : json(l.snr)},
                           {"sigma", l.sigma},
                           {"bias", l.bias},
                           {"std", l.std},
                           {"predicted_std", l.predicted_std},
                           {"std_ratio", optional_json(l.std_ratio)},
                           {"unbiased", l.unbiased},
                           {"degenerate_trials", l.degenerate}});
  return json{{"clean_mi", clean_mi},
              {"table_total", table.total()},
              {"trials", trials},
              {"levels", std::move(levels_json)}};
}

// Experiments ------------------------------------------------------------------

BundlePool NoiseExperiment::exact_pool() const { return BundlePool(schema, exact); }

BundlePool NoiseExperiment::noisy_pool(double sigma, std::uint64_t seed) const {
  if (sigma == 0.0) return exact_pool();
  NoiseCalibration calib;
  calib.query_count = schema->pair_count();
  calib.sigma = sigma;
  std::vector<TableBundle> noisy;
  noisy.reserve(exact.size());
  for (const auto& b : exact) noisy.push_back(noise_bundle(b, calib, seed));
  return BundlePool(schema, std::move(noisy));
}

namespace {

double exact_pfl(const NoiseExperiment& ex, const BundlePool& pool, const Federation& f) {
  return pfl(aggregate(pool, f), ex.weights, pool.schema());
}

bool single_swap(const Federation& a, const Federation& b) {
  if (a.size() != b.size() || a == b) return false;
  std::size_t shared = 0;
  for (std::size_t m : a.members) shared += b.contains(m) ? 1 : 0;
  return shared + 1 == a.size();
}

json fed_json(const BundlePool& pool, const Federation& f) { return pool.ids(f); }

}  // namespace

DecisionVarianceReport decision_variance_check(const NoiseExperiment& ex, std::size_t k,
                                               double sigma, std::size_t trials,
                                               std::uint64_t seed) {
  require(ex.exact.size() > k, Errc::invalid_argument, "pool must be larger than k");
  std::mt19937_64 rng(derive_seed(seed, "federation"));
  const Federation w = random_federation(ex.exact.size(), k, rng);
  const Federation w_prime = neighbor(w, ex.exact.size(), rng);
  return decision_variance_check(ex, w, w_prime, sigma, trials, seed);
}

DecisionVarianceReport decision_variance_check(const NoiseExperiment& ex, const Federation& w,
                                               const Federation& w_prime, double sigma,
                                               std::size_t trials, std::uint64_t seed) {
  require(trials >= 2, Errc::invalid_argument, "need at least two trials");
  require(sigma >= 0.0 && std::isfinite(sigma), Errc::invalid_argument,
          "sigma must be finite and non-negative");
  require(single_swap(w, w_prime), Errc::invalid_argument,
          "federations must differ by exactly one swap");
  std::vector<double> y(trials), d(trials);
  parallel_for(trials, [&](std::size_t t) {
    const BundlePool pool = ex.noisy_pool(sigma, derive_seed(seed, t));
    const double yw = exact_pfl(ex, pool, w);
    y[t] = yw;
    d[t] = exact_pfl(ex, pool, w_prime) - yw;
  });
  DecisionVarianceReport r;
  r.w = w;
  r.w_prime = w_prime;
  r.k = w.size();
  r.sigma = sigma;
  r.trials = trials;
  const auto md = moments(d);
  r.mean_d = md.mean;
  r.var_d = md.var;
  r.sigma2_pfl = moments(y).var;
  if (r.sigma2_pfl > 0.0) r.variance_ratio = r.var_d / (2.0 * r.sigma2_pfl / r.k);
  return r;
}

json DecisionVarianceReport::to_json(const BundlePool& pool) const {
  return json{{"W", fed_json(pool, w)},       {"W_prime", fed_json(pool, w_prime)},
              {"k", k},                       {"sigma", sigma},
              {"trials", trials},             {"mean_d", mean_d},
              {"var_d", var_d},               {"sigma2_pfl", sigma2_pfl},
              {"variance_ratio", optional_json(variance_ratio)}};
}

MisorderReport misorder_check(const NoiseExperiment& ex, const Federation& w,
                              const Federation& w_prime, double sigma, std::size_t trials,
                              std::uint64_t seed) {
  require(trials >= 2, Errc::invalid_argument, "need at least two trials");
  require(sigma >= 0.0 && std::isfinite(sigma), Errc::invalid_argument,
          "sigma must be finite and non-negative");
  require(single_swap(w, w_prime), Errc::invalid_argument,
          "federations must differ by exactly one swap");
  const BundlePool exact = ex.exact_pool();
  MisorderReport r;
  r.w = w;
  r.w_prime = w_prime;
  r.k = w.size();
  r.sigma = sigma;
  r.trials = trials;
  r.delta_gap = exact_pfl(ex, exact, w_prime) - exact_pfl(ex, exact, w);
  require(r.delta_gap > 0.0, Errc::invalid_argument,
          "W' is not strictly worse than W on exact tables (gap " + std::to_string(r.delta_gap) +
              "); the bound is vacuous");

  std::vector<double> y(trials), d(trials);
  parallel_for(trials, [&](std::size_t t) {
    const BundlePool pool = ex.noisy_pool(sigma, derive_seed(seed, t));
    y[t] = exact_pfl(ex, pool, w);
    d[t] = exact_pfl(ex, pool, w_prime) - y[t];
  });
  for (double v : d) r.misorders += v <= 0.0 ? 1 : 0;
  r.rate = static_cast<double>(r.misorders) / static_cast<double>(trials);
  r.sigma2_pfl = moments(y).var;
  r.var_d = moments(d).var;
  if (r.sigma2_pfl > 0.0) {
    const double k = static_cast<double>(r.k);
    r.bound = std::exp(-k * r.delta_gap * r.delta_gap / (4.0 * r.sigma2_pfl));
    r.gaussian_rate = normal_cdf(-r.delta_gap / std::sqrt(2.0 * r.sigma2_pfl / k));
  } else {
    r.bound = 0.0;
    r.gaussian_rate = 0.0;
  }
  r.standard_error = binomial_se(r.bound, trials);
  r.within_bound = r.rate <= r.bound + 3.0 * r.standard_error;
  return r;
}

json MisorderReport::to_json(const BundlePool& pool) const {
  return json{{"W", fed_json(pool, w)},
              {"W_prime", fed_json(pool, w_prime)},
              {"k", k},
              {"sigma", sigma},
              {"trials", trials},
              {"delta_gap", delta_gap},
              {"sigma2_pfl", sigma2_pfl},
              {"var_d", var_d},
              {"misorders", misorders},
              {"empirical_misorder_rate", rate},
              {"bound", bound},
              {"standard_error", standard_error},
              {"gaussian_rate", gaussian_rate},
              {"within_bound", within_bound}};
}

GlobalOptimalityReport global_optimality_check(const NoiseExperiment& ex, std::size_t k,
                                               double sigma, std::size_t trials,
                                               std::span<const double> mus,
                                               std::span<const double> margins,
                                               std::uint64_t seed) {
  require(trials >= 2, Errc::invalid_argument, "need at least two trials");
  require(sigma >= 0.0 && std::isfinite(sigma), Errc::invalid_argument,
          "sigma must be finite and non-negative");
  const std::size_t pool_size = ex.exact.size();
  require(k >= 1 && k <= pool_size, Errc::invalid_argument,
          "federation size must lie in [1, pool size]");
  const std::uint64_t count = binomial(pool_size, k);
  require(count <= 10000, Errc::budget_exceeded,
          "global check enumerates C(" + std::to_string(pool_size) + "," + std::to_string(k) +
              ") = " + std::to_string(count) + " federations per trial; the limit is 10000");

  std::vector<Federation> all;
  for_each_combination(pool_size, k, [&](const Federation& f) { all.push_back(f); });
  const BundlePool exact = ex.exact_pool();
  std::vector<double> truth(all.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    truth[i] = exact_pfl(ex, exact, all[i]);
    if (truth[i] < truth[best]) best = i;
  }

  // xi[t * F + i]: noisy minus exact PFL of federation i in trial t.
  const std::size_t F = all.size();
  std::vector<double> xi(trials * F);
  std::vector<double> gaps(trials);
  parallel_for(trials, [&](std::size_t t) {
    const BundlePool pool = ex.noisy_pool(sigma, derive_seed(seed, t));
    std::size_t arg = 0;
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < F; ++i) {
      const double y = exact_pfl(ex, pool, all[i]);
      xi[t * F + i] = y - truth[i];
      if (y < lo) {
        lo = y;
        arg = i;
      }
    }
    gaps[t] = truth[arg] - truth[best];
  });

  GlobalOptimalityReport r;
  r.k = k;
  r.federations = F;
  r.trials = trials;
  r.sigma = sigma;
  r.true_best = all[best];
  r.true_best_pfl = truth[best];
  double sup_sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    double sup = 0.0;
    for (std::size_t i = 0; i < F; ++i) sup = std::max(sup, std::abs(xi[t * F + i]));
    sup_sum += sup;
  }
  r.sup_noise_mean = sup_sum / static_cast<double>(trials);
  std::vector<double> column(trials);
  for (std::size_t i = 0; i < F; ++i) {
    for (std::size_t t = 0; t < trials; ++t) column[t] = xi[t * F + i];
    r.sigma2_pfl = std::max(r.sigma2_pfl, moments(column).var);
  }
  r.gaps = std::move(gaps);

  std::vector<double> levels(mus.begin(), mus.end());
  const double sigma_pfl = std::sqrt(r.sigma2_pfl);
  for (double m : margins) levels.push_back(2.0 * (r.sup_noise_mean + m * sigma_pfl));
  for (double mu : levels) {
    require(mu >= 0.0 && std::isfinite(mu), Errc::invalid_argument,
            "mu must be finite and non-negative");
    GlobalOptimalityLevel level;
    level.mu = mu;
    for (double g : r.gaps) level.failures += g > mu ? 1 : 0;
    level.rate = static_cast<double>(level.failures) / static_cast<double>(trials);
    const double slack = mu / 2.0 - r.sup_noise_mean;
    if (slack > 0.0 && r.sigma2_pfl > 0.0) {
      level.bound = std::min(1.0, 2.0 * std::exp(-slack * slack / (2.0 * r.sigma2_pfl)));
      level.standard_error = binomial_se(*level.bound, trials);
      level.within_bound = level.rate <= *level.bound + 3.0 * level.standard_error;
    }
    r.levels.push_back(level);
  }
  return r;
}

json GlobalOptimalityReport::to_json(const BundlePool& pool) const {
  json lv = json::array();
  for (const auto& l : levels)
    lv.push_back({{"mu", l.mu},
                  {"failures", l.failures},
                  {"rate", l.rate},
                  {"bound", optional_json(l.bound)},
                  {"standard_error", l.standard_error},
                  {"within_bound", l.within_bound}});
  double max_gap = 0.0;
  for (double g : gaps) max_gap = std::max(max_gap, g);
  return json{{"k", k},
              {"federations", federations},
              {"trials", trials},
              {"sigma", sigma},
              {"true_best", fed_json(pool, true_best)},
              {"true_best_pfl", true_best_pfl},
              {"sup_noise_estimate", sup_noise_mean},
              {"sigma2_pfl", sigma2_pfl},
              {"max_gap", max_gap},
              {"levels", std::move(lv)}};
}

}  // namespace fedselect
