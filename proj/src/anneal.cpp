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

#include "fedselect/anneal.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <numeric>
#include <ostream>

#include "fedselect/common.hpp"

namespace fedselect {

using nlohmann::json;

void ScheduleConfig::validate() const {
  require(eta > 0.0 && eta < 1.0, Errc::invalid_argument, "cooling rate eta must lie in (0,1)");
  require(tau0 > 0.0 && tau_min > 0.0 && tau_min < tau0, Errc::invalid_argument,
          "temperatures must satisfy 0 < tau_min < tau0");
  require(max_iterations > 0 && iters_per_temperature > 0, Errc::invalid_argument,
          "iteration counts must be positive");
}

std::size_t ScheduleConfig::temperature_levels() const {
  return static_cast<std::size_t>(std::ceil(std::log(tau_min / tau0) / std::log(eta)));
}

SwapMove propose_swap(const Federation& current, std::size_t pool_size, std::mt19937_64& rng) {
  const std::size_t k = current.size();
  require(k >= 1 && pool_size > k, Errc::invalid_argument,
          "no valid neighbor: pool size " + std::to_string(pool_size) + " must exceed k = " +
              std::to_string(k));
  std::uniform_int_distribution<std::size_t> pick_out(0, k - 1);
  std::uniform_int_distribution<std::size_t> pick_in(0, pool_size - k - 1);
  const std::size_t out = current.members[pick_out(rng)];
  // The r-th non-member in ascending order.
  std::size_t r = pick_in(rng);
  std::size_t in = 0;
  for (std::size_t next = 0;; ++in) {
    if (next < k && current.members[next] == in) {
      ++next;
      continue;
    }
    if (r == 0) break;
    --r;
  }
  return {out, in};
}

Federation apply_swap(const Federation& current, SwapMove move) {
  Federation f = current;
  auto& m = f.members;
  m.erase(std::find(m.begin(), m.end(), move.out_client));
  m.insert(std::upper_bound(m.begin(), m.end(), move.in_client), move.in_client);
  return f;
}

Federation neighbor(const Federation& current, std::size_t pool_size, std::mt19937_64& rng) {
  return apply_swap(current, propose_swap(current, pool_size, rng));
}

Federation random_federation(std::size_t pool_size, std::size_t k, std::mt19937_64& rng) {
  require(k >= 1 && k <= pool_size, Errc::invalid_argument,
          "federation size must lie in [1, pool size]");
  std::vector<std::size_t> all(pool_size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool_size - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  Federation f{{all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k)}};
  std::sort(f.members.begin(), f.members.end());
  return f;
}

void SearchTrace::write_csv(std::ostream& out) const {
  out << "iteration,temperature,proposal_pfl,accepted,incumbent_pfl\n";
  out.precision(17);
  for (const auto& r : records)
    out << r.iteration << ',' << r.temperature << ',' << r.proposal_pfl << ','
        << (r.accepted ? 1 : 0) << ',' << r.incumbent_pfl << '\n';
}

SearchTrace search(const BundlePool& pool, const PflWeights& weights, std::size_t k,
                   const ScheduleConfig& config) {
  config.validate();
  weights.validate();
  require(k >= 1 && pool.size() >= k + 1, Errc::invalid_argument,
          "search needs a pool of at least k+1 clients (pool " + std::to_string(pool.size()) +
              ", k " + std::to_string(k) + ")");
  const auto start = std::chrono::steady_clock::now();
  const auto& schema = pool.schema();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SearchTrace trace;
  AggregateView current = aggregate(pool, random_federation(pool.size(), k, rng));
  double current_pfl = pfl(current, weights, schema);
  trace.initial_federation = current.federation();
  trace.initial_pfl = current_pfl;
  trace.best_federation = current.federation();
  trace.best_pfl = current_pfl;
  trace.evaluations = 1;

  // PFL is a deterministic function of the fixed releases, so each visited
  // federation is scored once per run.
  std::map<std::vector<std::size_t>, double> seen{{current.federation().members, current_pfl}};

  double tau = config.tau0;
  std::size_t proposals = 0;
  while (tau > config.tau_min && proposals < config.max_iterations) {
    ++trace.temperature_levels;
    for (std::size_t j = 0; j < config.iters_per_temperature && proposals < config.max_iterations;
         ++j) {
      const SwapMove move = propose_swap(current.federation(), pool.size(), rng);
      const Federation candidate = apply_swap(current.federation(), move);
      std::optional<AggregateView> candidate_view;
      double candidate_pfl;
      if (auto it = seen.find(candidate.members); it != seen.end()) {
        candidate_pfl = it->second;
      } else {
        candidate_view = swap_update(current, move.out_client, move.in_client, pool);
        candidate_pfl = pfl(*candidate_view, weights, schema);
        seen.emplace(candidate.members, candidate_pfl);
        ++trace.evaluations;
      }
      const double delta = candidate_pfl - current_pfl;
      const bool accept = delta <= 0.0 || unit(rng) < std::exp(-delta / tau);
      if (accept) {
        current = candidate_view ? std::move(*candidate_view)
                                 : swap_update(current, move.out_client, move.in_client, pool);
        current_pfl = candidate_pfl;
        if (current_pfl < trace.best_pfl) {
          trace.best_pfl = current_pfl;
          trace.best_federation = current.federation();
        }
      }
      trace.records.push_back({proposals, tau, candidate_pfl, accept, delta > 0.0, current_pfl,
                               trace.best_pfl, candidate.digest()});
      ++proposals;
    }
    tau *= config.eta;
  }
  trace.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / i;
  return static_cast<std::uint64_t>(std::llround(r));
}

ExhaustiveResult exhaustive(const BundlePool& pool, const PflWeights& weights, std::size_t k,
                            std::uint64_t budget) {
  weights.validate();
  require(k >= 1 && k <= pool.size(), Errc::invalid_argument,
          "federation size must lie in [1, pool size]");
  const std::uint64_t count = binomial(pool.size(), k);
  require(count <= budget, Errc::budget_exceeded,
          "exhaustive search over C(" + std::to_string(pool.size()) + "," + std::to_string(k) +
              ") = " + std::to_string(count) + " federations exceeds the budget of " +
              std::to_string(budget));
  ExhaustiveResult best;
  best.pfl = std::numeric_limits<double>::infinity();
  for_each_combination(pool.size(), k, [&](const Federation& f) {
    const double value = pfl(aggregate(pool, f), weights, pool.schema());
    ++best.evaluations;
    if (value < best.pfl) {
      best.pfl = value;
      best.federation = f;
    }
  });
  return best;
}

MultiRunResult search_runs(const BundlePool& pool, const PflWeights& weights, std::size_t k,
                           const ScheduleConfig& config, std::size_t runs) {
  require(runs >= 1, Errc::invalid_argument, "need at least one search run");
  MultiRunResult result;
  result.runs.resize(runs);
  parallel_for(runs, [&](std::size_t r) {
    ScheduleConfig c = config;
    c.seed = derive_seed(config.seed, r);
    result.runs[r] = search(pool, weights, k, c);
  });
  double sum = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    sum += result.runs[r].best_pfl;
    const auto& best = result.runs[result.best_run];
    const auto& cur = result.runs[r];
    if (cur.best_pfl < best.best_pfl ||
        (cur.best_pfl == best.best_pfl && cur.best_federation < best.best_federation))
      result.best_run = r;
  }
  result.mean_pfl = sum / static_cast<double>(runs);
  double ss = 0.0;
  for (const auto& run : result.runs) {
    const double d = run.best_pfl - result.mean_pfl;
    ss += d * d;
  }
  result.std_pfl = runs > 1 ? std::sqrt(ss / static_cast<double>(runs - 1)) : 0.0;
  return result;
}

json schedule_to_json(const ScheduleConfig& c) {
  return json{{"tau0", c.tau0},
              {"eta", c.eta},
              {"tau_min", c.tau_min},
              {"max_iterations", c.max_iterations},
              {"iters_per_temperature", c.iters_per_temperature}};
}

ScheduleConfig schedule_from_json(const json& j) {
  ScheduleConfig c;
  c.tau0 = j.value("tau0", c.tau0);
  c.eta = j.value("eta", c.eta);
  c.tau_min = j.value("tau_min", c.tau_min);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.iters_per_temperature = j.value("iters_per_temperature", c.iters_per_temperature);
  c.validate();
  return c;
}

}  // namespace fedselect
