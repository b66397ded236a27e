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

#ifndef FEDSELECT_ANNEAL_HPP
#define FEDSELECT_ANNEAL_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "fedselect/mipfl.hpp"

namespace fedselect {

/// Geometric cooling schedule. Defaults follow the reference configuration:
/// tau0 = 1, eta = 0.98, tau_min = 1e-4, 5000 proposals, 15 per level.
struct ScheduleConfig {
  double tau0 = 1.0;
  double eta = 0.98;
  double tau_min = 1e-4;
  std::size_t max_iterations = 5000;
  std::size_t iters_per_temperature = 15;
  std::uint64_t seed = 0;

  void validate() const;
  /// Number of temperature levels with tau > tau_min, from the closed form.
  std::size_t temperature_levels() const;
  bool operator==(const ScheduleConfig&) const = default;
};

struct SwapMove {
  std::size_t out_client;
  std::size_t in_client;
};

/// Uniform single swap: one member out, one non-member in.
SwapMove propose_swap(const Federation& current, std::size_t pool_size, std::mt19937_64& rng);
Federation apply_swap(const Federation& current, SwapMove move);
Federation neighbor(const Federation& current, std::size_t pool_size, std::mt19937_64& rng);

Federation random_federation(std::size_t pool_size, std::size_t k, std::mt19937_64& rng);

struct TraceRecord {
  std::size_t iteration;
  double temperature;
  double proposal_pfl;
  bool accepted;
  bool uphill;
  double current_pfl;
  double incumbent_pfl;
  std::uint64_t federation_digest;
};

struct SearchTrace {
  std::vector<TraceRecord> records;  // one per proposal
  Federation initial_federation;
  double initial_pfl = 0.0;
  Federation best_federation;
  double best_pfl = 0.0;
  std::size_t evaluations = 0;
  std::size_t temperature_levels = 0;
  double wall_time = 0.0;

  /// iteration, temperature, proposal_pfl, accepted, incumbent_pfl
  void write_csv(std::ostream& out) const;
};

SearchTrace search(const BundlePool& pool, const PflWeights& weights, std::size_t k,
                   const ScheduleConfig& config);

struct ExhaustiveResult {
  Federation federation;
  double pfl = 0.0;
  std::size_t evaluations = 0;
};

std::uint64_t binomial(std::size_t n, std::size_t k);

/// Enumerates every federation of size k; ties go to the lexicographically
/// smallest member list. Refuses more than `budget` federations.
ExhaustiveResult exhaustive(const BundlePool& pool, const PflWeights& weights, std::size_t k,
                            std::uint64_t budget = 1'000'000);

/// Calls visit(federation) for every k-subset of [0, n) in lexicographic order.
template <typename Visit>
void for_each_combination(std::size_t n, std::size_t k, Visit&& visit) {
  if (k > n) return;
  Federation f;
  f.members.resize(k);
  for (std::size_t i = 0; i < k; ++i) f.members[i] = i;
  while (true) {
    visit(static_cast<const Federation&>(f));
    std::size_t i = k;
    while (i > 0 && f.members[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++f.members[i - 1];
    for (std::size_t j = i; j < k; ++j) f.members[j] = f.members[j - 1] + 1;
  }
}

struct MultiRunResult {
  std::vector<SearchTrace> runs;
  std::size_t best_run = 0;
  double mean_pfl = 0.0;
  double std_pfl = 0.0;
};

/// Independent seeded searches (seeds derived from config.seed); best-of-N.
MultiRunResult search_runs(const BundlePool& pool, const PflWeights& weights, std::size_t k,
                           const ScheduleConfig& config, std::size_t runs);

nlohmann::json schedule_to_json(const ScheduleConfig& c);
ScheduleConfig schedule_from_json(const nlohmann::json& j);

}  // namespace fedselect

#endif  // FEDSELECT_ANNEAL_HPP
