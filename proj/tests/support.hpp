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

#ifndef FEDSELECT_TESTS_SUPPORT_HPP
#define FEDSELECT_TESTS_SUPPORT_HPP

// Test helpers and reference oracles. The oracles deliberately avoid the
// library's code paths: MI is computed from raw rows as H(X) + H(Y) - H(X,Y)
// with std::map counting, not from dense tables.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fedselect/common.hpp"
#include "fedselect/mipfl.hpp"
#include "fedselect/noiselab.hpp"
#include "fedselect/tabular.hpp"

namespace fstest {

using namespace fedselect;

inline SchemaPtr binary_schema(std::size_t features, std::size_t sensitive = 0) {
  std::vector<Variable> vars;
  for (std::size_t f = 0; f < features; ++f) vars.push_back({"x" + std::to_string(f), {"0", "1"}});
  return std::make_shared<const FeatureSchema>(std::move(vars), sensitive,
                                               Variable{"t", {"0", "1"}});
}

inline SchemaPtr mixed_schema(const std::vector<std::size_t>& cards, std::size_t target_card) {
  std::vector<Variable> vars;
  for (std::size_t f = 0; f < cards.size(); ++f) {
    Variable v{"v" + std::to_string(f), {}};
    for (std::size_t c = 0; c < cards[f]; ++c) v.labels.push_back(std::to_string(c));
    vars.push_back(std::move(v));
  }
  Variable t{"t", {}};
  for (std::size_t c = 0; c < target_card; ++c) t.labels.push_back(std::to_string(c));
  return std::make_shared<const FeatureSchema>(std::move(vars), 0, std::move(t));
}

inline ClientDataset random_dataset(const SchemaPtr& schema, std::size_t rows, std::uint64_t seed,
                                    std::string id = "c") {
  std::mt19937_64 rng(seed);
  ClientDataset d{std::move(id), schema, {}};
  for (std::size_t r = 0; r < rows; ++r) {
    Row row(schema->variable_count());
    for (std::size_t v = 0; v < row.size(); ++v)
      row[v] = static_cast<std::uint32_t>(rng() % schema->cardinality(v));
    // A little structure so MI terms are not all near zero.
    if (rng() % 3 == 0) row.back() = row[0] % schema->cardinality(schema->target_index());
    d.rows.push_back(std::move(row));
  }
  return d;
}

template <typename Key>
double entropy_of(const std::map<Key, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [k, c] : counts)
    if (c > 0) h -= (c / n) * std::log2(c / n);
  return h;
}

/// MI in bits between variables a and b over the pooled rows.
inline double oracle_mi(const std::vector<const ClientDataset*>& parts, std::size_t a,
                        std::size_t b) {
  std::map<std::uint32_t, double> ca, cb;
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> cab;
  double n = 0;
  for (const auto* p : parts)
    for (const auto& row : p->rows) {
      ca[row[a]] += 1;
      cb[row[b]] += 1;
      cab[{row[a], row[b]}] += 1;
      n += 1;
    }
  return entropy_of(ca, n) + entropy_of(cb, n) - entropy_of(cab, n);
}

/// The weighted objective straight from pooled rows.
inline double oracle_pfl(const std::vector<const ClientDataset*>& parts,
                         const FeatureSchema& schema, const PflWeights& w) {
  const std::size_t s = schema.sensitive_index(), t = schema.target_index();
  std::vector<std::size_t> others;
  for (std::size_t f = 0; f < schema.feature_count(); ++f)
    if (f != s) others.push_back(f);
  double direct = oracle_mi(parts, s, t), indirect = 0, redundancy = 0, signal = 0;
  for (std::size_t i = 0; i < others.size(); ++i) {
    indirect += oracle_mi(parts, s, others[i]);
    signal += oracle_mi(parts, others[i], t);
    for (std::size_t j = i + 1; j < others.size(); ++j)
      redundancy += oracle_mi(parts, others[i], others[j]);
  }
  return w.alpha * direct + w.beta * indirect + w.gamma * redundancy - w.lambda * signal;
}

inline BundlePool exact_pool(const std::vector<ClientDataset>& clients) {
  std::vector<TableBundle> bundles;
  for (const auto& c : clients) bundles.push_back(compute_tables(c));
  return BundlePool(clients.front().schema, std::move(bundles));
}

/// Clients that all share the first client's generator, so every federation
/// of a given size has the same expected tables.
inline NoiseExperiment homogeneous_experiment(std::size_t clients, std::size_t rows,
                                              std::uint64_t seed) {
  PlantedBiasOptions o;
  o.biased_fraction = 0.0;
  o.clients = clients;
  o.rows_per_client = rows;
  auto spec = planted_bias_spec(o, seed);
  for (auto& c : spec.clients) {
    c.marginals = spec.clients[0].marginals;
    c.couplings = spec.clients[0].couplings;
  }
  NoiseExperiment ex{spec.schema, {}, PflWeights{}};
  for (const auto& c : synth_clients(spec, seed)) ex.exact.push_back(compute_tables(c));
  return ex;
}

inline NoiseExperiment planted_experiment(std::size_t clients, std::size_t rows,
                                          std::uint64_t seed) {
  PlantedBiasOptions o;
  o.clients = clients;
  o.rows_per_client = rows;
  const auto spec = planted_bias_spec(o, seed);
  NoiseExperiment ex{spec.schema, {}, PflWeights{}};
  for (const auto& c : synth_clients(spec, seed)) ex.exact.push_back(compute_tables(c));
  return ex;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace fstest

#endif  // FEDSELECT_TESTS_SUPPORT_HPP
