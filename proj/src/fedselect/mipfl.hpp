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

#ifndef FEDSELECT_MIPFL_HPP
#define FEDSELECT_MIPFL_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fedselect/tabular.hpp"

namespace fedselect {

/// Plug-in mutual information in bits. Cells whose joint or marginal
/// probability is not positive contribute nothing, which extends 0 log 0 to
/// negative noisy cells. Throws Errc::degenerate if the total is not positive.
double mi_from_counts(std::span<const double> cells, std::size_t rows, std::size_t cols);
double mi_from_counts(const ContingencyTable& table);

struct PflWeights {
  double alpha = 2.0;
  double beta = 0.89;
  double gamma = 0.11;
  double lambda = 1.33;

  void validate() const;
  bool operator==(const PflWeights&) const = default;
};

/// The four MI sums of the objective, before weighting.
struct PflTerms {
  double direct = 0.0;      // MI(S,T)
  double indirect = 0.0;    // sum_k MI(S,N_k)
  double redundancy = 0.0;  // sum_{k<j} MI(N_k,N_j)
  double signal = 0.0;      // sum_k MI(N_k,T)

  double value(const PflWeights& w) const noexcept {
    return w.alpha * direct + w.beta * indirect + w.gamma * redundancy - w.lambda * signal;
  }
};

/// Sorted pool indices of the members of a candidate federation.
struct Federation {
  std::vector<std::size_t> members;

  std::size_t size() const noexcept { return members.size(); }
  bool contains(std::size_t client) const;
  std::uint64_t digest() const noexcept;
  bool operator==(const Federation&) const = default;
  auto operator<=>(const Federation&) const = default;
};

/// Validated, read-only set of client releases sharing one schema and noise
/// scale. Clients are ordered by id. Cells are held in 2^-24 fixed point so
/// sums over any federation are exact regardless of summation order.
class BundlePool {
 public:
  BundlePool(SchemaPtr schema, std::vector<TableBundle> bundles);

  const FeatureSchema& schema() const noexcept { return *schema_; }
  const SchemaPtr& schema_ptr() const noexcept { return schema_; }
  std::size_t size() const noexcept { return bundles_.size(); }
  double noise_scale() const noexcept { return noise_scale_; }
  const std::string& id(std::size_t client) const { return bundles_.at(client).client_id; }
  const TableBundle& bundle(std::size_t client) const { return bundles_.at(client); }
  std::size_t index_of(const std::string& client_id) const;
  Federation federation(const std::vector<std::string>& ids) const;
  std::vector<std::string> ids(const Federation& federation) const;

  std::size_t cell_count() const noexcept { return cell_count_; }
  std::size_t table_offset(std::size_t slot) const { return offsets_.at(slot); }
  std::span<const std::int64_t> fixed_cells(std::size_t client) const;

 private:
  SchemaPtr schema_;
  std::vector<TableBundle> bundles_;
  double noise_scale_ = 0.0;
  std::vector<std::size_t> offsets_;
  std::size_t cell_count_ = 0;
  std::vector<std::int64_t> fixed_;
};

/// Summed tables of one federation with per-pair MI cached.
class AggregateView {
 public:
  const Federation& federation() const noexcept { return federation_; }
  std::size_t pair_count() const noexcept { return mi_.size(); }
  double mi(std::size_t slot) const { return mi_.at(slot); }
  double total(std::size_t slot) const { return totals_.at(slot); }
  ContingencyTable table(std::size_t slot) const;
  std::span<const std::int64_t> fixed_sums() const noexcept { return sums_; }

  friend AggregateView aggregate(const BundlePool&, const Federation&);
  friend AggregateView swap_update(const AggregateView&, std::size_t, std::size_t,
                                   const BundlePool&);

 private:
  void refresh();

  const BundlePool* pool_ = nullptr;
  Federation federation_;
  std::vector<std::int64_t> sums_;
  std::vector<double> totals_;
  std::vector<double> mi_;
};

AggregateView aggregate(const BundlePool& pool, const Federation& federation);
AggregateView aggregate(const BundlePool& pool, const std::vector<std::string>& client_ids);

/// Replaces member `out_client` by `in_client` by subtracting one release and
/// adding another; equal cell-for-cell to aggregate() over the new federation.
AggregateView swap_update(const AggregateView& view, std::size_t out_client,
                          std::size_t in_client, const BundlePool& pool);

PflTerms pfl_terms(const AggregateView& view, const FeatureSchema& schema);
double pfl(const AggregateView& view, const PflWeights& weights, const FeatureSchema& schema);

/// {federation, pfl, terms, n_W:{min,max}}
nlohmann::json pfl_report(const AggregateView& view, const PflWeights& weights,
                          const BundlePool& pool);

nlohmann::json weights_to_json(const PflWeights& w);
PflWeights weights_from_json(const nlohmann::json& j);

}  // namespace fedselect

#endif  // FEDSELECT_MIPFL_HPP
