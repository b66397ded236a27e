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

#include "fedselect/mipfl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "fedselect/common.hpp"
#include "fedselect/privacy.hpp"

namespace fedselect {

using nlohmann::json;

double mi_from_counts(std::span<const double> cells, std::size_t rows, std::size_t cols) {
  require(cells.size() == rows * cols && rows > 0 && cols > 0, Errc::invalid_argument,
          "cell count does not match table shape");
  double n = 0.0;
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  for (std::size_t x = 0; x < rows; ++x)
    for (std::size_t y = 0; y < cols; ++y) {
      const double c = cells[x * cols + y];
      n += c;
      row_sum[x] += c;
      col_sum[y] += c;
    }
  if (!(n > 0.0) || !std::isfinite(n)) fail(Errc::degenerate, "degenerate aggregate");

  double mi = 0.0;
  for (std::size_t x = 0; x < rows; ++x) {
    if (row_sum[x] <= 0.0) continue;
    for (std::size_t y = 0; y < cols; ++y) {
      const double c = cells[x * cols + y];
      if (c <= 0.0 || col_sum[y] <= 0.0) continue;
      // p log(p / (px py)) with p = c/n, px = r/n, py = s/n.
      mi += (c / n) * std::log(c * n / (row_sum[x] * col_sum[y]));
    }
  }
  return mi / std::numbers::ln2;
}

double mi_from_counts(const ContingencyTable& table) {
  return mi_from_counts(table.cells(), table.rows(), table.cols());
}

void PflWeights::validate() const {
  for (double w : {alpha, beta, gamma, lambda})
    require(std::isfinite(w) && w >= 0.0, Errc::invalid_argument,
            "PFL weights must be finite and non-negative");
}

bool Federation::contains(std::size_t client) const {
  return std::binary_search(members.begin(), members.end(), client);
}

std::uint64_t Federation::digest() const noexcept {
  std::uint64_t h = mix64(members.size());
  for (std::size_t m : members) h = mix64(h ^ m);
  return h;
}

// Pool -------------------------------------------------------------------------

BundlePool::BundlePool(SchemaPtr schema, std::vector<TableBundle> bundles)
    : schema_(std::move(schema)), bundles_(std::move(bundles)) {
  require(schema_ != nullptr, Errc::invalid_argument, "bundle pool requires a schema");
  require(!bundles_.empty(), Errc::invalid_argument, "bundle pool is empty");
  std::sort(bundles_.begin(), bundles_.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  for (std::size_t i = 1; i < bundles_.size(); ++i)
    require(bundles_[i].client_id != bundles_[i - 1].client_id, Errc::invalid_argument,
            "duplicate bundle for client '" + bundles_[i].client_id + "'");

  const auto& s = *schema_;
  for (std::size_t slot = 0; slot < s.pair_count(); ++slot) {
    offsets_.push_back(cell_count_);
    const VarPair p = s.pairs()[slot];
    cell_count_ += s.cardinality(p.first) * s.cardinality(p.second);
  }
  noise_scale_ = bundles_.front().noise_scale;
  fixed_.reserve(cell_count_ * bundles_.size());
  for (const auto& b : bundles_) {
    require(b.schema_hash == s.hash(), Errc::mismatch,
            "bundle '" + b.client_id + "' has schema hash " + b.schema_hash + ", expected " +
                s.hash());
    require(b.noise_scale == noise_scale_, Errc::mismatch,
            "bundle '" + b.client_id + "' has noise scale " + std::to_string(b.noise_scale) +
                ", pool uses " + std::to_string(noise_scale_));
    require(b.tables.size() == s.pair_count(), Errc::mismatch,
            "bundle '" + b.client_id + "' has " + std::to_string(b.tables.size()) +
                " tables, schema needs " + std::to_string(s.pair_count()));
    for (std::size_t slot = 0; slot < s.pair_count(); ++slot) {
      const auto& t = b.tables[slot];
      const VarPair p = s.pairs()[slot];
      require(t.pair() == p && t.rows() == s.cardinality(p.first) &&
                  t.cols() == s.cardinality(p.second),
              Errc::mismatch,
              "bundle '" + b.client_id + "' is missing or misshapes pair " + s.pair_name(p));
      for (double c : t.cells()) {
        require(std::isfinite(c) && std::abs(c) < 1e11, Errc::mismatch,
                "bundle '" + b.client_id + "' has a non-finite or oversized cell");
        fixed_.push_back(std::llround(c / kNoiseGrid));
      }
    }
  }
}

std::size_t BundlePool::index_of(const std::string& client_id) const {
  auto it = std::lower_bound(bundles_.begin(), bundles_.end(), client_id,
                             [](const auto& b, const std::string& id) { return b.client_id < id; });
  if (it == bundles_.end() || it->client_id != client_id)
    fail(Errc::mismatch, "no bundle for client '" + client_id + "'");
  return static_cast<std::size_t>(it - bundles_.begin());
}

Federation BundlePool::federation(const std::vector<std::string>& client_ids) const {
  Federation f;
  for (const auto& id : client_ids) f.members.push_back(index_of(id));
  std::sort(f.members.begin(), f.members.end());
  require(std::adjacent_find(f.members.begin(), f.members.end()) == f.members.end(),
          Errc::invalid_argument, "federation lists a client twice");
  return f;
}

std::vector<std::string> BundlePool::ids(const Federation& federation) const {
  std::vector<std::string> out;
  for (std::size_t m : federation.members) out.push_back(id(m));
  return out;
}

std::span<const std::int64_t> BundlePool::fixed_cells(std::size_t client) const {
  require(client < bundles_.size(), Errc::invalid_argument, "client index out of range");
  return std::span<const std::int64_t>(fixed_).subspan(client * cell_count_, cell_count_);
}

// Aggregation ------------------------------------------------------------------

ContingencyTable AggregateView::table(std::size_t slot) const {
  const auto& s = pool_->schema();
  const VarPair p = s.pairs().at(slot);
  const std::size_t r = s.cardinality(p.first), c = s.cardinality(p.second);
  std::vector<double> cells(r * c);
  const std::size_t off = pool_->table_offset(slot);
  for (std::size_t i = 0; i < cells.size(); ++i)
    cells[i] = static_cast<double>(sums_[off + i]) * kNoiseGrid;
  return ContingencyTable(p, r, c, std::move(cells), pool_->noise_scale() == 0.0);
}

void AggregateView::refresh() {
  const auto& s = pool_->schema();
  mi_.assign(s.pair_count(), 0.0);
  totals_.assign(s.pair_count(), 0.0);
  std::vector<double> cells;
  for (std::size_t slot = 0; slot < s.pair_count(); ++slot) {
    const VarPair p = s.pairs()[slot];
    const std::size_t r = s.cardinality(p.first), c = s.cardinality(p.second);
    const std::size_t off = pool_->table_offset(slot);
    cells.resize(r * c);
    double n = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      cells[i] = static_cast<double>(sums_[off + i]) * kNoiseGrid;
      n += cells[i];
    }
    totals_[slot] = n;
    try {
      mi_[slot] = mi_from_counts(cells, r, c);
    } catch (const Error& e) {
      if (e.code() != Errc::degenerate) throw;
      std::string ids;
      for (const auto& id : pool_->ids(federation_)) ids += (ids.empty() ? "" : ",") + id;
      fail(Errc::degenerate, "degenerate aggregate for pair " + s.pair_name(p) +
                                 " in federation {" + ids + "}");
    }
  }
}

AggregateView aggregate(const BundlePool& pool, const Federation& federation) {
  require(!federation.members.empty(), Errc::invalid_argument, "federation is empty");
  require(std::is_sorted(federation.members.begin(), federation.members.end()) &&
              std::adjacent_find(federation.members.begin(), federation.members.end()) ==
                  federation.members.end(),
          Errc::invalid_argument, "federation members must be sorted and distinct");
  AggregateView v;
  v.pool_ = &pool;
  v.federation_ = federation;
  v.sums_.assign(pool.cell_count(), 0);
  for (std::size_t m : federation.members) {
    require(m < pool.size(), Errc::mismatch, "federation member outside the pool");
    const auto cells = pool.fixed_cells(m);
    for (std::size_t i = 0; i < cells.size(); ++i) v.sums_[i] += cells[i];
  }
  v.refresh();
  return v;
}

AggregateView aggregate(const BundlePool& pool, const std::vector<std::string>& client_ids) {
  return aggregate(pool, pool.federation(client_ids));
}

AggregateView swap_update(const AggregateView& view, std::size_t out_client,
                          std::size_t in_client, const BundlePool& pool) {
  require(view.pool_ == &pool, Errc::invalid_argument, "view was built from another pool");
  require(view.federation_.contains(out_client), Errc::invalid_argument,
          "swap-out client is not a federation member");
  require(in_client < pool.size() && !view.federation_.contains(in_client),
          Errc::invalid_argument, "swap-in client is already a member or outside the pool");
  AggregateView v;
  v.pool_ = &pool;
  v.federation_ = view.federation_;
  auto& m = v.federation_.members;
  m.erase(std::find(m.begin(), m.end(), out_client));
  m.insert(std::upper_bound(m.begin(), m.end(), in_client), in_client);
  v.sums_ = view.sums_;
  const auto out = pool.fixed_cells(out_client);
  const auto in = pool.fixed_cells(in_client);
  for (std::size_t i = 0; i < v.sums_.size(); ++i) v.sums_[i] += in[i] - out[i];
  v.refresh();
  return v;
}

// Objective --------------------------------------------------------------------

PflTerms pfl_terms(const AggregateView& view, const FeatureSchema& schema) {
  require(view.pair_count() == schema.pair_count(), Errc::mismatch,
          "aggregate covers " + std::to_string(view.pair_count()) + " pairs, schema needs " +
              std::to_string(schema.pair_count()));
  const std::size_t s = schema.sensitive_index();
  const std::size_t t = schema.target_index();
  PflTerms terms;
  for (std::size_t slot = 0; slot < schema.pair_count(); ++slot) {
    const VarPair p = schema.pairs()[slot];
    const double mi = view.mi(slot);
    const bool has_s = p.first == s || p.second == s;
    const bool has_t = p.second == t;  // target is the largest index
    if (has_s && has_t)
      terms.direct += mi;
    else if (has_s)
      terms.indirect += mi;
    else if (has_t)
      terms.signal += mi;
    else
      terms.redundancy += mi;
  }
  return terms;
}

double pfl(const AggregateView& view, const PflWeights& weights, const FeatureSchema& schema) {
  return pfl_terms(view, schema).value(weights);
}

json pfl_report(const AggregateView& view, const PflWeights& weights, const BundlePool& pool) {
  const auto terms = pfl_terms(view, pool.schema());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t slot = 0; slot < view.pair_count(); ++slot) {
    lo = std::min(lo, view.total(slot));
    hi = std::max(hi, view.total(slot));
  }
  return json{{"federation", pool.ids(view.federation())},
              {"pfl", terms.value(weights)},
              {"terms",
               {{"direct", terms.direct},
                {"indirect", terms.indirect},
                {"redundancy", terms.redundancy},
                {"signal", terms.signal}}},
              {"n_W", {{"min", lo}, {"max", hi}}}};
}

json weights_to_json(const PflWeights& w) {
  return json{{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"lambda", w.lambda}};
}

PflWeights weights_from_json(const json& j) {
  PflWeights w;
  w.alpha = j.value("alpha", w.alpha);
  w.beta = j.value("beta", w.beta);
  w.gamma = j.value("gamma", w.gamma);
  w.lambda = j.value("lambda", w.lambda);
  w.validate();
  return w;
}

}  // namespace fedselect
