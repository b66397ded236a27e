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

#ifndef FEDSELECT_TABULAR_HPP
#define FEDSELECT_TABULAR_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace fedselect {

/// A discrete variable: a name plus ordered value labels. The label position
/// is the domain index.
struct Variable {
  std::string name;
  std::vector<std::string> labels;

  std::size_t cardinality() const noexcept { return labels.size(); }
  bool operator==(const Variable&) const = default;
};

/// Unordered variable pair in canonical (first < second) orientation.
struct VarPair {
  std::size_t first = 0;
  std::size_t second = 0;

  static VarPair canonical(std::size_t a, std::size_t b) noexcept {
    return a < b ? VarPair{a, b} : VarPair{b, a};
  }
  bool operator==(const VarPair&) const = default;
  auto operator<=>(const VarPair&) const = default;
};

/// Features X_0..X_{K-1} plus the target T. Variable indices 0..K-1 address
/// features; index K is reserved for the target, so the target never appears
/// in the feature list.
class FeatureSchema {
 public:
  FeatureSchema(std::vector<Variable> features, std::size_t sensitive_index, Variable target);

  std::size_t feature_count() const noexcept { return features_.size(); }
  std::size_t variable_count() const noexcept { return features_.size() + 1; }
  std::size_t target_index() const noexcept { return features_.size(); }
  std::size_t sensitive_index() const noexcept { return sensitive_index_; }

  const std::vector<Variable>& features() const noexcept { return features_; }
  const Variable& target() const noexcept { return target_; }
  const Variable& variable(std::size_t index) const;
  std::size_t cardinality(std::size_t index) const { return variable(index).cardinality(); }
  std::optional<std::size_t> find(const std::string& name) const;

  /// All unordered distinct pairs over the K+1 variables, lexicographic.
  const std::vector<VarPair>& pairs() const noexcept { return pairs_; }
  std::size_t pair_count() const noexcept { return pairs_.size(); }
  /// Position of a pair inside pairs(); throws if either index is out of range.
  std::size_t pair_slot(VarPair pair) const;
  std::string pair_name(VarPair pair) const;

  /// Stable hex digest of names, labels and roles.
  const std::string& hash() const noexcept { return hash_; }

  bool operator==(const FeatureSchema& other) const {
    return features_ == other.features_ && sensitive_index_ == other.sensitive_index_ &&
           target_ == other.target_;
  }

 private:
  std::vector<Variable> features_;
  std::size_t sensitive_index_;
  Variable target_;
  std::vector<VarPair> pairs_;
  std::string hash_;
};

using SchemaPtr = std::shared_ptr<const FeatureSchema>;

/// Domain indices for every feature followed by the target index.
using Row = std::vector<std::uint32_t>;

struct ClientDataset {
  std::string client_id;
  SchemaPtr schema;
  std::vector<Row> rows;

  /// Throws Errc::schema_violation naming the first offending row and column.
  void validate() const;
  std::size_t size() const noexcept { return rows.size(); }
};

/// Dense dom(X) x dom(Y) grid of joint counts, row-major.
class ContingencyTable {
 public:
  ContingencyTable() = default;
  ContingencyTable(VarPair pair, std::size_t rows, std::size_t cols, bool exact = true);
  ContingencyTable(VarPair pair, std::size_t rows, std::size_t cols, std::vector<double> cells,
                   bool exact);

  VarPair pair() const noexcept { return pair_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool exact() const noexcept { return exact_; }
  void set_exact(bool exact) noexcept { exact_ = exact; }

  double& at(std::size_t x, std::size_t y) { return cells_[x * cols_ + y]; }
  double at(std::size_t x, std::size_t y) const { return cells_[x * cols_ + y]; }
  std::span<double> cells() noexcept { return cells_; }
  std::span<const double> cells() const noexcept { return cells_; }

  double total() const noexcept;
  ContingencyTable transpose() const;
  bool operator==(const ContingencyTable&) const = default;

 private:
  VarPair pair_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> cells_;
  bool exact_ = true;
};

/// One client's release: a table for every schema pair, in schema pair order.
struct TableBundle {
  std::string client_id;
  std::string schema_hash;
  double noise_scale = 0.0;
  std::vector<ContingencyTable> tables;

  bool exact() const noexcept;
  bool operator==(const TableBundle&) const = default;
};

TableBundle compute_tables(const ClientDataset& dataset);

/// Bin edges per continuous column name. A column with edges e_0 < ... < e_m
/// maps to m bins [e_i, e_{i+1}); values outside clamp to the end bins.
struct Binning {
  std::map<std::string, std::vector<double>> edges;
  bool operator==(const Binning&) const = default;
};

std::size_t bin_index(std::span<const double> edges, double value);

ClientDataset ingest_csv(const std::string& path, std::string client_id, SchemaPtr schema,
                         const Binning& binning);
ClientDataset read_csv(std::istream& in, std::string client_id, SchemaPtr schema,
                       const Binning& binning);
/// Binned columns are written as their bin's lower edge so re-ingestion is exact.
void write_csv(std::ostream& out, const ClientDataset& dataset, const Binning& binning);

// Synthetic data -----------------------------------------------------------

/// With probability `strength` the child takes parent_value mod dom(child);
/// couplings into the same child are mutually exclusive mechanisms, so their
/// strengths must sum to at most 1.
struct Coupling {
  std::string from;
  std::string to;
  double strength = 0.0;
  bool operator==(const Coupling&) const = default;
};

struct SynthClientSpec {
  std::string client_id;
  std::size_t rows = 0;
  /// Per-variable marginals by name; missing variables are uniform.
  std::map<std::string, std::vector<double>> marginals;
  std::vector<Coupling> couplings;
  bool operator==(const SynthClientSpec&) const = default;
};

struct SynthSpec {
  SchemaPtr schema;
  std::vector<SynthClientSpec> clients;
};

/// Variables are drawn in the order S, remaining features ascending, T; a
/// coupling's source must come earlier in that order than its destination.
std::vector<ClientDataset> synth_clients(const SynthSpec& spec, std::uint64_t seed);
ClientDataset synth_client(const SchemaPtr& schema, const SynthClientSpec& client,
                           std::uint64_t seed);

/// Knobs for the planted-bias pool used by the selection experiments: a binary
/// sensitive attribute, a few informative features, a binary target, and a
/// fraction of clients whose labels and one proxy feature leak S.
struct PlantedBiasOptions {
  std::size_t clients = 20;
  std::size_t rows_per_client = 1500;
  double biased_fraction = 0.5;
  double direct_bias = 0.2;
  double proxy_bias = 0.3;
  double signal = 0.5;
  std::size_t extra_features = 3;
  bool operator==(const PlantedBiasOptions&) const = default;
};

SynthSpec planted_bias_spec(const PlantedBiasOptions& options, std::uint64_t seed);

/// Held-out set drawn from every client's generator in equal shares (streams
/// independent of the clients' own rows), so it follows the pooled population.
ClientDataset pooled_holdout(const SynthSpec& spec, std::size_t rows, std::uint64_t seed);

// JSON ---------------------------------------------------------------------

nlohmann::json schema_to_json(const FeatureSchema& schema);
/// Accepts {features:[{name, labels}|{name, cardinality}], sensitive, target}.
SchemaPtr schema_from_json(const nlohmann::json& j);

nlohmann::json bundle_to_json(const TableBundle& bundle);
TableBundle bundle_from_json(const nlohmann::json& j);

nlohmann::json synth_client_to_json(const SynthClientSpec& spec);
SynthClientSpec synth_client_from_json(const nlohmann::json& j);

/// Plug-in entropy in bits of a non-negative count vector.
double entropy_bits(std::span<const double> counts);

}  // namespace fedselect

#endif  // FEDSELECT_TABULAR_HPP
