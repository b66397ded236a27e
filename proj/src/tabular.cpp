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

#include "fedselect/tabular.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "fedselect/common.hpp"

namespace fedselect {

using nlohmann::json;

// Schema ---------------------------------------------------------------------

FeatureSchema::FeatureSchema(std::vector<Variable> features, std::size_t sensitive_index,
                             Variable target)
    : features_(std::move(features)), sensitive_index_(sensitive_index), target_(std::move(target)) {
  require(!features_.empty(), Errc::schema_violation, "schema needs at least one feature");
  require(sensitive_index_ < features_.size(), Errc::schema_violation,
          "sensitive index " + std::to_string(sensitive_index_) + " is not a feature index");
  std::set<std::string> names;
  for (const auto& f : features_) {
    require(!f.name.empty(), Errc::schema_violation, "feature with empty name");
    require(f.cardinality() >= 2, Errc::schema_violation,
            "feature '" + f.name + "' has domain cardinality < 2");
    require(names.insert(f.name).second, Errc::schema_violation,
            "duplicate feature name '" + f.name + "'");
  }
  require(target_.cardinality() >= 2, Errc::schema_violation, "target has domain cardinality < 2");
  require(!names.contains(target_.name), Errc::schema_violation,
          "target '" + target_.name + "' is also listed as a feature");

  const std::size_t v = variable_count();
  pairs_.reserve(v * (v - 1) / 2);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = i + 1; j < v; ++j) pairs_.push_back({i, j});

  std::ostringstream canon;
  canon << "S=" << sensitive_index_ << ';';
  for (const auto& f : features_) {
    canon << 'F' << f.name << '[';
    for (const auto& l : f.labels) canon << l << ',';
    canon << ']';
  }
  canon << 'T' << target_.name << '[';
  for (const auto& l : target_.labels) canon << l << ',';
  canon << ']';
  std::ostringstream hex;
  hex << std::hex;
  hex.width(16);
  hex.fill('0');
  hex << fnv1a64(canon.str());
  hash_ = hex.str();
}

const Variable& FeatureSchema::variable(std::size_t index) const {
  if (index == features_.size()) return target_;
  require(index < features_.size(), Errc::invalid_argument,
          "variable index " + std::to_string(index) + " out of range");
  return features_[index];
}

std::optional<std::size_t> FeatureSchema::find(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].name == name) return i;
  if (target_.name == name) return target_index();
  return std::nullopt;
}

std::size_t FeatureSchema::pair_slot(VarPair pair) const {
  const std::size_t v = variable_count();
  require(pair.first < pair.second && pair.second < v, Errc::invalid_argument,
          "invalid variable pair (" + std::to_string(pair.first) + "," +
              std::to_string(pair.second) + ")");
  // Rows before `first` contribute (v-1) + (v-2) + ... + (v-first) pairs.
  const std::size_t i = pair.first;
  return i * v - i * (i + 1) / 2 + (pair.second - i - 1);
}

std::string FeatureSchema::pair_name(VarPair pair) const {
  return "(" + variable(pair.first).name + "," + variable(pair.second).name + ")";
}

// Dataset ----------------------------------------------------------------------

void ClientDataset::validate() const {
  require(schema != nullptr, Errc::schema_violation, "dataset '" + client_id + "' has no schema");
  const std::size_t width = schema->variable_count();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == width, Errc::schema_violation,
            "client '" + client_id + "' row " + std::to_string(r) + " has " +
                std::to_string(rows[r].size()) + " values, expected " + std::to_string(width));
    for (std::size_t c = 0; c < width; ++c) {
      if (rows[r][c] >= schema->cardinality(c))
        fail(Errc::schema_violation, "client '" + client_id + "' row " + std::to_string(r) +
                                         " feature '" + schema->variable(c).name + "' value " +
                                         std::to_string(rows[r][c]) + " outside domain of size " +
                                         std::to_string(schema->cardinality(c)));
    }
  }
}

// Tables -----------------------------------------------------------------------

ContingencyTable::ContingencyTable(VarPair pair, std::size_t rows, std::size_t cols, bool exact)
    : pair_(pair), rows_(rows), cols_(cols), cells_(rows * cols, 0.0), exact_(exact) {}

ContingencyTable::ContingencyTable(VarPair pair, std::size_t rows, std::size_t cols,
                                   std::vector<double> cells, bool exact)
    : pair_(pair), rows_(rows), cols_(cols), cells_(std::move(cells)), exact_(exact) {
  require(cells_.size() == rows_ * cols_, Errc::invalid_argument,
          "table cell count " + std::to_string(cells_.size()) + " does not match shape " +
              std::to_string(rows_) + "x" + std::to_string(cols_));
}

double ContingencyTable::total() const noexcept {
  return std::accumulate(cells_.begin(), cells_.end(), 0.0);
}

ContingencyTable ContingencyTable::transpose() const {
  ContingencyTable t({pair_.second, pair_.first}, cols_, rows_, exact_);
  for (std::size_t x = 0; x < rows_; ++x)
    for (std::size_t y = 0; y < cols_; ++y) t.at(y, x) = at(x, y);
  return t;
}

bool TableBundle::exact() const noexcept {
  return std::all_of(tables.begin(), tables.end(), [](const auto& t) { return t.exact(); });
}

TableBundle compute_tables(const ClientDataset& dataset) {
  dataset.validate();
  const FeatureSchema& schema = *dataset.schema;
  TableBundle bundle{dataset.client_id, schema.hash(), 0.0, {}};
  bundle.tables.reserve(schema.pair_count());
  for (VarPair p : schema.pairs())
    bundle.tables.emplace_back(p, schema.cardinality(p.first), schema.cardinality(p.second));
  for (const Row& row : dataset.rows) {
    for (std::size_t s = 0; s < schema.pair_count(); ++s) {
      const VarPair p = schema.pairs()[s];
      bundle.tables[s].at(row[p.first], row[p.second]) += 1.0;
    }
  }
  return bundle;
}

// CSV --------------------------------------------------------------------------

std::size_t bin_index(std::span<const double> edges, double value) {
  require(edges.size() >= 3, Errc::invalid_argument, "binning needs at least two bins");
  const auto it = std::upper_bound(edges.begin(), edges.end(), value);
  const auto raw = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
  const auto last = static_cast<std::ptrdiff_t>(edges.size()) - 2;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(raw, 0, last));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) fail(Errc::parse_error, "line " + std::to_string(line_no) + ": unterminated quote");
  out.push_back(std::move(field));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

struct ColumnPlan {
  std::size_t csv_column;
  std::size_t variable;
  const std::vector<double>* edges;  // null for categorical
};

}  // namespace

ClientDataset read_csv(std::istream& in, std::string client_id, SchemaPtr schema,
                       const Binning& binning) {
  require(schema != nullptr, Errc::invalid_argument, "read_csv requires a schema");
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(Errc::parse_error, "line 1: missing header row");
  ++line_no;
  const auto header = split_csv_line(line, line_no);

  std::vector<ColumnPlan> plan;
  for (std::size_t v = 0; v < schema->variable_count(); ++v) {
    const auto& var = schema->variable(v);
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return trim(h) == var.name; });
    if (it == header.end())
      fail(Errc::parse_error, "line 1: header lacks column '" + var.name + "'");
    const std::vector<double>* edges = nullptr;
    if (auto b = binning.edges.find(var.name); b != binning.edges.end()) {
      edges = &b->second;
      require(edges->size() == var.cardinality() + 1, Errc::config,
              "column '" + var.name + "' has " + std::to_string(edges->size()) +
                  " bin edges but domain size " + std::to_string(var.cardinality()));
      require(std::is_sorted(edges->begin(), edges->end()), Errc::config,
              "bin edges for '" + var.name + "' are not sorted");
    }
    plan.push_back({static_cast<std::size_t>(it - header.begin()), v, edges});
  }

  ClientDataset ds{std::move(client_id), schema, {}};
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line, line_no);
    if (fields.size() != header.size())
      fail(Errc::parse_error, "line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
    Row row(schema->variable_count());
    for (const auto& col : plan) {
      const std::string value = trim(fields[col.csv_column]);
      const auto& var = schema->variable(col.variable);
      if (col.edges) {
        double x = 0.0;
        std::istringstream parse(value);
        if (!(parse >> x) || !(parse >> std::ws).eof())
          fail(Errc::parse_error, "line " + std::to_string(line_no) + ", column '" + var.name +
                                      "': '" + value + "' is not numeric");
        row[col.variable] = static_cast<std::uint32_t>(bin_index(*col.edges, x));
      } else {
        auto l = std::find(var.labels.begin(), var.labels.end(), value);
        if (l == var.labels.end())
          fail(Errc::schema_violation, "line " + std::to_string(line_no) + " (row " +
                                           std::to_string(ds.rows.size()) + "), column '" +
                                           var.name + "': unknown category '" + value + "'");
        row[col.variable] = static_cast<std::uint32_t>(l - var.labels.begin());
      }
    }
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

ClientDataset ingest_csv(const std::string& path, std::string client_id, SchemaPtr schema,
                         const Binning& binning) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open '" + path + "'");
  try {
    return read_csv(in, std::move(client_id), std::move(schema), binning);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const ClientDataset& dataset, const Binning& binning) {
  const auto& schema = *dataset.schema;
  for (std::size_t v = 0; v < schema.variable_count(); ++v)
    out << (v ? "," : "") << schema.variable(v).name;
  out << '\n';
  out.precision(17);
  for (const Row& row : dataset.rows) {
    for (std::size_t v = 0; v < schema.variable_count(); ++v) {
      if (v) out << ',';
      const auto& var = schema.variable(v);
      if (auto b = binning.edges.find(var.name); b != binning.edges.end())
        out << b->second[row[v]];
      else
        out << var.labels[row[v]];
    }
    out << '\n';
  }
}

// Synthetic data ---------------------------------------------------------------

namespace {

std::vector<double> checked_marginal(const std::vector<double>& p, std::size_t card,
                                     const std::string& name) {
  require(p.size() == card, Errc::invalid_argument,
          "marginal for '" + name + "' has " + std::to_string(p.size()) + " entries, expected " +
              std::to_string(card));
  double sum = 0.0;
  for (double x : p) {
    require(x >= 0.0 && std::isfinite(x), Errc::invalid_argument,
            "marginal for '" + name + "' has a negative or non-finite entry");
    sum += x;
  }
  require(std::abs(sum - 1.0) <= 1e-9, Errc::invalid_argument,
          "marginal for '" + name + "' sums to " + std::to_string(sum) + ", not 1");
  return p;
}

struct Mechanism {
  std::size_t parent;
  double strength;
};

}  // namespace

ClientDataset synth_client(const SchemaPtr& schema, const SynthClientSpec& client,
                           std::uint64_t seed) {
  require(schema != nullptr, Errc::invalid_argument, "synth_client requires a schema");
  const std::size_t nv = schema->variable_count();

  std::vector<std::size_t> order{schema->sensitive_index()};
  for (std::size_t f = 0; f < schema->feature_count(); ++f)
    if (f != schema->sensitive_index()) order.push_back(f);
  order.push_back(schema->target_index());
  std::vector<std::size_t> position(nv);
  for (std::size_t i = 0; i < nv; ++i) position[order[i]] = i;

  std::vector<std::discrete_distribution<std::uint32_t>> marginals;
  for (std::size_t v = 0; v < nv; ++v) {
    const auto& var = schema->variable(v);
    std::vector<double> p(var.cardinality(), 1.0 / static_cast<double>(var.cardinality()));
    if (auto it = client.marginals.find(var.name); it != client.marginals.end())
      p = checked_marginal(it->second, var.cardinality(), var.name);
    marginals.emplace_back(p.begin(), p.end());
  }
  for (const auto& [name, _] : client.marginals)
    require(schema->find(name).has_value(), Errc::invalid_argument,
            "marginal given for unknown variable '" + name + "'");

  std::vector<std::vector<Mechanism>> mechanisms(nv);
  std::vector<double> used(nv, 0.0);
  for (const auto& c : client.couplings) {
    const auto from = schema->find(c.from);
    const auto to = schema->find(c.to);
    require(from && to, Errc::invalid_argument,
            "coupling " + c.from + "->" + c.to + " names an unknown variable");
    require(position[*from] < position[*to], Errc::invalid_argument,
            "coupling " + c.from + "->" + c.to + " goes against generation order");
    require(c.strength >= 0.0 && c.strength <= 1.0, Errc::invalid_argument,
            "coupling " + c.from + "->" + c.to + " strength outside [0,1]");
    used[*to] += c.strength;
    require(used[*to] <= 1.0 + 1e-12, Errc::invalid_argument,
            "couplings into '" + c.to + "' sum above 1");
    if (c.strength > 0.0) mechanisms[*to].push_back({*from, c.strength});
  }

  std::mt19937_64 rng(derive_seed(seed, client.client_id));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ClientDataset ds{client.client_id, schema, {}};
  ds.rows.reserve(client.rows);
  for (std::size_t r = 0; r < client.rows; ++r) {
    Row row(nv, 0);
    for (std::size_t v : order) {
      double u = mechanisms[v].empty() ? 1.0 : unit(rng);
      bool copied = false;
      for (const auto& m : mechanisms[v]) {
        if (u < m.strength) {
          row[v] = static_cast<std::uint32_t>(row[m.parent] % schema->cardinality(v));
          copied = true;
          break;
        }
        u -= m.strength;
      }
      if (!copied) row[v] = marginals[v](rng);
    }
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

std::vector<ClientDataset> synth_clients(const SynthSpec& spec, std::uint64_t seed) {
  std::set<std::string> ids;
  for (const auto& c : spec.clients)
    require(ids.insert(c.client_id).second, Errc::invalid_argument,
            "duplicate synthetic client id '" + c.client_id + "'");
  std::vector<ClientDataset> out(spec.clients.size());
  parallel_for(spec.clients.size(),
               [&](std::size_t i) { out[i] = synth_client(spec.schema, spec.clients[i], seed); });
  return out;
}

SynthSpec planted_bias_spec(const PlantedBiasOptions& o, std::uint64_t seed) {
  require(o.clients >= 2, Errc::invalid_argument, "planted-bias pool needs at least 2 clients");
  require(o.extra_features >= 2, Errc::invalid_argument, "planted-bias pool needs >= 2 features");
  require(o.biased_fraction >= 0.0 && o.biased_fraction <= 1.0, Errc::invalid_argument,
          "biased_fraction outside [0,1]");
  require(o.direct_bias + o.signal <= 1.0 && o.proxy_bias <= 1.0 && o.direct_bias >= 0.0 &&
              o.signal >= 0.0 && o.proxy_bias >= 0.0,
          Errc::invalid_argument, "planted-bias strengths must be in [0,1] and bias+signal <= 1");

  std::vector<Variable> features{{"sex", {"0", "1"}}};
  for (std::size_t f = 0; f < o.extra_features; ++f) {
    const std::size_t card = f % 2 == 0 ? 3 : 4;
    Variable v{"x" + std::to_string(f + 1), {}};
    for (std::size_t c = 0; c < card; ++c) v.labels.push_back(std::to_string(c));
    features.push_back(std::move(v));
  }
  auto schema = std::make_shared<const FeatureSchema>(std::move(features), 0,
                                                      Variable{"label", {"0", "1"}});

  std::mt19937_64 rng(derive_seed(seed, "planted-bias"));
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  const auto biased = static_cast<std::size_t>(std::llround(o.biased_fraction * o.clients));
  SynthSpec spec{schema, {}};
  for (std::size_t c = 0; c < o.clients; ++c) {
    SynthClientSpec cs;
    char id[16];
    std::snprintf(id, sizeof id, "c%02zu", c);
    cs.client_id = id;
    cs.rows = o.rows_per_client;
    // Client-specific feature marginals give non-IID pools.
    for (std::size_t v = 1; v < schema->feature_count(); ++v) {
      std::vector<double> p(schema->cardinality(v));
      double sum = 0.0;
      for (auto& x : p) sum += (x = jitter(rng));
      for (auto& x : p) x /= sum;
      cs.marginals[schema->variable(v).name] = p;
    }
    // Label signal is split between the first two non-sensitive features.
    const bool is_biased = c < biased;
    const double direct = is_biased ? o.direct_bias : 0.0;
    const double signal = o.signal * jitter(rng);
    const double sig = std::min(signal, 1.0 - direct);
    cs.couplings.push_back({"sex", "label", direct});
    cs.couplings.push_back({"x1", "label", sig * 0.6});
    cs.couplings.push_back({"x2", "label", sig * 0.4});
    cs.couplings.push_back({"sex", "x" + std::to_string(o.extra_features),
                            is_biased ? o.proxy_bias : 0.0});
    spec.clients.push_back(std::move(cs));
  }
  // Interleave biased and unbiased clients so ids carry no information.
  std::shuffle(spec.clients.begin(), spec.clients.end(), rng);
  for (std::size_t c = 0; c < spec.clients.size(); ++c) {
    char id[16];
    std::snprintf(id, sizeof id, "c%02zu", c);
    spec.clients[c].client_id = id;
  }
  return spec;
}

ClientDataset pooled_holdout(const SynthSpec& spec, std::size_t rows, std::uint64_t seed) {
  require(!spec.clients.empty(), Errc::invalid_argument, "holdout needs at least one client spec");
  require(rows >= spec.clients.size(), Errc::invalid_argument,
          "holdout needs at least one row per client");
  ClientDataset out{"holdout", spec.schema, {}};
  const std::size_t share = rows / spec.clients.size();
  for (std::size_t c = 0; c < spec.clients.size(); ++c) {
    SynthClientSpec cs = spec.clients[c];
    cs.rows = share + (c < rows % spec.clients.size() ? 1 : 0);
    auto part = synth_client(spec.schema, cs, derive_seed(seed, "holdout"));
    out.rows.insert(out.rows.end(), part.rows.begin(), part.rows.end());
  }
  return out;
}

// JSON -------------------------------------------------------------------------

namespace {

Variable variable_from_json(const json& j) {
  Variable v;
  v.name = j.at("name").get<std::string>();
  if (j.contains("labels")) {
    v.labels = j.at("labels").get<std::vector<std::string>>();
  } else {
    const auto card = j.at("cardinality").get<std::size_t>();
    for (std::size_t i = 0; i < card; ++i) v.labels.push_back(std::to_string(i));
  }
  return v;
}

json variable_to_json(const Variable& v) { return json{{"name", v.name}, {"labels", v.labels}}; }

}  // namespace

json schema_to_json(const FeatureSchema& schema) {
  json features = json::array();
  for (const auto& f : schema.features()) features.push_back(variable_to_json(f));
  return json{{"features", features},
              {"sensitive", schema.features()[schema.sensitive_index()].name},
              {"target", variable_to_json(schema.target())}};
}

SchemaPtr schema_from_json(const json& j) {
  try {
    std::vector<Variable> features;
    for (const auto& f : j.at("features")) features.push_back(variable_from_json(f));
    const auto& s = j.at("sensitive");
    std::size_t sensitive = features.size();
    if (s.is_number_unsigned()) {
      sensitive = s.get<std::size_t>();
    } else {
      const auto name = s.get<std::string>();
      for (std::size_t i = 0; i < features.size(); ++i)
        if (features[i].name == name) sensitive = i;
      require(sensitive < features.size(), Errc::schema_violation,
              "sensitive attribute '" + name + "' is not a feature");
    }
    return std::make_shared<const FeatureSchema>(std::move(features), sensitive,
                                                 variable_from_json(j.at("target")));
  } catch (const json::exception& e) {
    fail(Errc::config, std::string("schema: ") + e.what());
  }
}

json bundle_to_json(const TableBundle& bundle) {
  json tables = json::array();
  for (const auto& t : bundle.tables) {
    tables.push_back({{"pair", {t.pair().first, t.pair().second}},
                      {"shape", {t.rows(), t.cols()}},
                      {"cells", std::vector<double>(t.cells().begin(), t.cells().end())}});
  }
  return json{{"client_id", bundle.client_id},
              {"schema_hash", bundle.schema_hash},
              {"noise_scale", bundle.noise_scale},
              {"tables", tables}};
}

TableBundle bundle_from_json(const json& j) {
  try {
    TableBundle b;
    b.client_id = j.at("client_id").get<std::string>();
    b.schema_hash = j.at("schema_hash").get<std::string>();
    b.noise_scale = j.at("noise_scale").get<double>();
    require(b.noise_scale >= 0.0, Errc::parse_error, "negative noise_scale");
    for (const auto& t : j.at("tables")) {
      const auto pair = t.at("pair").get<std::array<std::size_t, 2>>();
      const auto shape = t.at("shape").get<std::array<std::size_t, 2>>();
      b.tables.emplace_back(VarPair{pair[0], pair[1]}, shape[0], shape[1],
                            t.at("cells").get<std::vector<double>>(), b.noise_scale == 0.0);
    }
    return b;
  } catch (const json::exception& e) {
    fail(Errc::parse_error, std::string("bundle: ") + e.what());
  }
}

json synth_client_to_json(const SynthClientSpec& spec) {
  json couplings = json::array();
  for (const auto& c : spec.couplings)
    couplings.push_back({{"from", c.from}, {"to", c.to}, {"strength", c.strength}});
  return json{{"id", spec.client_id},
              {"rows", spec.rows},
              {"marginals", spec.marginals},
              {"couplings", couplings}};
}

SynthClientSpec synth_client_from_json(const json& j) {
  SynthClientSpec s;
  s.client_id = j.at("id").get<std::string>();
  s.rows = j.at("rows").get<std::size_t>();
  if (j.contains("marginals"))
    s.marginals = j.at("marginals").get<std::map<std::string, std::vector<double>>>();
  if (j.contains("couplings"))
    for (const auto& c : j.at("couplings")) {
      const auto& st = c.at("strength");
      // "copy" is shorthand for a deterministic copy of the parent value.
      const double strength = st.is_string() && st.get<std::string>() == "copy"
                                  ? 1.0
                                  : st.get<double>();
      s.couplings.push_back({c.at("from").get<std::string>(), c.at("to").get<std::string>(),
                             strength});
    }
  return s;
}

double entropy_bits(std::span<const double> counts) {
  double n = 0.0;
  for (double c : counts) n += c;
  if (n <= 0.0) return 0.0;
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log2(c / n);
  return h;
}

}  // namespace fedselect
