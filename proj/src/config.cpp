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

#include "fedselect/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>

#include "fedselect/common.hpp"

namespace fedselect {

using nlohmann::json;

namespace {

// Reads typed members of one section and rejects keys it does not know.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(Errc::config, "'" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(Errc::config, "'" + name(key) + "' has the wrong type: " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(Errc::config, "unknown key '" + name(key.c_str()) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double epsilon_from_json(const json& j, const std::string& where) {
  if (j.is_string() && (j == "inf" || j == "infinity")) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) fail(Errc::config, "'" + where + "' entries must be numbers or \"inf\"");
  return j.get<double>();
}

json epsilon_to_json(double e) { return std::isinf(e) ? json("inf") : json(e); }

template <typename F>
auto as_config(const std::string& where, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    if (e.code() == Errc::config) throw;
    fail(Errc::config, "'" + where + "': " + e.what());
  } catch (const json::exception& e) {
    fail(Errc::config, "'" + where + "': " + e.what());
  }
}

void read_schedule(const json& j, ScheduleConfig& s, const std::string& path) {
  Section sec(j, path);
  sec.get("tau0", s.tau0);
  sec.get("eta", s.eta);
  sec.get("tau_min", s.tau_min);
  sec.get("max_iterations", s.max_iterations);
  sec.get("iters_per_temperature", s.iters_per_temperature);
  sec.finish();
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Section top(j, "");
  top.get("seed", c.seed);
  top.get("threads", c.threads);
  if (const json* s = top.child("schema"))
    c.schema = as_config("schema", [&] { return schema_to_json(*schema_from_json(*s)); });

  if (const json* d = top.child("data")) {
    Section sec(*d, "data");
    std::string source = "planted";
    sec.get("source", source);
    if (source == "planted")
      c.data.source = DataSource::planted;
    else if (source == "synth")
      c.data.source = DataSource::synth;
    else if (source == "csv")
      c.data.source = DataSource::csv;
    else
      fail(Errc::config, "'data.source' must be planted, synth or csv, got '" + source + "'");
    if (const json* p = sec.child("planted")) {
      Section ps(*p, "data.planted");
      auto& o = c.data.planted;
      ps.get("clients", o.clients);
      ps.get("rows_per_client", o.rows_per_client);
      ps.get("biased_fraction", o.biased_fraction);
      ps.get("direct_bias", o.direct_bias);
      ps.get("proxy_bias", o.proxy_bias);
      ps.get("signal", o.signal);
      ps.get("extra_features", o.extra_features);
      ps.finish();
    }
    if (const json* s = sec.child("synth")) {
      if (!s->is_array()) fail(Errc::config, "'data.synth' must be an array of client specs");
      for (const auto& cj : *s)
        c.data.synth.push_back(as_config("data.synth", [&] { return synth_client_from_json(cj); }));
    }
    if (const json* s = sec.child("csv")) {
      if (!s->is_array()) fail(Errc::config, "'data.csv' must be an array of {id, path}");
      for (const auto& cj : *s) {
        Section cs(cj, "data.csv[]");
        CsvClient client;
        cs.get("id", client.id);
        cs.get("path", client.path);
        cs.finish();
        c.data.csv.push_back(client);
      }
    }
    if (const json* b = sec.child("binning")) {
      if (!b->is_object()) fail(Errc::config, "'data.binning' must map column names to edges");
      for (const auto& [col, edges] : b->items())
        c.data.binning.edges[col] =
            as_config("data.binning." + col, [&] { return edges.get<std::vector<double>>(); });
    }
    sec.get("holdout_rows", c.data.holdout_rows);
    sec.get("holdout_path", c.data.holdout_path);
    sec.finish();
  }

  if (const json* p = top.child("privacy")) {
    Section sec(*p, "privacy");
    sec.get("epsilon1", c.privacy.epsilon1);
    sec.get("epsilon2", c.privacy.epsilon2);
    sec.get("delta", c.privacy.delta);
    double so = 0.0;
    if (sec.child("sigma_override")) {
      sec.get("sigma_override", so);
      c.privacy.sigma_override = so;
    }
    sec.get("calibrate_k", c.privacy.calibrate_k);
    sec.finish();
  }

  if (const json* w = top.child("weights"))
    c.weights = as_config("weights", [&] {
      Section sec(*w, "weights");
      for (const char* k : {"alpha", "beta", "gamma", "lambda"}) sec.child(k);
      sec.finish();
      return weights_from_json(*w);
    });

  if (const json* s = top.child("search")) {
    Section sec(*s, "search");
    sec.get("k", c.search.k);
    sec.get("runs", c.search.runs);
    if (const json* sch = sec.child("schedule")) read_schedule(*sch, c.search.schedule, "search.schedule");
    sec.get("bundles_dir", c.search.bundles_dir);
    sec.get("exhaustive_check", c.search.exhaustive_check);
    sec.finish();
  }

  if (const json* t = top.child("train")) {
    Section sec(*t, "train");
    sec.get("rounds", c.train.rounds);
    sec.get("local_epochs", c.train.local_epochs);
    sec.get("learning_rate", c.train.learning_rate);
    sec.get("batch_size", c.train.batch_size);
    sec.finish();
  }

  if (const json* a = top.child("audit")) {
    Section sec(*a, "audit");
    if (const json* eps = sec.child("epsilons")) {
      if (!eps->is_array()) fail(Errc::config, "'audit.epsilons' must be an array");
      c.audit.epsilons.clear();
      for (const auto& e : *eps) c.audit.epsilons.push_back(epsilon_from_json(e, "audit.epsilons"));
    }
    sec.get("n_targets", c.audit.n_targets);
    sec.get("records", c.audit.records);
    sec.get("single_pair", c.audit.single_pair);
    sec.finish();
  }

  if (const json* v = top.child("validate")) {
    Section sec(*v, "validate");
    sec.get("snr_levels", c.validate.snr_levels);
    sec.get("trials", c.validate.trials);
    sec.get("table", c.validate.table);
    if (const json* st = sec.child("stability")) {
      Section ss(*st, "validate.stability");
      auto& s = c.validate.stability;
      ss.get("enabled", s.enabled);
      ss.get("k_values", s.k_values);
      ss.get("trials", s.trials);
      ss.get("misorder_pairs", s.misorder_pairs);
      ss.get("global_k", s.global_k);
      ss.get("global_pool", s.global_pool);
      ss.get("mus", s.mus);
      ss.get("margins", s.margins);
      ss.finish();
    }
    sec.finish();
  }

  if (const json* m = top.child("meta")) {
    Section sec(*m, "meta");
    sec.get("federations", c.meta.federations);
    sec.get("upper", c.meta.upper);
    if (const json* de = sec.child("de")) {
      Section ds(*de, "meta.de");
      ds.get("population", c.meta.de.population);
      ds.get("mutation", c.meta.de.mutation);
      ds.get("crossover", c.meta.de.crossover);
      ds.get("generations", c.meta.de.generations);
      ds.finish();
    }
    sec.finish();
  }
  top.finish();
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  if (c.schema) j["schema"] = *c.schema;

  json data;
  data["source"] = c.data.source == DataSource::planted ? "planted"
                   : c.data.source == DataSource::synth ? "synth"
                                                        : "csv";
  const auto& o = c.data.planted;
  data["planted"] = {{"clients", o.clients},
                     {"rows_per_client", o.rows_per_client},
                     {"biased_fraction", o.biased_fraction},
                     {"direct_bias", o.direct_bias},
                     {"proxy_bias", o.proxy_bias},
                     {"signal", o.signal},
                     {"extra_features", o.extra_features}};
  data["synth"] = json::array();
  for (const auto& s : c.data.synth) data["synth"].push_back(synth_client_to_json(s));
  data["csv"] = json::array();
  for (const auto& s : c.data.csv) data["csv"].push_back({{"id", s.id}, {"path", s.path}});
  data["binning"] = json::object();
  for (const auto& [col, edges] : c.data.binning.edges) data["binning"][col] = edges;
  data["holdout_rows"] = c.data.holdout_rows;
  data["holdout_path"] = c.data.holdout_path;
  j["data"] = std::move(data);

  j["privacy"] = {{"epsilon1", c.privacy.epsilon1},
                  {"epsilon2", c.privacy.epsilon2},
                  {"delta", c.privacy.delta},
                  {"sigma_override", c.privacy.sigma_override ? json(*c.privacy.sigma_override)
                                                              : json(nullptr)},
                  {"calibrate_k", c.privacy.calibrate_k}};
  j["weights"] = weights_to_json(c.weights);
  j["search"] = {{"k", c.search.k},
                 {"runs", c.search.runs},
                 {"schedule", schedule_to_json(c.search.schedule)},
                 {"bundles_dir", c.search.bundles_dir},
                 {"exhaustive_check", c.search.exhaustive_check}};
  j["train"] = {{"rounds", c.train.rounds},
                {"local_epochs", c.train.local_epochs},
                {"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size}};
  json eps = json::array();
  for (double e : c.audit.epsilons) eps.push_back(epsilon_to_json(e));
  j["audit"] = {{"epsilons", std::move(eps)},
                {"n_targets", c.audit.n_targets},
                {"records", c.audit.records},
                {"single_pair", c.audit.single_pair}};
  const auto& s = c.validate.stability;
  j["validate"] = {{"snr_levels", c.validate.snr_levels},
                   {"trials", c.validate.trials},
                   {"table", c.validate.table},
                   {"stability",
                    {{"enabled", s.enabled},
                     {"k_values", s.k_values},
                     {"trials", s.trials},
                     {"misorder_pairs", s.misorder_pairs},
                     {"global_k", s.global_k},
                     {"global_pool", s.global_pool},
                     {"mus", s.mus},
                     {"margins", s.margins}}}};
  j["meta"] = {{"federations", c.meta.federations},
               {"upper", c.meta.upper},
               {"de",
                {{"population", c.meta.de.population},
                 {"mutation", c.meta.de.mutation},
                 {"crossover", c.meta.de.crossover},
                 {"generations", c.meta.de.generations}}}};
  return j;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::config, "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(Errc::config, "config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& j, const std::string& key_path, const std::string& value) {
  require(!key_path.empty(), Errc::config, "override key is empty");
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key_path.find('.', start);
    const std::string key = key_path.substr(start, dot - start);
    require(!key.empty(), Errc::config, "override key '" + key_path + "' has an empty segment");
    if (!node->is_object()) {
      require(node->is_null(), Errc::config,
              "override '" + key_path + "' descends into a non-object value");
      *node = json::object();
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json parsed = json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? json(value) : std::move(parsed);
}

void validate_config(const RunConfig& c) {
  const auto check = [](bool ok, const std::string& what) {
    if (!ok) fail(Errc::config, what);
  };
  check(c.threads <= 1024, "'threads' must be at most 1024");

  // Data source and referenced files.
  switch (c.data.source) {
    case DataSource::planted:
      as_config("data.planted", [&] { return planted_bias_spec(c.data.planted, c.seed); });
      break;
    case DataSource::synth:
      check(c.schema.has_value(), "'schema' is required for synth data");
      check(!c.data.synth.empty(), "'data.synth' lists no clients");
      break;
    case DataSource::csv:
      check(c.schema.has_value(), "'schema' is required for csv data");
      check(!c.data.csv.empty(), "'data.csv' lists no clients");
      for (const auto& cl : c.data.csv) {
        check(!cl.id.empty(), "'data.csv' entry without an id");
        check(std::filesystem::is_regular_file(cl.path),
              "'data.csv' file for client '" + cl.id + "' does not exist: " + cl.path);
      }
      check(!c.data.holdout_path.empty(), "'data.holdout_path' is required for csv data");
      check(std::filesystem::is_regular_file(c.data.holdout_path),
            "'data.holdout_path' does not exist: " + c.data.holdout_path);
      break;
  }
  check(c.data.holdout_rows >= 1, "'data.holdout_rows' must be positive");
  if (!c.search.bundles_dir.empty())
    check(std::filesystem::is_directory(c.search.bundles_dir),
          "'search.bundles_dir' is not a directory: " + c.search.bundles_dir);

  // Privacy.
  for (double e : {c.privacy.epsilon1})
    check(e > 0.0 && std::isfinite(e), "'privacy.epsilon1' must be a positive finite number");
  check(c.privacy.epsilon2 >= 0.0 && std::isfinite(c.privacy.epsilon2),
        "'privacy.epsilon2' must be finite and non-negative");
  check(c.privacy.delta > 0.0 && c.privacy.delta < 1.0, "'privacy.delta' must lie in (0,1)");
  if (c.privacy.sigma_override)
    check(*c.privacy.sigma_override >= 0.0 && std::isfinite(*c.privacy.sigma_override),
          "'privacy.sigma_override' must be finite and non-negative");
  check(!c.privacy.calibrate_k.empty(), "'privacy.calibrate_k' is empty");
  for (auto k : c.privacy.calibrate_k) check(k >= 1, "'privacy.calibrate_k' entries must be >= 1");

  as_config("weights", [&] {
    c.weights.validate();
    return 0;
  });
  check(c.search.k >= 1, "'search.k' must be at least 1");
  check(c.search.runs >= 1, "'search.runs' must be at least 1");
  as_config("search.schedule", [&] {
    c.search.schedule.validate();
    return 0;
  });
  as_config("train", [&] {
    c.train.validate();
    return 0;
  });

  check(!c.audit.epsilons.empty(), "'audit.epsilons' is empty");
  for (double e : c.audit.epsilons) check(e > 0.0, "'audit.epsilons' entries must be positive");
  check(c.audit.n_targets >= 50, "'audit.n_targets' must be at least 50");
  check(c.audit.records >= c.audit.n_targets, "'audit.records' must be >= 'audit.n_targets'");
  check(c.audit.single_pair.empty() || c.audit.single_pair.size() == 2,
        "'audit.single_pair' must name exactly two variables");

  check(!c.validate.snr_levels.empty(), "'validate.snr_levels' is empty");
  for (double s : c.validate.snr_levels) check(s > 0.0, "'validate.snr_levels' must be positive");
  check(c.validate.trials >= 100, "'validate.trials' must be at least 100");
  check(!c.validate.table.empty() && !c.validate.table.front().empty(),
        "'validate.table' must be a non-empty grid");
  for (const auto& row : c.validate.table) {
    check(row.size() == c.validate.table.front().size(), "'validate.table' rows differ in length");
    for (double v : row) check(v > 0.0, "'validate.table' cells must be positive");
  }
  const auto& st = c.validate.stability;
  check(st.trials >= 2, "'validate.stability.trials' must be at least 2");
  for (auto k : st.k_values) check(k >= 1, "'validate.stability.k_values' entries must be >= 1");

  check(c.meta.federations >= 10, "'meta.federations' must be at least 10");
  check(c.meta.upper > 0.0, "'meta.upper' must be positive");
  as_config("meta.de", [&] {
    c.meta.de.validate();
    return 0;
  });
}

}  // namespace fedselect
