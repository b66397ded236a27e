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

#include "fedselect/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fedselect/audit.hpp"
#include "fedselect/common.hpp"
#include "fedselect/noiselab.hpp"
#include "fedselect/privacy.hpp"

namespace fedselect {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Collects the outputs of one invocation and writes them on request.
class RunDir {
 public:
  RunDir(std::string command, const RunConfig& config, std::string dir)
      : command_(std::move(command)), config_(config), dir_(std::move(dir)) {}

  bool enabled() const { return !dir_.empty(); }

  void add(const std::string& rel, const std::string& content) {
    if (!enabled()) return;
    const fs::path path = fs::path(dir_) / rel;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot write '" + path.string() + "'");
    out << content;
    if (!out) fail(Errc::io_error, "failed writing '" + path.string() + "'");
    files_.push_back({{"path", rel},
                      {"bytes", content.size()},
                      {"fnv1a64", hex64(fnv1a64(content))}});
  }

  void add_json(const std::string& rel, const json& j) { add(rel, j.dump(2) + "\n"); }

  template <typename F>
  auto phase(const std::string& name, F&& body) -> decltype(body()) {
    const auto start = std::chrono::steady_clock::now();
    struct Stop {
      RunDir* self;
      std::string name;
      std::chrono::steady_clock::time_point start;
      ~Stop() {
        self->timings_[name] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
    } stop{this, name, start};
    try {
      return body();
    } catch (const Error& e) {
      fail(e.code(), "phase " + name + ": " + e.what());
    } catch (const json::exception& e) {
      fail(Errc::parse_error, "phase " + name + ": " + e.what());
    } catch (const std::exception& e) {
      fail(Errc::io_error, "phase " + name + ": " + e.what());
    }
  }

  /// Times `body` without relabeling its errors.
  template <typename F>
  auto timed(const std::string& name, F&& body) -> decltype(body()) {
    const auto start = std::chrono::steady_clock::now();
    auto result = body();
    timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

  json finish(json report, json extra_manifest = json::object()) {
    if (!enabled()) return report;
    add_json("config.json", config_to_json(config_));
    add_json("report.json", report);
    json manifest = {{"command", command_},
                     {"version", kVersion},
                     {"seed", config_.seed},
                     {"files", files_}};
    for (auto& [k, v] : extra_manifest.items()) manifest[k] = v;
    const std::string m = manifest.dump(2) + "\n";
    std::ofstream(fs::path(dir_) / "manifest.json", std::ios::binary) << m;
    std::ofstream(fs::path(dir_) / "timings.json", std::ios::binary)
        << json(timings_).dump(2) << "\n";
    return report;
  }

 private:
  std::string command_;
  const RunConfig& config_;
  std::string dir_;
  json files_ = json::array();
  std::map<std::string, double> timings_;
};

void prepare(const RunConfig& config) {
  validate_config(config);
  set_thread_count(config.threads);
}

/// Clients, holdout and (for generated data) the generating spec.
struct Workspace {
  SchemaPtr schema;
  std::optional<SynthSpec> spec;
  std::vector<ClientDataset> clients;

  ClientDataset holdout(const RunConfig& c) const {
    if (spec) return pooled_holdout(*spec, c.data.holdout_rows, derive_seed(c.seed, "holdout"));
    auto h = ingest_csv(c.data.holdout_path, "holdout", schema, c.data.binning);
    require(!h.rows.empty(), Errc::invalid_argument, "holdout file has no rows");
    return h;
  }
};

Workspace load_workspace(const RunConfig& c) {
  Workspace w;
  switch (c.data.source) {
    case DataSource::planted:
      w.spec = planted_bias_spec(c.data.planted, derive_seed(c.seed, "data"));
      break;
    case DataSource::synth:
      w.spec = SynthSpec{schema_from_json(*c.schema), c.data.synth};
      break;
    case DataSource::csv:
      w.schema = schema_from_json(*c.schema);
      for (const auto& cl : c.data.csv)
        w.clients.push_back(ingest_csv(cl.path, cl.id, w.schema, c.data.binning));
      return w;
  }
  w.schema = w.spec->schema;
  w.clients = synth_clients(*w.spec, derive_seed(c.seed, "rows"));
  return w;
}

NoiseCalibration selection_noise(const RunConfig& c, std::size_t query_count) {
  if (c.privacy.sigma_override) {
    NoiseCalibration calib;
    calib.query_count = query_count;
    calib.sigma = *c.privacy.sigma_override;
    return calib;
  }
  return calibrate_sigma(PrivacyBudget{c.privacy.epsilon1, c.privacy.delta, Phase::selection},
                         query_count);
}

std::vector<TableBundle> release_bundles(const RunConfig& c, const Workspace& w,
                                         const NoiseCalibration& calib) {
  std::vector<TableBundle> out(w.clients.size());
  const std::uint64_t seed = derive_seed(c.seed, "release");
  parallel_for(w.clients.size(), [&](std::size_t i) {
    TableBundle exact = compute_tables(w.clients[i]);
    out[i] = calib.sigma > 0.0 ? noise_bundle(exact, calib, seed) : std::move(exact);
  });
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string csv_of(const auto& writer) {
  std::ostringstream ss;
  writer(ss);
  return ss.str();
}

json federation_json(const BundlePool& pool, const Federation& f) { return pool.ids(f); }

ScheduleConfig search_schedule(const RunConfig& c) {
  ScheduleConfig s = c.search.schedule;
  s.seed = derive_seed(c.seed, "search");
  return s;
}

}  // namespace

// calibrate --------------------------------------------------------------------

json cmd_calibrate(const RunConfig& config, const std::string& out_dir) {
  prepare(config);
  RunDir run("calibrate", config, out_dir);
  json rows = json::array();
  std::string csv = "K,M,sigma,sigma_numeric,optimal_order,epsilon_check\n";
  run.phase("calibrate", [&] {
    const PrivacyBudget budget{config.privacy.epsilon1, config.privacy.delta, Phase::selection};
    for (std::size_t k : config.privacy.calibrate_k) {
      const std::size_t m = query_count(k);
      const auto calib = calibrate_sigma(budget, m);
      const double check = verify_epsilon(calib.sigma, m, budget.delta);
      rows.push_back({{"K", k},
                      {"M", m},
                      {"sigma", calib.sigma},
                      {"sigma_numeric", calib.sigma_numeric},
                      {"optimal_order", calib.optimal_order},
                      {"epsilon_check", check}});
      std::ostringstream line;
      line.precision(17);
      line << k << ',' << m << ',' << calib.sigma << ',' << calib.sigma_numeric << ','
           << calib.optimal_order << ',' << check << '\n';
      csv += line.str();
    }
  });
  run.add("calibration.csv", csv);
  return run.finish(json{{"epsilon", config.privacy.epsilon1},
                         {"delta", config.privacy.delta},
                         {"rows", std::move(rows)}});
}

// release ----------------------------------------------------------------------

json cmd_release(const RunConfig& config, const std::string& out_dir) {
  prepare(config);
  RunDir run("release", config, out_dir);
  const Workspace w = run.phase("ingest", [&] { return load_workspace(config); });
  NoiseCalibration calib;
  std::vector<TableBundle> bundles = run.phase("release", [&] {
    calib = selection_noise(config, w.schema->pair_count());
    return release_bundles(config, w, calib);
  });
  json files = json::array();
  json ids = json::array();
  run.phase("write", [&] {
    run.add_json("schema.json", schema_to_json(*w.schema));
    for (const auto& b : bundles) {
      const std::string rel = "bundles/" + b.client_id + ".json";
      run.add(rel, bundle_to_json(b).dump() + "\n");
      files.push_back(rel);
      ids.push_back(b.client_id);
    }
  });
  return run.finish(json{{"sigma", calib.sigma},
                         {"query_count", w.schema->pair_count()},
                         {"schema_hash", w.schema->hash()},
                         {"clients", ids},
                         {"bundles", files}},
                    json{{"bundles", files}});
}

// search -----------------------------------------------------------------------

BundlePool load_bundle_dir(const std::string& directory) {
  const fs::path dir = directory;
  const json manifest = json::parse(read_file(dir / "manifest.json"));
  require(manifest.contains("bundles"), Errc::parse_error,
          "'" + (dir / "manifest.json").string() + "' does not list bundles");
  SchemaPtr schema = schema_from_json(json::parse(read_file(dir / "schema.json")));
  std::vector<TableBundle> bundles;
  for (const auto& rel : manifest.at("bundles")) {
    const fs::path p = dir / rel.get<std::string>();
    require(fs::is_regular_file(p), Errc::io_error,
            "bundle file listed in the manifest is missing: " + p.string());
    bundles.push_back(bundle_from_json(json::parse(read_file(p))));
  }
  return BundlePool(schema, std::move(bundles));
}

namespace {

BundlePool load_pool(const RunConfig& config, RunDir& run) {
  if (config.search.bundles_dir.empty()) {
    const Workspace w = run.phase("ingest", [&] { return load_workspace(config); });
    return run.phase("release", [&] {
      const auto calib = selection_noise(config, w.schema->pair_count());
      return BundlePool(w.schema, release_bundles(config, w, calib));
    });
  }
  return run.phase("load", [&] { return load_bundle_dir(config.search.bundles_dir); });
}

}  // namespace

json cmd_search(const RunConfig& config, const std::string& out_dir) {
  prepare(config);
  RunDir run("search", config, out_dir);
  const BundlePool pool = load_pool(config, run);
  const auto result = run.phase("search", [&] {
    return search_runs(pool, config.weights, config.search.k, search_schedule(config),
                       config.search.runs);
  });
  json per_run = json::array();
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const auto& t = result.runs[r];
    per_run.push_back({{"best_pfl", t.best_pfl},
                       {"federation", federation_json(pool, t.best_federation)},
                       {"initial_pfl", t.initial_pfl},
                       {"evaluations", t.evaluations},
                       {"proposals", t.records.size()},
                       {"temperature_levels", t.temperature_levels}});
    run.add("trace_run" + std::to_string(r) + ".csv", csv_of([&](std::ostream& o) {
              t.write_csv(o);
            }));
  }
  const auto& best = result.runs[result.best_run];
  json exhaustive_json = nullptr;
  if (config.search.exhaustive_check) {
    const auto ex = run.phase("exhaustive", [&] {
      return exhaustive(pool, config.weights, config.search.k);
    });
    exhaustive_json = {{"federation", federation_json(pool, ex.federation)},
                       {"pfl", ex.pfl},
                       {"evaluations", ex.evaluations},
                       {"matches_search", ex.pfl == best.best_pfl}};
  }
  return run.finish(json{
      {"k", config.search.k},
      {"runs", config.search.runs},
      {"sigma", pool.noise_scale()},
      {"best_run", result.best_run},
      {"best", pfl_report(aggregate(pool, best.best_federation), config.weights, pool)},
      {"mean_pfl", result.mean_pfl},
      {"std_pfl", result.std_pfl},
      {"per_run", std::move(per_run)},
      {"exhaustive", std::move(exhaustive_json)}});
}

// train ------------------------------------------------------------------------

json cmd_train(const RunConfig& config, const std::string& out_dir) {
  prepare(config);
  RunDir run("train", config, out_dir);
  const Workspace w = run.phase("ingest", [&] { return load_workspace(config); });
  const ClientDataset holdout = run.phase("holdout", [&] { return w.holdout(config); });
  ProtocolConfig pc;
  pc.epsilon1 = config.privacy.epsilon1;
  pc.epsilon2 = config.privacy.epsilon2;
  pc.delta = config.privacy.delta;
  pc.sigma_override = config.privacy.sigma_override;
  pc.k = config.search.k;
  pc.schedule = config.search.schedule;
  pc.search_runs = config.search.runs;
  pc.train = config.train;
  pc.seed = config.seed;
  // run_protocol names its own phases.
  const ProtocolReport report = run.timed("protocol", [&] {
    return run_protocol(w.clients, holdout, config.weights, pc);
  });
  run.add("training_curve.csv", csv_of([&](std::ostream& o) { report.training.write_curve_csv(o); }));
  if (report.search) {
    const auto& best = report.search->runs[report.search->best_run];
    run.add("search_trace.csv", csv_of([&](std::ostream& o) { best.write_csv(o); }));
  }
  return run.finish(report.to_json());
}

// audit ------------------------------------------------------------------------

json cmd_audit(const RunConfig& config, const std::string& out_dir) {
  prepare(config);
  RunDir run("audit", config, out_dir);
  const ClientDataset data = run.phase("ingest", [&] {
    if (config.data.source == DataSource::csv) {
      const Workspace w = load_workspace(config);
      ClientDataset all{"audit", w.schema, {}};
      for (const auto& c : w.clients) all.rows.insert(all.rows.end(), c.rows.begin(), c.rows.end());
      return all;
    }
    Workspace w;
    if (config.data.source == DataSource::planted)
      w.spec = planted_bias_spec(config.data.planted, derive_seed(config.seed, "data"));
    else
      w.spec = SynthSpec{schema_from_json(*config.schema), config.data.synth};
    auto d = pooled_holdout(*w.spec, config.audit.records, derive_seed(config.seed, "audit"));
    d.client_id = "audit";
    return d;
  });
  const AuditReport report = run.phase("audit", [&] {
    AuditOptions opt;
    opt.epsilons = config.audit.epsilons;
    opt.delta = config.privacy.delta;
    opt.n_targets = config.audit.n_targets;
    opt.seed = derive_seed(config.seed, "audit-attack");
    if (!config.audit.single_pair.empty()) {
      const auto& s = *data.schema;
      const auto find = [&](const std::string& name) {
        if (name == s.target().name) return s.target_index();
        auto i = s.find(name);
        require(i.has_value(), Errc::invalid_argument, "unknown variable '" + name + "'");
        return *i;
      };
      const std::size_t a = find(config.audit.single_pair[0]);
      const std::size_t b = find(config.audit.single_pair[1]);
      require(a != b, Errc::invalid_argument, "single-table pair names one variable twice");
      opt.single_pair = VarPair::canonical(a, b);
    }
    return run_audit(data, opt);
  });
  run.add("roc.csv", csv_of([&](std::ostream& o) { report.write_roc_csv(o); }));
  return run.finish(report.to_json());
}

// validate ---------------------------------------------------------------------

json cmd_validate(const RunConfig& config, const std::string& out_dir) {
  prepare(config);
  RunDir run("validate", config, out_dir);
  const auto& v = config.validate;
  const SnrStudy study = run.phase("snr", [&] {
    const std::size_t rows = v.table.size(), cols = v.table.front().size();
    std::vector<double> cells;
    for (const auto& r : v.table) cells.insert(cells.end(), r.begin(), r.end());
    const ContingencyTable table(VarPair{0, 1}, rows, cols, std::move(cells), true);
    return snr_study(table, v.snr_levels, v.trials, derive_seed(config.seed, "snr"));
  });
  run.add("snr_study.csv", csv_of([&](std::ostream& o) { study.write_csv(o); }));
  json report = {{"snr", study.summary()}, {"stability", nullptr}};

  if (v.stability.enabled) {
    const auto& st = v.stability;
    report["stability"] = run.phase("stability", [&] {
      const Workspace w = load_workspace(config);
      NoiseExperiment ex{w.schema, {}, config.weights};
      for (const auto& c : w.clients) ex.exact.push_back(compute_tables(c));
      std::sort(ex.exact.begin(), ex.exact.end(),
                [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
      const double sigma = selection_noise(config, w.schema->pair_count()).sigma;
      const BundlePool exact = ex.exact_pool();
      bool all_ok = true;

      json dv = json::array();
      for (std::size_t i = 0; i < st.k_values.size(); ++i) {
        const auto r = decision_variance_check(ex, st.k_values[i], sigma, st.trials,
                                               derive_seed(config.seed, "decision-" + std::to_string(i)));
        dv.push_back(r.to_json(exact));
      }

      json mo = json::array();
      std::mt19937_64 rng(derive_seed(config.seed, "misorder-pairs"));
      const std::size_t k = std::min(st.k_values.back(), exact.size() - 1);
      for (std::size_t i = 0, attempts = 0; i < st.misorder_pairs && attempts < 100 * st.misorder_pairs;
           ++attempts) {
        const Federation a = random_federation(exact.size(), k, rng);
        const Federation b = neighbor(a, exact.size(), rng);
        const double pa = pfl(aggregate(exact, a), config.weights, exact.schema());
        const double pb = pfl(aggregate(exact, b), config.weights, exact.schema());
        if (pa == pb) continue;
        const auto r = misorder_check(ex, pa < pb ? a : b, pa < pb ? b : a, sigma, st.trials,
                                      derive_seed(config.seed, "misorder-" + std::to_string(i)));
        all_ok = all_ok && r.within_bound;
        mo.push_back(r.to_json(exact));
        ++i;
      }

      NoiseExperiment sub = ex;
      sub.exact.resize(std::min(st.global_pool, ex.exact.size()));
      const auto g = global_optimality_check(sub, st.global_k, sigma, st.trials, st.mus,
                                             st.margins, derive_seed(config.seed, "global"));
      for (const auto& l : g.levels) all_ok = all_ok && l.within_bound;
      return json{{"sigma", sigma},
                  {"decision_variance", std::move(dv)},
                  {"misorder", std::move(mo)},
                  {"global", g.to_json(sub.exact_pool())},
                  {"all_within_bounds", all_ok}};
    });
  }
  return run.finish(std::move(report));
}

// weights ----------------------------------------------------------------------

json cmd_weights(const RunConfig& config, const std::string& out_dir) {
  prepare(config);
  RunDir run("weights", config, out_dir);
  const Workspace w = run.phase("ingest", [&] { return load_workspace(config); });
  const ClientDataset holdout = run.phase("holdout", [&] { return w.holdout(config); });
  std::vector<FederationSample> samples(config.meta.federations);
  std::vector<Federation> feds;
  const BundlePool exact = run.phase("tables", [&] {
    std::vector<TableBundle> bundles;
    for (const auto& c : w.clients) bundles.push_back(compute_tables(c));
    return BundlePool(w.schema, std::move(bundles));
  });
  run.phase("train", [&] {
    require(config.search.k >= 1 && config.search.k <= exact.size(), Errc::invalid_argument,
            "search.k must lie in [1, pool size]");
    std::mt19937_64 rng(derive_seed(config.seed, "meta-federations"));
    for (std::size_t i = 0; i < config.meta.federations; ++i)
      feds.push_back(random_federation(exact.size(), config.search.k, rng));
    std::map<std::string, const ClientDataset*> by_id;
    for (const auto& c : w.clients) by_id[c.client_id] = &c;
    TrainConfig train = config.train;
    train.seed = derive_seed(config.seed, "train");
    for (std::size_t i = 0; i < feds.size(); ++i) {
      std::vector<const ClientDataset*> members;
      for (const auto& id : exact.ids(feds[i])) members.push_back(by_id.at(id));
      samples[i].terms = pfl_terms(aggregate(exact, feds[i]), exact.schema());
      samples[i].report = train_federation(members, holdout, train).curve.back();
    }
  });
  const WeightCalibration cal = run.phase("calibrate", [&] {
    DeConfig de = config.meta.de;
    de.seed = derive_seed(config.seed, "de");
    return calibrate_weights(samples, de, config.meta.upper);
  });
  json sample_json = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i)
    sample_json.push_back({{"federation", federation_json(exact, feds[i])},
                           {"terms",
                            {{"direct", samples[i].terms.direct},
                             {"indirect", samples[i].terms.indirect},
                             {"redundancy", samples[i].terms.redundancy},
                             {"signal", samples[i].terms.signal}}},
                           {"eval", samples[i].report.to_json()}});
  run.add_json("weights.json", weights_to_json(cal.weights));
  json report = cal.to_json();
  report["samples"] = std::move(sample_json);
  return run.finish(std::move(report));
}

}  // namespace fedselect
