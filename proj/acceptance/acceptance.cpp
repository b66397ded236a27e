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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fedselect/anneal.hpp"
#include "fedselect/audit.hpp"
#include "fedselect/commands.hpp"
#include "fedselect/flsim.hpp"
#include "fedselect/noiselab.hpp"
#include "fedselect/privacy.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace fedselect;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSeed = 20260417;

struct Outcome {
  bool pass = false;
  std::string detail;
  json payload;  // everything that must be reproducible
};

double fixed_sigma(std::size_t pair_count) {
  return calibrate_sigma(PrivacyBudget{1.0, 1e-5, Phase::selection}, pair_count).sigma;
}

Outcome calibration_table() {
  const RunConfig config = config_from_json(json::object());
  const json report = cmd_calibrate(config, "");
  const std::vector<std::size_t> ks{5, 10, 20, 30, 50};
  const std::vector<double> reference{18.2, 36.5, 71.8, 107.4, 179.2};
  Outcome o{true, "", report};
  double worst = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const auto& row = report["rows"][i];
    const double dev = std::abs(row["sigma"].get<double>() - reference[i]) / reference[i];
    worst = std::max(worst, dev);
    o.pass = o.pass && row["K"].get<std::size_t>() == ks[i] && dev <= 0.05;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max relative deviation from reference sigmas %.2f%%", 100 * worst);
  o.detail = buf;
  return o;
}

Outcome rdp_round_trip() {
  Outcome o{true, "", json::array()};
  std::size_t points = 0, bad = 0;
  for (double eps : {0.1, 0.5, 1.0, 2.0, 5.0})
    for (double delta : {1e-5, 1e-6})
      for (std::size_t m : {1, 15, 55, 210, 465, 1275}) {
        const auto c = calibrate_sigma(PrivacyBudget{eps, delta, Phase::selection}, m);
        const double at = verify_epsilon(c.sigma, m, delta);
        const double below = verify_epsilon(0.98 * c.sigma, m, delta);
        const bool ok = at <= eps && below > eps;
        bad += !ok;
        ++points;
        o.payload.push_back({eps, delta, m, c.sigma, at, below});
      }
  o.pass = bad == 0;
  o.detail = std::to_string(points - bad) + "/" + std::to_string(points) + " grid points tight";
  return o;
}

Outcome mi_oracle() {
  PlantedBiasOptions opt;
  opt.clients = 12;
  opt.rows_per_client = 400;
  const auto spec = planted_bias_spec(opt, derive_seed(kSeed, "oracle-spec"));
  const auto clients = synth_clients(spec, derive_seed(kSeed, "oracle-rows"));
  const auto pool = fstest::exact_pool(clients);
  std::mt19937_64 rng(derive_seed(kSeed, "oracle-federations"));
  std::uniform_real_distribution<double> weight(0.0, 3.0);
  Outcome o{true, "", json::array()};
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng() % clients.size();
    const auto fed = random_federation(clients.size(), k, rng);
    const PflWeights w{weight(rng), weight(rng), weight(rng), weight(rng)};
    std::vector<const ClientDataset*> parts;
    for (std::size_t i : fed.members) parts.push_back(&clients[i]);
    const double got = pfl(aggregate(pool, fed), w, pool.schema());
    const double want = fstest::oracle_pfl(parts, pool.schema(), w);
    worst = std::max(worst, std::abs(got - want));
    o.payload.push_back(got);
  }
  o.pass = worst <= 1e-9;
  char buf[96];
  std::snprintf(buf, sizeof buf, "50 federations, max |pfl - oracle| = %.2e", worst);
  o.detail = buf;
  return o;
}

Outcome search_optimality() {
  Outcome o{true, "", json::array()};
  std::size_t hits = 0, pairs = 0, best_hits = 0;
  for (std::uint64_t instance = 0; instance < 10; ++instance) {
    PlantedBiasOptions opt;
    opt.clients = 6;
    opt.rows_per_client = 600;
    const auto spec = planted_bias_spec(opt, derive_seed(kSeed, instance));
    const auto pool = fstest::exact_pool(synth_clients(spec, derive_seed(kSeed + 1, instance)));
    const PflWeights w;
    const auto truth = exhaustive(pool, w, 3);
    ScheduleConfig schedule;
    schedule.seed = derive_seed(kSeed + 2, instance);
    const auto runs = search_runs(pool, w, 3, schedule, 5);
    json row = {{"exhaustive", truth.pfl}, {"runs", json::array()}};
    for (const auto& r : runs.runs) {
      hits += r.best_pfl == truth.pfl;
      ++pairs;
      row["runs"].push_back(r.best_pfl);
    }
    best_hits += runs.runs[runs.best_run].best_pfl == truth.pfl;
    o.payload.push_back(row);
  }
  o.pass = hits >= 0.95 * static_cast<double>(pairs) && best_hits == 10;
  o.detail = std::to_string(hits) + "/" + std::to_string(pairs) + " runs optimal, best-of-5 " +
             std::to_string(best_hits) + "/10";
  return o;
}

Outcome noise_propagation() {
  const RunConfig config = config_from_json(json::object());
  const auto& v = config.validate;
  std::vector<double> cells;
  for (const auto& r : v.table) cells.insert(cells.end(), r.begin(), r.end());
  const ContingencyTable table(VarPair{0, 1}, v.table.size(), v.table.front().size(), cells, true);
  const std::vector<double> levels{2, 10, 50, 100};
  const auto study = snr_study(table, levels, 1000, derive_seed(kSeed, "snr"));
  Outcome o{true, "", study.summary()};
  const auto& low = study.levels[0];
  std::string detail;
  for (std::size_t i = 2; i < 4; ++i) {
    const auto& l = study.levels[i];
    const bool ok = l.unbiased && l.std_ratio && std::abs(*l.std_ratio - 1.0) <= 0.15;
    o.pass = o.pass && ok && std::abs(low.bias) > std::abs(l.bias) && low.std > l.std;
    char buf[96];
    std::snprintf(buf, sizeof buf, "SNR %g std/pred %.3f; ", l.snr, l.std_ratio.value_or(NAN));
    detail += buf;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "SNR 2 bias %.4f std %.4f", low.bias, low.std);
  o.detail = detail + buf;
  return o;
}

Outcome variance_reduction() {
  const auto ex = fstest::homogeneous_experiment(12, 5000, derive_seed(kSeed, "homogeneous"));
  const double sigma = fixed_sigma(ex.schema->pair_count());
  Outcome o{true, "", json::array()};
  for (std::size_t k : {1, 5, 10}) {
    const auto r = decision_variance_check(ex, k, sigma, 10000, derive_seed(kSeed, k));
    const double ratio = r.variance_ratio.value_or(NAN);
    o.pass = o.pass && ratio >= 0.7 && ratio <= 1.3;
    o.payload.push_back(r.to_json(ex.exact_pool()));
    char buf[48];
    std::snprintf(buf, sizeof buf, "k=%zu ratio %.3f; ", k, ratio);
    o.detail += buf;
  }
  o.detail += "sigma " + std::to_string(sigma);
  return o;
}

Outcome stability_bounds() {
  const auto ex = fstest::planted_experiment(8, 5000, derive_seed(kSeed, "stability"));
  const auto pool = ex.exact_pool();
  const double sigma = fixed_sigma(ex.schema->pair_count());
  Outcome o{true, "", json::object()};
  std::mt19937_64 rng(derive_seed(kSeed, "misorder-pairs"));
  std::size_t checked = 0;
  json misorder = json::array();
  while (checked < 4) {
    const auto a = random_federation(pool.size(), 3, rng);
    const auto b = neighbor(a, pool.size(), rng);
    const double pa = pfl(aggregate(pool, a), ex.weights, pool.schema());
    const double pb = pfl(aggregate(pool, b), ex.weights, pool.schema());
    if (pa == pb) continue;
    const auto r = misorder_check(ex, pa < pb ? a : b, pa < pb ? b : a, sigma, 10000,
                                  derive_seed(kSeed, 100 + checked));
    o.pass = o.pass && r.within_bound;
    misorder.push_back(r.to_json(pool));
    ++checked;
  }
  const double mus[] = {0.0, 1e-3, 1e-2};
  const double margins[] = {0.0, 1.0, 6.0};
  const auto g = global_optimality_check(ex, 3, sigma, 10000, mus, margins,
                                         derive_seed(kSeed, "global"));
  for (const auto& l : g.levels) o.pass = o.pass && l.within_bound;
  const auto& six = g.levels.back();
  o.pass = o.pass && six.failures == 0;
  o.payload = {{"misorder", misorder}, {"global", g.to_json(pool)}};
  o.detail = std::to_string(checked) + " misorder pairs and " + std::to_string(g.levels.size()) +
             " global levels checked; 6-sd margin failures " + std::to_string(six.failures) +
             "/" + std::to_string(g.trials);
  return o;
}

Outcome audit_curve() {
  RunConfig config = config_from_json(json::object());
  config.seed = kSeed;
  const json report = cmd_audit(config, "");
  Outcome o{true, "", report};
  std::vector<double> auc;
  for (const auto& l : report["levels"]) auc.push_back(l["auc_joint"].get<double>());
  o.pass = report["records"] == 25000 && report["trials"] == 1000 && auc.size() == 6 &&
           std::abs(auc[0] - 0.5) <= 0.05 && auc[2] <= 0.62 && auc[5] == 1.0;
  for (std::size_t i = 1; i < auc.size(); ++i) o.pass = o.pass && auc[i] >= auc[i - 1];
  for (double a : auc) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.3f ", a);
    o.detail += buf;
  }
  o.detail = "joint AUC by epsilon: " + o.detail;
  return o;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome selection_effect() {
  Outcome o{false, "", json::array()};
  int wins = 0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const std::uint64_t seed = derive_seed(kSeed, s);
    const auto spec = planted_bias_spec(PlantedBiasOptions{}, derive_seed(seed, "data"));
    const auto clients = synth_clients(spec, derive_seed(seed, "rows"));
    const auto holdout = pooled_holdout(spec, 5000, derive_seed(seed, "holdout"));
    ProtocolConfig pc;
    pc.k = 5;
    pc.seed = seed;
    const auto report = run_protocol(clients, holdout, PflWeights{}, pc);
    const auto& chosen = report.training.curve.back();

    std::vector<double> spd, eod, acc;
    std::mt19937_64 rng(derive_seed(seed, "random-federations"));
    TrainConfig train;
    train.seed = derive_seed(seed, "train");
    for (int r = 0; r < 20; ++r) {
      const auto fed = random_federation(clients.size(), 5, rng);
      std::vector<const ClientDataset*> members;
      for (std::size_t i : fed.members) members.push_back(&clients[i]);
      const auto e = train_federation(members, holdout, train).curve.back();
      spd.push_back(std::abs(e.spd.value_or(NAN)));
      eod.push_back(std::abs(e.eod.value_or(NAN)));
      acc.push_back(e.accuracy);
    }
    const double c_spd = std::abs(chosen.spd.value_or(NAN));
    const double c_eod = std::abs(chosen.eod.value_or(NAN));
    const bool win = c_spd < median(spd) && c_eod < median(eod) &&
                     chosen.accuracy >= median(acc) - 0.02;
    wins += win;
    o.payload.push_back({{"selected", report.selected},
                         {"spd", c_spd},
                         {"eod", c_eod},
                         {"accuracy", chosen.accuracy},
                         {"median_spd", median(spd)},
                         {"median_eod", median(eod)},
                         {"median_accuracy", median(acc)},
                         {"win", win}});
  }
  o.pass = wins >= 4;
  o.detail = std::to_string(wins) + "/5 seeds beat the random-federation medians";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "calibration table", 1, calibration_table},
      {2, "RDP round-trip", 5, rdp_round_trip},
      {3, "MI oracle equivalence", 30, mi_oracle},
      {4, "search optimality", 120, search_optimality},
      {5, "noise-propagation study", 60, noise_propagation},
      {6, "variance reduction", 120, variance_reduction},
      {7, "stability bounds", 600, stability_bounds},
      {8, "audit curve", 300, audit_curve},
      {9, "selection effect", 600, selection_effect},
  };
  bool all = true;
  std::vector<std::string> first_payloads;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what(), nullptr};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    all = all && pass;
    first_payloads.push_back(o.payload.dump());
    std::printf("criterion %2d %-26s %s  %s [%.2f s, limit %g s]\n", c.id, c.name,
                pass ? "PASS" : "FAIL", o.detail.c_str(), secs, c.limit_seconds);
    std::fflush(stdout);
  }

  // Rerun every criterion with the same seeds and compare serialized payloads.
  std::size_t identical = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string again;
    try {
      again = criteria[i].run().payload.dump();
    } catch (const std::exception&) {
      again = "error";
    }
    identical += again == first_payloads[i];
  }
  const bool det = identical == criteria.size();
  all = all && det;
  std::printf("criterion 10 %-26s %s  %zu/%zu report payloads byte-identical on rerun\n",
              "determinism", det ? "PASS" : "FAIL", identical, criteria.size());
  return all ? 0 : 1;
}
