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

#include "fedselect/audit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "fedselect/common.hpp"
#include "fedselect/privacy.hpp"

namespace fedselect {

using nlohmann::json;

double lrt_statistic(const AttackInstance& inst, std::span<const std::size_t> slots) {
  require(inst.sigma >= 0.0 && std::isfinite(inst.sigma), Errc::invalid_argument,
          "noise scale must be finite and non-negative");
  double sum = 0.0;
  for (std::size_t slot : slots) {
    require(slot < inst.observed.tables.size() && slot < inst.background.tables.size(),
            Errc::mismatch, "pair slot " + std::to_string(slot) + " is missing from the bundle");
    const auto& obs = inst.observed.tables[slot];
    const auto& bg = inst.background.tables[slot];
    const VarPair p = obs.pair();
    require(bg.pair() == p && bg.rows() == obs.rows() && bg.cols() == obs.cols(),
            Errc::mismatch, "background and release disagree on a table shape");
    require(p.first < inst.target.size() && p.second < inst.target.size(),
            Errc::invalid_argument, "target record is shorter than the schema");
    const std::size_t x = inst.target[p.first], y = inst.target[p.second];
    require(x < obs.rows() && y < obs.cols(), Errc::invalid_argument,
            "target value outside the table domain");
    sum += obs.at(x, y) - bg.at(x, y) - 0.5;
  }
  return inst.sigma > 0.0 ? sum / (inst.sigma * inst.sigma) : sum;
}

RocCurve roc_curve(std::span<const double> positives, std::span<const double> negatives) {
  require(!positives.empty() && !negatives.empty(), Errc::invalid_argument,
          "ROC needs both positive and negative scores");
  std::vector<std::pair<double, bool>> all;
  all.reserve(positives.size() + negatives.size());
  for (double s : positives) all.emplace_back(s, true);
  for (double s : negatives) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const double P = static_cast<double>(positives.size());
  const double N = static_cast<double>(negatives.size());
  RocCurve roc;
  roc.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double score = all[i].first;
    for (; i < all.size() && all[i].first == score; ++i) (all[i].second ? tp : fp) += 1;
    const RocPoint prev = roc.points.back();
    const RocPoint cur{static_cast<double>(fp) / N, static_cast<double>(tp) / P};
    roc.auc += (cur.fpr - prev.fpr) * (cur.tpr + prev.tpr) / 2.0;
    roc.points.push_back(cur);
  }
  return roc;
}

double RocCurve::tpr_at(double max_fpr) const {
  double best = 0.0;
  for (const auto& p : points)
    if (p.fpr <= max_fpr) best = std::max(best, p.tpr);
  return best;
}

namespace {

/// Subtracts (sign = -1) or adds (+1) one record to every table of a bundle.
void adjust(TableBundle& bundle, const Row& row, double sign) {
  for (auto& t : bundle.tables) t.at(row[t.pair().first], row[t.pair().second]) += sign;
}

std::string epsilon_label(double eps) {
  if (std::isinf(eps)) return "inf";
  json j = eps;
  return j.dump();
}

}  // namespace

AuditReport run_audit(const ClientDataset& dataset, const AuditOptions& options) {
  dataset.validate();
  require(options.n_targets >= 50, Errc::invalid_argument,
          "audit needs at least 50 target records, got " + std::to_string(options.n_targets));
  require(options.n_targets <= dataset.size(), Errc::invalid_argument,
          "audit asks for " + std::to_string(options.n_targets) + " targets but the dataset has " +
              std::to_string(dataset.size()) + " records");
  require(!options.epsilons.empty(), Errc::invalid_argument, "no privacy budgets to audit");
  const auto& schema = *dataset.schema;
  const VarPair single =
      options.single_pair.value_or(VarPair{schema.sensitive_index(), schema.target_index()});
  const std::size_t single_slot = schema.pair_slot(single);
  std::vector<std::size_t> all_slots(schema.pair_count());
  std::iota(all_slots.begin(), all_slots.end(), std::size_t{0});
  const std::size_t single_only[] = {single_slot};

  const TableBundle full = compute_tables(dataset);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 pick(derive_seed(options.seed, "targets"));
  for (std::size_t i = 0; i < options.n_targets; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, order.size() - 1);
    std::swap(order[i], order[d(pick)]);
  }

  AuditReport report;
  report.trials = options.n_targets;
  report.records = dataset.size();
  report.seed = options.seed;
  report.single_pair = schema.pair_name(single);

  for (std::size_t li = 0; li < options.epsilons.size(); ++li) {
    const double eps = options.epsilons[li];
    require(eps > 0.0, Errc::invalid_argument, "audit budgets must be positive");
    AuditLevel level;
    level.epsilon = eps;
    NoiseCalibration calib;
    calib.query_count = schema.pair_count();
    if (!std::isinf(eps)) {
      calib = calibrate_sigma(PrivacyBudget{eps, options.delta, Phase::selection},
                              schema.pair_count());
      level.sigma = calib.sigma;
    }
    std::vector<double> single_scores(options.n_targets), joint_scores(options.n_targets);
    // The same standard normal draws serve every budget (scaled by sigma), so
    // levels differ only in the noise scale.
    const std::uint64_t noise_seed = derive_seed(options.seed, "noise");
    parallel_for(options.n_targets, [&](std::size_t t) {
      const Row& row = dataset.rows[order[t]];
      AttackInstance inst;
      inst.target = row;
      inst.sigma = level.sigma;
      inst.background = full;
      adjust(inst.background, row, -1.0);
      TableBundle release = t % 2 == 0 ? full : inst.background;
      inst.observed = level.sigma > 0.0
                          ? noise_bundle(release, calib, derive_seed(noise_seed, t))
                          : std::move(release);
      single_scores[t] = lrt_statistic(inst, single_only);
      joint_scores[t] = lrt_statistic(inst, all_slots);
    });
    std::vector<double> sp, sn, jp, jn;
    for (std::size_t t = 0; t < options.n_targets; ++t) {
      (t % 2 == 0 ? sp : sn).push_back(single_scores[t]);
      (t % 2 == 0 ? jp : jn).push_back(joint_scores[t]);
    }
    level.single = roc_curve(sp, sn);
    level.joint = roc_curve(jp, jn);
    report.levels.push_back(std::move(level));
  }
  return report;
}

json AuditReport::to_json() const {
  json levels_json = json::array();
  for (const auto& l : levels)
    levels_json.push_back({{"epsilon", std::isinf(l.epsilon) ? json("inf") : json(l.epsilon)},
                           {"sigma", l.sigma},
                           {"auc_single", l.single.auc},
                           {"auc_joint", l.joint.auc},
                           {"tpr_at_1pct_single", l.single.tpr_at(0.01)},
                           {"tpr_at_1pct_joint", l.joint.tpr_at(0.01)},
                           {"tpr_at_5pct_single", l.single.tpr_at(0.05)},
                           {"tpr_at_5pct_joint", l.joint.tpr_at(0.05)}});
  return json{{"trials", trials},
              {"records", records},
              {"seed", seed},
              {"single_pair", single_pair},
              {"levels", std::move(levels_json)}};
}

void AuditReport::write_roc_csv(std::ostream& out) const {
  out << "epsilon,statistic,fpr,tpr\n";
  out.precision(17);
  for (const auto& l : levels) {
    const std::string eps = epsilon_label(l.epsilon);
    for (const auto& p : l.single.points) out << eps << ",single," << p.fpr << ',' << p.tpr << '\n';
    for (const auto& p : l.joint.points) out << eps << ",joint," << p.fpr << ',' << p.tpr << '\n';
  }
}

}  // namespace fedselect
