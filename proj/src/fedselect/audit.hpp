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

#ifndef FEDSELECT_AUDIT_HPP
#define FEDSELECT_AUDIT_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedselect/tabular.hpp"

namespace fedselect {

/// What the attacker holds about one target record.
struct AttackInstance {
  Row target;
  TableBundle background;  // exact counts without the target
  TableBundle observed;    // the released (noisy) bundle
  double sigma = 0.0;      // 0 for an exact release
};

/// (1/sigma^2) * sum over the given pair slots of (obs - bg - 1/2) at the
/// cell addressed by the target. With sigma = 0 the unscaled sum is returned,
/// which orders records identically.
double lrt_statistic(const AttackInstance& instance, std::span<const std::size_t> slots);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), thresholds descending
  double auc = 0.0;

  /// Largest TPR reachable at FPR <= max_fpr.
  double tpr_at(double max_fpr) const;
};

/// Positives are predicted when score >= threshold; ties move together.
RocCurve roc_curve(std::span<const double> positives, std::span<const double> negatives);

struct AuditLevel {
  double epsilon = 0.0;  // infinity for an exact release
  double sigma = 0.0;
  RocCurve single;
  RocCurve joint;
};

struct AuditOptions {
  std::vector<double> epsilons{0.1, 0.5, 1.0, 2.0, 5.0, std::numeric_limits<double>::infinity()};
  double delta = 1e-5;
  std::size_t n_targets = 1000;
  std::uint64_t seed = 0;
  /// Pair attacked by the single-table variant; defaults to (S, T).
  std::optional<VarPair> single_pair;
};

struct AuditReport {
  std::vector<AuditLevel> levels;
  std::size_t trials = 0;
  std::size_t records = 0;
  std::uint64_t seed = 0;
  std::string single_pair;

  nlohmann::json to_json() const;
  /// epsilon, statistic, fpr, tpr
  void write_roc_csv(std::ostream& out) const;
};

/// Targets are drawn without replacement from `dataset`. Half are members
/// (the release is computed on the full dataset) and half non-members (the
/// release omits the target); the attacker's background is the dataset minus
/// the target in both cases. Noise is drawn afresh for every target and the
/// draws are shared across budgets.
AuditReport run_audit(const ClientDataset& dataset, const AuditOptions& options);

}  // namespace fedselect

#endif  // FEDSELECT_AUDIT_HPP
