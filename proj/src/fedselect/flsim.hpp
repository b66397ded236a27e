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

#ifndef FEDSELECT_FLSIM_HPP
#define FEDSELECT_FLSIM_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedselect/anneal.hpp"
#include "fedselect/mipfl.hpp"
#include "fedselect/privacy.hpp"

namespace fedselect {

/// Logistic regression over one-hot features. Layout: one block per feature
/// in schema order, then the bias as the last entry.
struct ModelState {
  std::vector<double> weights;
  std::size_t round = 0;
  bool operator==(const ModelState&) const = default;
};

struct TrainConfig {
  std::size_t rounds = 20;
  std::size_t local_epochs = 1;
  double learning_rate = 0.1;  // 0 is allowed and freezes the model
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::size_t model_dimension(const FeatureSchema& schema);
ModelState initial_model(const FeatureSchema& schema);
double predict_probability(const ModelState& model, const FeatureSchema& schema, const Row& row);
/// Mean logistic loss (nats) over the dataset.
double logistic_loss(const ModelState& model, const ClientDataset& data);

struct LocalUpdate {
  ModelState model;
  std::size_t samples = 0;
  bool empty = false;  // client had no rows; model returned unchanged
};

/// Mini-batch SGD from the broadcast model; the stream depends only on
/// (config.seed, model.round, client_id).
LocalUpdate local_train(const ModelState& model, const ClientDataset& client,
                        const TrainConfig& config);

/// Size-weighted average of the members' local updates; round advances by one.
ModelState fedavg_round(const ModelState& model, std::span<const ClientDataset* const> clients,
                        const TrainConfig& config);

struct GroupConfusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const GroupConfusion&) const = default;
};

/// Group g is the sensitive value with index g. Undefined rates are empty.
struct EvalReport {
  std::size_t size = 0;
  double accuracy = 0.0;
  std::optional<double> f1;
  std::optional<double> spd;  // Pr(Yhat=1|S=1) - Pr(Yhat=1|S=0)
  std::optional<double> eod;  // TPR(S=1) - TPR(S=0)
  std::optional<double> mad;  // accuracy(S=1) - accuracy(S=0)
  std::array<GroupConfusion, 2> groups{};

  nlohmann::json to_json() const;
};

EvalReport evaluate(const ModelState& model, const ClientDataset& holdout);
/// Metrics from labels, predictions and sensitive values (all 0/1).
EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                std::span<const int> sensitive);

/// Rank correlation with average ranks for ties; empty if either input is constant.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

struct DeConfig {
  std::size_t population = 20;
  double mutation = 0.7;   // F
  double crossover = 0.9;  // CR
  std::size_t generations = 200;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const DeConfig&) const = default;
};

struct DeResult {
  std::vector<double> best;
  double value = 0.0;
  std::size_t evaluations = 0;
};

/// rand/1/bin differential evolution minimizing `objective` over a box.
/// Trial coordinates outside the box are clamped.
DeResult differential_evolution(const std::function<double(std::span<const double>)>& objective,
                                std::span<const double> lower, std::span<const double> upper,
                                const DeConfig& config);

/// A trained federation: its exact-table PFL terms and held-out metrics.
struct FederationSample {
  PflTerms terms;
  EvalReport report;
};

/// mean rho(PFL, {|EOD|, |MAD|}) - mean rho(PFL, {accuracy, F1}). Empty when
/// the PFL values are constant under these weights.
std::optional<double> meta_objective(const PflWeights& weights,
                                     std::span<const FederationSample> samples);

struct WeightCalibration {
  PflWeights weights;
  double objective = 0.0;
  std::optional<double> reference_objective;  // at the default weights
  DeResult search;

  nlohmann::json to_json() const;
};

/// Maximizes meta_objective over [0, upper]^4.
WeightCalibration calibrate_weights(std::span<const FederationSample> samples,
                                    const DeConfig& config, double upper = 3.0);

struct TrainingRun {
  ModelState model;
  std::vector<EvalReport> curve;  // after each round

  /// round, accuracy, f1, spd, eod
  void write_curve_csv(std::ostream& out) const;
};

/// T rounds of FedAvg over the members, evaluating on the holdout after each.
TrainingRun train_federation(std::span<const ClientDataset* const> members,
                             const ClientDataset& holdout, const TrainConfig& config);

struct ProtocolConfig {
  double epsilon1 = 1.0;
  double epsilon2 = 1.0;
  double delta = 1e-5;
  std::optional<double> sigma_override;  // 0 releases exact tables
  std::size_t k = 5;
  ScheduleConfig schedule;
  std::size_t search_runs = 1;
  TrainConfig train;
  std::uint64_t seed = 0;
};

struct ProtocolReport {
  double sigma = 0.0;
  std::vector<std::string> client_ids;
  std::vector<std::string> selected;
  std::vector<double> budgets;  // per client, aligned with client_ids
  std::optional<MultiRunResult> search;  // absent when k equals the pool size
  double selected_pfl = 0.0;
  TrainingRun training;

  nlohmann::json to_json() const;
};

/// Phase 1 tables and noise, phase 2 search, phase 3 FedAvg over the winner.
/// Failures are rethrown with the phase named in the message.
ProtocolReport run_protocol(const std::vector<ClientDataset>& clients,
                            const ClientDataset& holdout, const PflWeights& weights,
                            const ProtocolConfig& config);

}  // namespace fedselect

#endif  // FEDSELECT_FLSIM_HPP
