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

#include "fedselect/flsim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include "fedselect/common.hpp"

namespace fedselect {

using nlohmann::json;

void TrainConfig::validate() const {
  require(rounds > 0 && local_epochs > 0 && batch_size > 0, Errc::invalid_argument,
          "rounds, local_epochs and batch_size must be positive");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), Errc::invalid_argument,
          "learning_rate must be finite and non-negative");
}

// Model ------------------------------------------------------------------------

namespace {

std::vector<std::size_t> feature_offsets(const FeatureSchema& schema) {
  std::vector<std::size_t> off(schema.feature_count());
  std::size_t at = 0;
  for (std::size_t f = 0; f < schema.feature_count(); ++f) {
    off[f] = at;
    at += schema.cardinality(f);
  }
  return off;
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double logit(const std::vector<double>& w, const std::vector<std::size_t>& off, const Row& row) {
  double z = w.back();
  for (std::size_t f = 0; f < off.size(); ++f) z += w[off[f] + row[f]];
  return z;
}

void require_binary(const FeatureSchema& schema) {
  require(schema.cardinality(schema.sensitive_index()) == 2, Errc::invalid_argument,
          "fairness metrics need a binary sensitive attribute, '" +
              schema.variable(schema.sensitive_index()).name + "' has " +
              std::to_string(schema.cardinality(schema.sensitive_index())) + " values");
  require(schema.target().cardinality() == 2, Errc::invalid_argument,
          "training needs a binary target");
}

}  // namespace

std::size_t model_dimension(const FeatureSchema& schema) {
  std::size_t d = 1;
  for (std::size_t f = 0; f < schema.feature_count(); ++f) d += schema.cardinality(f);
  return d;
}

ModelState initial_model(const FeatureSchema& schema) {
  return ModelState{std::vector<double>(model_dimension(schema), 0.0), 0};
}

double predict_probability(const ModelState& model, const FeatureSchema& schema, const Row& row) {
  require(model.weights.size() == model_dimension(schema), Errc::mismatch,
          "model dimension does not match the schema");
  return sigmoid(logit(model.weights, feature_offsets(schema), row));
}

double logistic_loss(const ModelState& model, const ClientDataset& data) {
  require(!data.rows.empty(), Errc::invalid_argument, "loss over an empty dataset");
  const auto off = feature_offsets(*data.schema);
  const std::size_t t = data.schema->target_index();
  double loss = 0.0;
  for (const auto& row : data.rows) {
    const double z = logit(model.weights, off, row);
    // log(1 + e^z) - y z, computed stably.
    loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - (row[t] == 1 ? z : 0.0);
  }
  return loss / static_cast<double>(data.rows.size());
}

LocalUpdate local_train(const ModelState& model, const ClientDataset& client,
                        const TrainConfig& config) {
  config.validate();
  const auto& schema = *client.schema;
  require(model.weights.size() == model_dimension(schema), Errc::mismatch,
          "model dimension does not match the schema");
  LocalUpdate out{model, client.rows.size(), client.rows.empty()};
  if (out.empty) return out;

  const auto off = feature_offsets(schema);
  const std::size_t t = schema.target_index();
  std::mt19937_64 rng(derive_seed(derive_seed(config.seed, model.round), client.client_id));
  std::vector<std::size_t> order(client.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto& w = out.model.weights;
  std::vector<double> grad(w.size());
  for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const Row& row = client.rows[order[i]];
        const double g = sigmoid(logit(w, off, row)) - (row[t] == 1 ? 1.0 : 0.0);
        for (std::size_t f = 0; f < off.size(); ++f) grad[off[f] + row[f]] += g;
        grad.back() += g;
      }
      const double step = config.learning_rate / static_cast<double>(end - start);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * grad[j];
    }
  }
  return out;
}

ModelState fedavg_round(const ModelState& model, std::span<const ClientDataset* const> clients,
                        const TrainConfig& config) {
  require(!clients.empty(), Errc::invalid_argument, "federation has no clients");
  std::vector<LocalUpdate> updates(clients.size());
  parallel_for(clients.size(),
               [&](std::size_t i) { updates[i] = local_train(model, *clients[i], config); });
  std::size_t total = 0;
  const LocalUpdate* first = nullptr;
  for (const auto& u : updates) {
    total += u.samples;
    if (!first && !u.empty) first = &u;
  }
  require(first != nullptr, Errc::degenerate, "every federation member is empty");
  // Averaging offsets from one member keeps identical updates exact.
  ModelState next = first->model;
  for (const auto& u : updates) {
    if (u.empty || &u == first) continue;
    const double share = static_cast<double>(u.samples) / static_cast<double>(total);
    for (std::size_t j = 0; j < next.weights.size(); ++j)
      next.weights[j] += share * (u.model.weights[j] - first->model.weights[j]);
  }
  next.round = model.round + 1;
  return next;
}

// Evaluation -------------------------------------------------------------------

EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                std::span<const int> sensitive) {
  require(truth.size() == predicted.size() && truth.size() == sensitive.size(),
          Errc::invalid_argument, "label, prediction and group vectors differ in length");
  require(!truth.empty(), Errc::invalid_argument, "evaluation set is empty");
  EvalReport r;
  r.size = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require((truth[i] == 0 || truth[i] == 1) && (predicted[i] == 0 || predicted[i] == 1) &&
                (sensitive[i] == 0 || sensitive[i] == 1),
            Errc::invalid_argument, "evaluation values must be 0 or 1");
    auto& g = r.groups[static_cast<std::size_t>(sensitive[i])];
    if (truth[i] == 1)
      (predicted[i] == 1 ? g.tp : g.fn) += 1;
    else
      (predicted[i] == 1 ? g.fp : g.tn) += 1;
  }
  const auto& g0 = r.groups[0];
  const auto& g1 = r.groups[1];
  const auto ratio = [](std::size_t a, std::size_t b) -> std::optional<double> {
    if (b == 0) return std::nullopt;
    return static_cast<double>(a) / static_cast<double>(b);
  };
  const std::size_t tp = g0.tp + g1.tp, fp = g0.fp + g1.fp, fn = g0.fn + g1.fn;
  r.accuracy = static_cast<double>(g0.tp + g0.tn + g1.tp + g1.tn) / static_cast<double>(r.size);
  r.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  const auto pos0 = ratio(g0.tp + g0.fp, g0.total()), pos1 = ratio(g1.tp + g1.fp, g1.total());
  if (pos0 && pos1) r.spd = *pos1 - *pos0;
  const auto tpr0 = ratio(g0.tp, g0.tp + g0.fn), tpr1 = ratio(g1.tp, g1.tp + g1.fn);
  if (tpr0 && tpr1) r.eod = *tpr1 - *tpr0;
  const auto acc0 = ratio(g0.tp + g0.tn, g0.total()), acc1 = ratio(g1.tp + g1.tn, g1.total());
  if (acc0 && acc1) r.mad = *acc1 - *acc0;
  return r;
}

EvalReport evaluate(const ModelState& model, const ClientDataset& holdout) {
  const auto& schema = *holdout.schema;
  require_binary(schema);
  require(!holdout.rows.empty(), Errc::invalid_argument, "holdout set is empty");
  require(model.weights.size() == model_dimension(schema), Errc::mismatch,
          "model dimension does not match the schema");
  const auto off = feature_offsets(schema);
  std::vector<int> truth, predicted, sensitive;
  for (const auto& row : holdout.rows) {
    truth.push_back(static_cast<int>(row[schema.target_index()]));
    predicted.push_back(sigmoid(logit(model.weights, off, row)) >= 0.5 ? 1 : 0);
    sensitive.push_back(static_cast<int>(row[schema.sensitive_index()]));
  }
  return evaluate_predictions(truth, predicted, sensitive);
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json confusion_json(const GroupConfusion& g) {
  return json{{"tp", g.tp}, {"fp", g.fp}, {"tn", g.tn}, {"fn", g.fn}};
}

}  // namespace

json EvalReport::to_json() const {
  return json{{"size", size},
              {"accuracy", accuracy},
              {"f1", opt(f1)},
              {"spd", opt(spd)},
              {"eod", opt(eod)},
              {"mad", opt(mad)},
              {"groups", {confusion_json(groups[0]), confusion_json(groups[1])}}};
}

// Spearman ---------------------------------------------------------------------

namespace {

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[idx[m]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), Errc::invalid_argument, "spearman inputs differ in length");
  require(xs.size() >= 3, Errc::invalid_argument, "spearman needs at least 3 points");
  for (std::size_t i = 0; i < xs.size(); ++i)
    require(std::isfinite(xs[i]) && std::isfinite(ys[i]), Errc::invalid_argument,
            "spearman inputs must be finite");
  const auto rx = average_ranks(xs), ry = average_ranks(ys);
  const double mean = (static_cast<double>(xs.size()) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

// Differential evolution -------------------------------------------------------

void DeConfig::validate() const {
  require(population >= 4, Errc::invalid_argument, "DE population must be at least 4");
  require(mutation > 0.0 && mutation < 2.0, Errc::invalid_argument, "DE F must lie in (0,2)");
  require(crossover > 0.0 && crossover < 1.0, Errc::invalid_argument, "DE CR must lie in (0,1)");
  require(generations > 0, Errc::invalid_argument, "DE needs at least one generation");
}

DeResult differential_evolution(const std::function<double(std::span<const double>)>& objective,
                                std::span<const double> lower, std::span<const double> upper,
                                const DeConfig& config) {
  config.validate();
  const std::size_t dim = lower.size();
  require(dim > 0 && upper.size() == dim, Errc::invalid_argument, "DE bounds are malformed");
  for (std::size_t d = 0; d < dim; ++d)
    require(lower[d] < upper[d], Errc::invalid_argument, "DE lower bound must be below upper");
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t np = config.population;

  std::vector<std::vector<double>> pop(np, std::vector<double>(dim));
  std::vector<double> fit(np);
  DeResult res;
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t d = 0; d < dim; ++d)
      pop[i][d] = lower[d] + unit(rng) * (upper[d] - lower[d]);
    fit[i] = objective(pop[i]);
    ++res.evaluations;
  }
  std::uniform_int_distribution<std::size_t> pick(0, np - 1), pick_dim(0, dim - 1);
  std::vector<double> trial(dim);
  for (std::size_t gen = 0; gen < config.generations; ++gen) {
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t a, b, c;
      do a = pick(rng); while (a == i);
      do b = pick(rng); while (b == i || b == a);
      do c = pick(rng); while (c == i || c == a || c == b);
      const std::size_t forced = pick_dim(rng);
      for (std::size_t d = 0; d < dim; ++d) {
        const bool cross = d == forced || unit(rng) < config.crossover;
        const double v = cross ? pop[a][d] + config.mutation * (pop[b][d] - pop[c][d]) : pop[i][d];
        trial[d] = std::clamp(v, lower[d], upper[d]);
      }
      const double f = objective(trial);
      ++res.evaluations;
      if (f <= fit[i]) {
        pop[i] = trial;
        fit[i] = f;
      }
    }
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) -
                                                    fit.begin());
  res.best = pop[best];
  res.value = fit[best];
  return res;
}

// Weight calibration -----------------------------------------------------------

namespace {

struct MetricColumns {
  std::vector<double> eod, mad, accuracy, f1;
};

MetricColumns metric_columns(std::span<const FederationSample> samples) {
  MetricColumns m;
  for (const auto& s : samples) {
    const auto& r = s.report;
    require(r.eod && r.mad && r.f1, Errc::degenerate,
            "a federation's EOD, MAD or F1 is undefined on the holdout");
    m.eod.push_back(std::abs(*r.eod));
    m.mad.push_back(std::abs(*r.mad));
    m.accuracy.push_back(r.accuracy);
    m.f1.push_back(*r.f1);
  }
  return m;
}

std::optional<double> objective_from(const std::vector<double>& pfl, const MetricColumns& m) {
  const auto fe = spearman(pfl, m.eod), fm = spearman(pfl, m.mad);
  const auto ua = spearman(pfl, m.accuracy), uf = spearman(pfl, m.f1);
  if (!fe || !fm || !ua || !uf) return std::nullopt;
  return (*fe + *fm) / 2.0 - (*ua + *uf) / 2.0;
}

std::vector<double> pfl_values(const PflWeights& w, std::span<const FederationSample> samples) {
  std::vector<double> v;
  for (const auto& s : samples) v.push_back(s.terms.value(w));
  return v;
}

}  // namespace

std::optional<double> meta_objective(const PflWeights& weights,
                                     std::span<const FederationSample> samples) {
  return objective_from(pfl_values(weights, samples), metric_columns(samples));
}

WeightCalibration calibrate_weights(std::span<const FederationSample> samples,
                                    const DeConfig& config, double upper) {
  require(samples.size() >= 10, Errc::invalid_argument,
          "weight calibration needs at least 10 federations, got " +
              std::to_string(samples.size()));
  require(upper > 0.0 && std::isfinite(upper), Errc::invalid_argument,
          "weight box must have a positive upper bound");
  const auto cols = metric_columns(samples);
  for (const auto* col : {&cols.eod, &cols.mad, &cols.accuracy, &cols.f1})
    require(std::adjacent_find(col->begin(), col->end(), std::not_equal_to<>()) != col->end(),
            Errc::degenerate, "a metric is constant across the federation sample");

  const auto to_weights = [](std::span<const double> x) {
    return PflWeights{x[0], x[1], x[2], x[3]};
  };
  const auto negated = [&](std::span<const double> x) {
    const auto v = objective_from(pfl_values(to_weights(x), samples), cols);
    return v ? -*v : 3.0;  // below any attainable objective
  };
  const std::vector<double> lo(4, 0.0), hi(4, upper);
  WeightCalibration out;
  out.search = differential_evolution(negated, lo, hi, config);
  out.weights = to_weights(out.search.best);
  out.objective = -out.search.value;
  out.reference_objective = objective_from(pfl_values(PflWeights{}, samples), cols);
  return out;
}

json WeightCalibration::to_json() const {
  return json{{"weights", weights_to_json(weights)},
              {"objective", objective},
              {"reference_weights", weights_to_json(PflWeights{})},
              {"reference_objective", opt(reference_objective)},
              {"evaluations", search.evaluations}};
}

// Training and protocol --------------------------------------------------------

void TrainingRun::write_curve_csv(std::ostream& out) const {
  out << "round,accuracy,f1,spd,eod\n";
  out.precision(17);
  const auto cell = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (std::size_t r = 0; r < curve.size(); ++r) {
    out << r + 1 << ',' << curve[r].accuracy << ',';
    cell(curve[r].f1);
    out << ',';
    cell(curve[r].spd);
    out << ',';
    cell(curve[r].eod);
    out << '\n';
  }
}

TrainingRun train_federation(std::span<const ClientDataset* const> members,
                             const ClientDataset& holdout, const TrainConfig& config) {
  config.validate();
  require(!members.empty(), Errc::invalid_argument, "federation has no clients");
  require_binary(*holdout.schema);
  for (const auto* m : members)
    require(*m->schema == *holdout.schema, Errc::mismatch,
            "client '" + m->client_id + "' uses a different schema than the holdout");
  TrainingRun run{initial_model(*holdout.schema), {}};
  for (std::size_t r = 0; r < config.rounds; ++r) {
    run.model = fedavg_round(run.model, members, config);
    run.curve.push_back(evaluate(run.model, holdout));
  }
  return run;
}

namespace {

template <typename F>
auto in_phase(const char* phase, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    fail(e.code(), std::string(phase) + ": " + e.what());
  }
}

}  // namespace

ProtocolReport run_protocol(const std::vector<ClientDataset>& clients,
                            const ClientDataset& holdout, const PflWeights& weights,
                            const ProtocolConfig& config) {
  require(!clients.empty(), Errc::invalid_argument, "client pool is empty");
  const SchemaPtr schema = clients.front().schema;
  for (const auto& c : clients)
    require(*c.schema == *schema, Errc::mismatch,
            "client '" + c.client_id + "' uses a different schema");
  require(config.k >= 1 && config.k <= clients.size(), Errc::invalid_argument,
          "k must lie in [1, pool size]");
  ProtocolReport report;

  // Phase 1: local tables and noise.
  std::vector<TableBundle> released = in_phase("phase release", [&] {
    NoiseCalibration calib;
    calib.query_count = schema->pair_count();
    if (config.sigma_override) {
      require(*config.sigma_override >= 0.0, Errc::invalid_argument,
              "sigma override must be non-negative");
      calib.sigma = *config.sigma_override;
    } else {
      calib = calibrate_sigma(PrivacyBudget{config.epsilon1, config.delta, Phase::selection},
                              schema->pair_count());
    }
    report.sigma = calib.sigma;
    std::vector<TableBundle> out(clients.size());
    const std::uint64_t seed = derive_seed(config.seed, "release");
    parallel_for(clients.size(), [&](std::size_t i) {
      TableBundle exact = compute_tables(clients[i]);
      out[i] = calib.sigma > 0.0 ? noise_bundle(exact, calib, seed) : std::move(exact);
    });
    return out;
  });

  // Phase 2: server-side search.
  in_phase("phase search", [&] {
    const BundlePool pool(schema, std::move(released));
    for (std::size_t i = 0; i < pool.size(); ++i) report.client_ids.push_back(pool.id(i));
    Federation chosen;
    if (config.k == pool.size()) {
      chosen.members.resize(pool.size());
      std::iota(chosen.members.begin(), chosen.members.end(), std::size_t{0});
    } else {
      ScheduleConfig schedule = config.schedule;
      schedule.seed = derive_seed(config.seed, "search");
      report.search = search_runs(pool, weights, config.k, schedule, config.search_runs);
      chosen = report.search->runs[report.search->best_run].best_federation;
    }
    report.selected = pool.ids(chosen);
    report.selected_pfl = pfl(aggregate(pool, chosen), weights, pool.schema());
    return 0;
  });

  // Phase 3: FedAvg over the selected federation.
  in_phase("phase train", [&] {
    std::map<std::string, const ClientDataset*> by_id;
    for (const auto& c : clients) by_id[c.client_id] = &c;
    std::vector<const ClientDataset*> members;
    for (const auto& id : report.selected) members.push_back(by_id.at(id));
    TrainConfig train = config.train;
    train.seed = derive_seed(config.seed, "train");
    report.training = train_federation(members, holdout, train);
    for (const auto& id : report.client_ids) {
      const bool selected =
          std::find(report.selected.begin(), report.selected.end(), id) != report.selected.end();
      report.budgets.push_back(total_budget(selected, config.epsilon1, config.epsilon2));
    }
    return 0;
  });
  return report;
}

json ProtocolReport::to_json() const {
  json budgets_json = json::object();
  for (std::size_t i = 0; i < client_ids.size(); ++i) budgets_json[client_ids[i]] = budgets[i];
  json search_json = nullptr;
  if (search) {
    json runs = json::array();
    for (const auto& r : search->runs)
      runs.push_back({{"best_pfl", r.best_pfl},
                      {"evaluations", r.evaluations},
                      {"proposals", r.records.size()}});
    search_json = {{"best_run", search->best_run},
                   {"mean_pfl", search->mean_pfl},
                   {"std_pfl", search->std_pfl},
                   {"runs", std::move(runs)}};
  }
  return json{{"sigma", sigma},
              {"selected", selected},
              {"selected_pfl", selected_pfl},
              {"search", std::move(search_json)},
              {"final", training.curve.empty() ? json(nullptr) : training.curve.back().to_json()},
              {"rounds", training.curve.size()},
              {"total_budget", std::move(budgets_json)}};
}

}  // namespace fedselect
