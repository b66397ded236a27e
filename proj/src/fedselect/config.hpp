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

#ifndef FEDSELECT_CONFIG_HPP
#define FEDSELECT_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedselect/anneal.hpp"
#include "fedselect/flsim.hpp"
#include "fedselect/mipfl.hpp"
#include "fedselect/tabular.hpp"

namespace fedselect {

enum class DataSource { planted, synth, csv };

struct CsvClient {
  std::string id;
  std::string path;
  bool operator==(const CsvClient&) const = default;
};

struct DataConfig {
  DataSource source = DataSource::planted;
  PlantedBiasOptions planted;
  std::vector<SynthClientSpec> synth;  // source = synth
  std::vector<CsvClient> csv;          // source = csv
  Binning binning;
  std::size_t holdout_rows = 5000;     // generated sources
  std::string holdout_path;            // csv source
  bool operator==(const DataConfig&) const = default;
};

struct PrivacyConfig {
  double epsilon1 = 1.0;
  double epsilon2 = 1.0;
  double delta = 1e-5;
  std::optional<double> sigma_override;
  std::vector<std::size_t> calibrate_k{5, 10, 20, 30, 50};
  bool operator==(const PrivacyConfig&) const = default;
};

struct SearchConfig {
  std::size_t k = 5;
  std::size_t runs = 5;
  ScheduleConfig schedule;
  std::string bundles_dir;  // empty: release in-process
  bool exhaustive_check = false;
  bool operator==(const SearchConfig&) const = default;
};

struct AuditConfig {
  std::vector<double> epsilons{0.1, 0.5, 1.0, 2.0, 5.0, std::numeric_limits<double>::infinity()};
  std::size_t n_targets = 1000;
  std::size_t records = 25000;
  std::vector<std::string> single_pair;  // two variable names; empty means (S, T)
  bool operator==(const AuditConfig&) const = default;
};

struct StabilityConfig {
  bool enabled = false;
  std::vector<std::size_t> k_values{1, 5};
  std::size_t trials = 2000;
  std::size_t misorder_pairs = 3;
  std::size_t global_k = 3;
  std::size_t global_pool = 8;  // first clients of the pool, by id
  std::vector<double> mus;
  std::vector<double> margins{0.0, 1.0, 6.0};
  bool operator==(const StabilityConfig&) const = default;
};

struct ValidateConfig {
  std::vector<double> snr_levels{2.0, 10.0, 50.0, 100.0};
  std::size_t trials = 1000;
  std::vector<std::vector<double>> table{
      {400, 100, 100, 100}, {100, 400, 100, 100}, {100, 100, 400, 100}, {100, 100, 100, 400}};
  StabilityConfig stability;
  bool operator==(const ValidateConfig&) const = default;
};

struct WeightsConfig {
  std::size_t federations = 20;
  DeConfig de;
  double upper = 3.0;
  bool operator==(const WeightsConfig&) const = default;
};

/// Everything one invocation needs. A single master seed derives all others.
struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::optional<nlohmann::json> schema;  // normalized; required unless data is planted
  DataConfig data;
  PrivacyConfig privacy;
  PflWeights weights;
  SearchConfig search;
  TrainConfig train;
  AuditConfig audit;
  ValidateConfig validate;
  WeightsConfig meta;

  bool operator==(const RunConfig&) const = default;
};

/// Throws Errc::config naming the offending key.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path);

/// Sets `dotted.key.path` to `value`, parsed as JSON when it parses and kept
/// as a string otherwise. Intermediate objects are created as needed.
void apply_override(nlohmann::json& j, const std::string& key_path, const std::string& value);

/// Module invariants plus existence of every referenced file.
void validate_config(const RunConfig& config);

}  // namespace fedselect

#endif  // FEDSELECT_CONFIG_HPP
