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

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedselect/fedselect.h"
#include "json.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPhase = 3;

struct Options {
  std::string config_path;
  std::string seed;
  std::string out_dir;
  std::string threads;
  std::vector<std::string> overrides;
};

int config_error(const std::string& what) {
  std::cerr << "fedselect: config error: " << what << "\n";
  return kExitConfig;
}

void print_summary(const std::string& command, const nlohmann::json& r) {
  std::cout.precision(6);
  if (command == "calibrate") {
    std::printf("epsilon=%g delta=%g\n%6s %6s %12s %12s\n", r["epsilon"].get<double>(),
                r["delta"].get<double>(), "K", "M", "sigma", "order");
    for (const auto& row : r["rows"])
      std::printf("%6zu %6zu %12.4f %12.4f\n", row["K"].get<std::size_t>(),
                  row["M"].get<std::size_t>(), row["sigma"].get<double>(),
                  row["optimal_order"].get<double>());
  } else if (command == "release") {
    std::cout << "released " << r["clients"].size() << " bundles, sigma=" << r["sigma"] << "\n";
  } else if (command == "search") {
    std::cout << "best federation " << r["best"]["federation"].dump() << " pfl="
              << r["best"]["pfl"] << " (mean " << r["mean_pfl"] << " std " << r["std_pfl"]
              << " over " << r["runs"] << " runs)\n";
  } else if (command == "train") {
    std::cout << "selected " << r["selected"].dump() << "\nfinal " << r["final"].dump() << "\n";
  } else if (command == "audit") {
    for (const auto& l : r["levels"])
      std::cout << "epsilon=" << l["epsilon"] << " auc_joint=" << l["auc_joint"]
                << " auc_single=" << l["auc_single"] << "\n";
  } else if (command == "validate") {
    for (const auto& l : r["snr"]["levels"])
      std::cout << "snr=" << l["snr"] << " bias=" << l["bias"] << " std=" << l["std"]
                << " predicted=" << l["predicted_std"] << "\n";
    if (!r["stability"].is_null())
      std::cout << "stability within bounds: " << r["stability"]["all_within_bounds"] << "\n";
  } else if (command == "weights") {
    std::cout << "weights " << r["weights"].dump() << " objective=" << r["objective"] << "\n";
  }
}

int run(const std::string& command, const Options& opt) {
  fs_config* cfg = nullptr;
  const fs_status loaded = opt.config_path.empty() ? fs_config_from_json("{}", &cfg)
                                                   : fs_config_load(opt.config_path.c_str(), &cfg);
  if (loaded != FS_OK) return config_error(fs_last_error());
  struct Guard {
    fs_config* c;
    ~Guard() { fs_config_free(c); }
  } guard{cfg};

  std::vector<std::pair<std::string, std::string>> sets;
  if (!opt.seed.empty()) sets.emplace_back("seed", opt.seed);
  if (!opt.threads.empty()) sets.emplace_back("threads", opt.threads);
  for (const auto& o : opt.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0)
      return config_error("--set expects key.path=value, got '" + o + "'");
    sets.emplace_back(o.substr(0, eq), o.substr(eq + 1));
  }
  for (const auto& [key, value] : sets)
    if (fs_config_set(cfg, key.c_str(), value.c_str()) != FS_OK)
      return config_error(fs_last_error());
  if (fs_config_validate(cfg) != FS_OK) return config_error(fs_last_error());

  fs_command cmd;
  if (fs_command_from_name(command.c_str(), &cmd) != FS_OK) return config_error(fs_last_error());
  const std::string out_dir = opt.out_dir.empty() ? "runs/" + command : opt.out_dir;
  char* report = nullptr;
  const fs_status st = fs_run(cmd, cfg, out_dir.c_str(), &report);
  if (st != FS_OK) {
    std::cerr << "fedselect: " << command << " failed (" << fs_status_name(st)
              << "): " << fs_last_error() << "\n";
    return st == FS_ERR_CONFIG ? kExitConfig : kExitPhase;
  }
  print_summary(command, nlohmann::json::parse(report));
  fs_string_free(report);
  std::cout << "run directory: " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving federation selection toolkit"};
  app.set_version_flag("--version", std::string("fedselect ") + fs_version());
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("-c,--config", opt.config_path, "JSON configuration file");
  app.add_option("--seed", opt.seed, "master seed (overrides the config)");
  app.add_option("-o,--out-dir", opt.out_dir, "run directory (default runs/<command>)");
  app.add_option("--threads", opt.threads, "worker threads, 0 for all cores");
  app.add_option("--set", opt.overrides, "override a config key: key.path=value")
      ->allow_extra_args(false);

  const std::pair<const char*, const char*> commands[] = {
      {"calibrate", "noise scale for each feature count"},
      {"release", "compute and noise per-client contingency tables"},
      {"search", "simulated-annealing federation search"},
      {"train", "end-to-end protocol: release, search, FedAvg"},
      {"audit", "membership-inference audit across privacy budgets"},
      {"validate", "noise-propagation study and stability checks"},
      {"weights", "calibrate PFL weights by differential evolution"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  return run(app.get_subcommands().front()->get_name(), opt);
}
