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

#ifndef FEDSELECT_COMMANDS_HPP
#define FEDSELECT_COMMANDS_HPP

#include <string>

#include "fedselect/config.hpp"

namespace fedselect {

inline constexpr const char* kVersion = "1.0.0";

// Each command validates the config (Errc::config), runs its phases and
// returns the report. When `out_dir` is non-empty it also writes a run
// directory: config.json, report.json, command outputs, manifest.json
// (files with sizes and digests) and timings.json. Only timings.json varies
// between identical runs. Phase failures are rethrown as "phase <name>: ...".

nlohmann::json cmd_calibrate(const RunConfig& config, const std::string& out_dir);
nlohmann::json cmd_release(const RunConfig& config, const std::string& out_dir);
nlohmann::json cmd_search(const RunConfig& config, const std::string& out_dir);
nlohmann::json cmd_train(const RunConfig& config, const std::string& out_dir);
nlohmann::json cmd_audit(const RunConfig& config, const std::string& out_dir);
nlohmann::json cmd_validate(const RunConfig& config, const std::string& out_dir);
nlohmann::json cmd_weights(const RunConfig& config, const std::string& out_dir);

/// Reads schema.json, manifest.json and the listed bundles of a release run.
BundlePool load_bundle_dir(const std::string& directory);

}  // namespace fedselect

#endif  // FEDSELECT_COMMANDS_HPP
