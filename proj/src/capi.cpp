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

#include "fedselect/fedselect.h"

#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "fedselect/commands.hpp"
#include "fedselect/common.hpp"
#include "fedselect/config.hpp"
#include "fedselect/mipfl.hpp"
#include "fedselect/privacy.hpp"

using fedselect::Errc;
using nlohmann::json;

struct fs_config {
  json raw;
};

struct fs_pool {
  fedselect::BundlePool pool;
};

namespace {

thread_local std::string last_error;

fs_status status_of(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return FS_ERR_INVALID_ARGUMENT;
    case Errc::schema_violation: return FS_ERR_SCHEMA;
    case Errc::parse_error: return FS_ERR_PARSE;
    case Errc::io_error: return FS_ERR_IO;
    case Errc::degenerate: return FS_ERR_DEGENERATE;
    case Errc::mismatch: return FS_ERR_MISMATCH;
    case Errc::budget_exceeded: return FS_ERR_BUDGET;
    case Errc::config: return FS_ERR_CONFIG;
  }
  return FS_ERR_INTERNAL;
}

template <typename F>
fs_status guarded(F&& body) {
  try {
    body();
    return FS_OK;
  } catch (const fedselect::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    last_error = e.what();
    return FS_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return FS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return FS_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return FS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) fedselect::fail(Errc::invalid_argument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

fedselect::RunConfig parse(const fs_config* config) {
  need(config, "config");
  return fedselect::config_from_json(config->raw);
}

}  // namespace

extern "C" {

const char* fs_version(void) { return fedselect::kVersion; }

const char* fs_last_error(void) { return last_error.c_str(); }

const char* fs_status_name(fs_status status) {
  switch (status) {
    case FS_OK: return "ok";
    case FS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FS_ERR_SCHEMA: return "schema violation";
    case FS_ERR_PARSE: return "parse error";
    case FS_ERR_IO: return "i/o error";
    case FS_ERR_DEGENERATE: return "degenerate input";
    case FS_ERR_MISMATCH: return "mismatch";
    case FS_ERR_BUDGET: return "budget exceeded";
    case FS_ERR_CONFIG: return "invalid configuration";
    case FS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void fs_set_threads(unsigned threads) { fedselect::set_thread_count(threads); }

void fs_string_free(char* s) { delete[] s; }

fs_status fs_config_load(const char* path, fs_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    std::ifstream in(path);
    if (!in) fedselect::fail(Errc::config, std::string("cannot open config file '") + path + "'");
    json raw = json::parse(in, nullptr, false);
    if (raw.is_discarded())
      fedselect::fail(Errc::config, std::string("config file '") + path + "' is not valid JSON");
    fedselect::config_from_json(raw);
    *out = new fs_config{std::move(raw)};
  });
}

fs_status fs_config_from_json(const char* json_text, fs_config** out) {
  return guarded([&] {
    need(json_text, "json_text");
    need(out, "out");
    *out = nullptr;
    json raw = json::parse(json_text, nullptr, false);
    if (raw.is_discarded()) fedselect::fail(Errc::config, "configuration is not valid JSON");
    fedselect::config_from_json(raw);
    *out = new fs_config{std::move(raw)};
  });
}

fs_status fs_config_set(fs_config* config, const char* key_path, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key_path, "key_path");
    need(value, "value");
    json copy = config->raw;
    fedselect::apply_override(copy, key_path, value);
    fedselect::config_from_json(copy);
    config->raw = std::move(copy);
  });
}

fs_status fs_config_validate(const fs_config* config) {
  return guarded([&] { fedselect::validate_config(parse(config)); });
}

fs_status fs_config_to_json(const fs_config* config, char** out_json) {
  return guarded([&] {
    need(out_json, "out_json");
    *out_json = dup_string(fedselect::config_to_json(parse(config)).dump(2));
  });
}

void fs_config_free(fs_config* config) { delete config; }

fs_status fs_command_from_name(const char* name, fs_command* out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    static const std::pair<const char*, fs_command> table[] = {
        {"calibrate", FS_CMD_CALIBRATE}, {"release", FS_CMD_RELEASE}, {"search", FS_CMD_SEARCH},
        {"train", FS_CMD_TRAIN},         {"audit", FS_CMD_AUDIT},     {"validate", FS_CMD_VALIDATE},
        {"weights", FS_CMD_WEIGHTS}};
    for (const auto& [n, c] : table)
      if (std::strcmp(n, name) == 0) {
        *out = c;
        return;
      }
    fedselect::fail(Errc::invalid_argument, std::string("unknown command '") + name + "'");
  });
}

fs_status fs_run(fs_command command, const fs_config* config, const char* out_dir,
                 char** report_json) {
  return guarded([&] {
    if (report_json) *report_json = nullptr;
    const auto cfg = parse(config);
    const std::string dir = out_dir ? out_dir : "";
    json report;
    switch (command) {
      case FS_CMD_CALIBRATE: report = fedselect::cmd_calibrate(cfg, dir); break;
      case FS_CMD_RELEASE: report = fedselect::cmd_release(cfg, dir); break;
      case FS_CMD_SEARCH: report = fedselect::cmd_search(cfg, dir); break;
      case FS_CMD_TRAIN: report = fedselect::cmd_train(cfg, dir); break;
      case FS_CMD_AUDIT: report = fedselect::cmd_audit(cfg, dir); break;
      case FS_CMD_VALIDATE: report = fedselect::cmd_validate(cfg, dir); break;
      case FS_CMD_WEIGHTS: report = fedselect::cmd_weights(cfg, dir); break;
      default: fedselect::fail(Errc::invalid_argument, "unknown command");
    }
    if (report_json) *report_json = dup_string(report.dump(2));
  });
}

fs_status fs_query_count(size_t feature_count, size_t* out) {
  return guarded([&] {
    need(out, "out");
    *out = fedselect::query_count(feature_count);
  });
}

fs_status fs_calibrate_sigma(double epsilon, double delta, size_t query_count, double* sigma,
                             double* optimal_order) {
  return guarded([&] {
    need(sigma, "sigma");
    const auto c = fedselect::calibrate_sigma(
        fedselect::PrivacyBudget{epsilon, delta, fedselect::Phase::selection}, query_count);
    *sigma = c.sigma;
    if (optimal_order) *optimal_order = c.optimal_order;
  });
}

fs_status fs_verify_epsilon(double sigma, size_t query_count, double delta, double* epsilon) {
  return guarded([&] {
    need(epsilon, "epsilon");
    *epsilon = fedselect::verify_epsilon(sigma, query_count, delta);
  });
}

fs_status fs_mi_from_counts(const double* cells, size_t rows, size_t cols, double* out) {
  return guarded([&] {
    need(cells, "cells");
    need(out, "out");
    *out = fedselect::mi_from_counts(std::span<const double>(cells, rows * cols), rows, cols);
  });
}

fs_status fs_pool_load(const char* bundles_dir, fs_pool** out) {
  return guarded([&] {
    need(bundles_dir, "bundles_dir");
    need(out, "out");
    *out = nullptr;
    *out = new fs_pool{fedselect::load_bundle_dir(bundles_dir)};
  });
}

size_t fs_pool_size(const fs_pool* pool) { return pool ? pool->pool.size() : 0; }

const char* fs_pool_client_id(const fs_pool* pool, size_t index) {
  if (!pool || index >= pool->pool.size()) return nullptr;
  return pool->pool.id(index).c_str();
}

fs_status fs_pool_pfl(const fs_pool* pool, const char* const* client_ids, size_t count,
                      double alpha, double beta, double gamma, double lambda, double* out) {
  return guarded([&] {
    need(pool, "pool");
    need(out, "out");
    if (count > 0) need(client_ids, "client_ids");
    std::vector<std::string> ids;
    for (size_t i = 0; i < count; ++i) {
      need(client_ids[i], "client id");
      ids.emplace_back(client_ids[i]);
    }
    const fedselect::PflWeights w{alpha, beta, gamma, lambda};
    w.validate();
    *out = fedselect::pfl(fedselect::aggregate(pool->pool, ids), w, pool->pool.schema());
  });
}

void fs_pool_free(fs_pool* pool) { delete pool; }

}  // extern "C"
