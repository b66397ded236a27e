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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "fedselect/fedselect.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "seed": 9,
  "data": {"source": "planted", "holdout_rows": 400,
           "planted": {"clients": 6, "rows_per_client": 300}},
  "search": {"k": 3, "runs": 2},
  "train": {"rounds": 1}
})";

struct Config {
  fs_config* ptr = nullptr;
  explicit Config(const char* text = kSmall) {
    EXPECT_EQ(fs_config_from_json(text, &ptr), FS_OK) << fs_last_error();
  }
  ~Config() { fs_config_free(ptr); }
};

json run(fs_command cmd, const fs_config* c, const char* dir = nullptr) {
  char* out = nullptr;
  const fs_status st = fs_run(cmd, c, dir, &out);
  EXPECT_EQ(st, FS_OK) << fs_last_error();
  if (st != FS_OK) return nullptr;
  json j = json::parse(out);
  fs_string_free(out);
  return j;
}

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("fedselect_capi_" + std::to_string(::getpid()) + tag);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(fs_version(), "1.0.0");
  EXPECT_STREQ(fs_status_name(FS_OK), "ok");
  EXPECT_STREQ(fs_status_name(FS_ERR_CONFIG), "invalid configuration");
  fs_command c;
  EXPECT_EQ(fs_command_from_name("search", &c), FS_OK);
  EXPECT_EQ(c, FS_CMD_SEARCH);
  EXPECT_EQ(fs_command_from_name("serch", &c), FS_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(fs_last_error()).find("serch"), std::string::npos);
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(fs_config_from_json(nullptr, nullptr), FS_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(fs_run(FS_CMD_CALIBRATE, nullptr, nullptr, nullptr), FS_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(fs_mi_from_counts(nullptr, 2, 2, nullptr), FS_ERR_INVALID_ARGUMENT);
  EXPECT_GT(std::string(fs_last_error()).size(), 0u);
  fs_config_free(nullptr);
  fs_pool_free(nullptr);
  fs_string_free(nullptr);
}

TEST(CApi, ConfigLifecycle) {
  fs_config* c = nullptr;
  EXPECT_EQ(fs_config_from_json("{\"bogus\": 1}", &c), FS_ERR_CONFIG);
  EXPECT_EQ(c, nullptr);
  EXPECT_EQ(fs_config_from_json("{", &c), FS_ERR_CONFIG);
  Config cfg;
  EXPECT_EQ(fs_config_set(cfg.ptr, "search.k", "4"), FS_OK);
  EXPECT_EQ(fs_config_set(cfg.ptr, "search.kk", "4"), FS_ERR_CONFIG);
  EXPECT_EQ(fs_config_set(cfg.ptr, "privacy.epsilon1", "-1"), FS_OK);
  EXPECT_EQ(fs_config_validate(cfg.ptr), FS_ERR_CONFIG);
  EXPECT_EQ(fs_config_set(cfg.ptr, "privacy.epsilon1", "2"), FS_OK);
  EXPECT_EQ(fs_config_validate(cfg.ptr), FS_OK);
  char* text = nullptr;
  ASSERT_EQ(fs_config_to_json(cfg.ptr, &text), FS_OK);
  const json j = json::parse(text);
  fs_string_free(text);
  EXPECT_EQ(j["search"]["k"], 4);
  EXPECT_EQ(j["privacy"]["epsilon1"], 2.0);
  // A failed set leaves the config untouched.
  EXPECT_EQ(fs_config_set(cfg.ptr, "search.k", "\"x\""), FS_ERR_CONFIG);
  ASSERT_EQ(fs_config_to_json(cfg.ptr, &text), FS_OK);
  EXPECT_EQ(json::parse(text)["search"]["k"], 4);
  fs_string_free(text);
}

TEST(CApi, ConfigLoadFromFile) {
  const auto dir = temp_dir("load");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << kSmall;
  fs_config* c = nullptr;
  ASSERT_EQ(fs_config_load((dir / "c.json").c_str(), &c), FS_OK) << fs_last_error();
  fs_config_free(c);
  EXPECT_EQ(fs_config_load((dir / "none.json").c_str(), &c), FS_ERR_CONFIG);
  fs::remove_all(dir);
}

TEST(CApi, Numerics) {
  size_t m = 0;
  ASSERT_EQ(fs_query_count(10, &m), FS_OK);
  EXPECT_EQ(m, 55u);
  double sigma = 0, order = 0, eps = 0;
  ASSERT_EQ(fs_calibrate_sigma(1.0, 1e-5, 55, &sigma, &order), FS_OK);
  EXPECT_NEAR(sigma, 36.3, 0.05);
  ASSERT_EQ(fs_verify_epsilon(sigma, 55, 1e-5, &eps), FS_OK);
  EXPECT_LE(eps, 1.0 + 1e-9);
  EXPECT_EQ(fs_calibrate_sigma(0.0, 1e-5, 55, &sigma, &order), FS_ERR_INVALID_ARGUMENT);
  const double cells[] = {40, 10, 10, 40};
  double mi = 0;
  ASSERT_EQ(fs_mi_from_counts(cells, 2, 2, &mi), FS_OK);
  EXPECT_NEAR(mi, 0.278071905112638, 1e-12);
  const double empty[] = {0, 0, 0, 0};
  EXPECT_EQ(fs_mi_from_counts(empty, 2, 2, &mi), FS_ERR_DEGENERATE);
}

TEST(CApi, RunCommands) {
  Config cfg;
  const json cal = run(FS_CMD_CALIBRATE, cfg.ptr);
  EXPECT_EQ(cal["rows"].size(), 5u);
  const json search = run(FS_CMD_SEARCH, cfg.ptr);
  EXPECT_EQ(search["best"]["federation"].size(), 3u);
  EXPECT_EQ(fs_config_set(cfg.ptr, "search.k", "50"), FS_OK);
  char* out = nullptr;
  EXPECT_EQ(fs_run(FS_CMD_SEARCH, cfg.ptr, nullptr, &out), FS_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(out, nullptr);
  EXPECT_EQ(std::string(fs_last_error()).rfind("phase search:", 0), 0u) << fs_last_error();
}

TEST(CApi, PoolFromReleasedBundles) {
  const auto dir = temp_dir("pool");
  Config cfg;
  ASSERT_EQ(fs_config_set(cfg.ptr, "privacy.sigma_override", "0"), FS_OK);
  ASSERT_EQ(fs_config_set(cfg.ptr, "weights",
                          R"({"alpha": 1, "beta": 1, "gamma": 1, "lambda": 1})"),
            FS_OK)
      << fs_last_error();
  run(FS_CMD_RELEASE, cfg.ptr, dir.c_str());
  fs_pool* pool = nullptr;
  ASSERT_EQ(fs_pool_load(dir.c_str(), &pool), FS_OK) << fs_last_error();
  ASSERT_EQ(fs_pool_size(pool), 6u);
  EXPECT_EQ(fs_pool_client_id(pool, 6), nullptr);

  // PFL reported by search for its best federation must match the pool query.
  ASSERT_EQ(fs_config_set(cfg.ptr, "search.bundles_dir", ("\"" + dir.string() + "\"").c_str()),
            FS_OK);
  const json search = run(FS_CMD_SEARCH, cfg.ptr);
  std::vector<std::string> ids = search["best"]["federation"];
  std::vector<const char*> ptrs;
  for (const auto& s : ids) ptrs.push_back(s.c_str());
  double value = 0;
  ASSERT_EQ(fs_pool_pfl(pool, ptrs.data(), ptrs.size(), 1, 1, 1, 1, &value), FS_OK);
  EXPECT_DOUBLE_EQ(value, search["best"]["pfl"].get<double>());

  const char* unknown[] = {"nobody"};
  EXPECT_NE(fs_pool_pfl(pool, unknown, 1, 1, 1, 1, 1, &value), FS_OK);
  const char* dup[] = {ptrs[0], ptrs[0]};
  EXPECT_EQ(fs_pool_pfl(pool, dup, 2, 1, 1, 1, 1, &value), FS_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(fs_pool_pfl(pool, ptrs.data(), ptrs.size(), -1, 1, 1, 1, &value),
            FS_ERR_INVALID_ARGUMENT);
  fs_pool_free(pool);

  EXPECT_EQ(fs_pool_load((dir / "missing").c_str(), &pool), FS_ERR_IO);
  fs::remove_all(dir);
}
