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

#include <algorithm>
#include <cmath>
#include <random>

#include "fedselect/anneal.hpp"
#include "fedselect/mipfl.hpp"
#include "fedselect/privacy.hpp"
#include "support.hpp"

using namespace fedselect;

namespace {

TableBundle single_table(const SchemaPtr& s, std::string id, std::vector<double> cells) {
  TableBundle b{std::move(id), s->hash(), 0.0, {}};
  b.tables.emplace_back(VarPair{0, 1}, 2, 2, std::move(cells), true);
  return b;
}

std::vector<double> cells_of(const ContingencyTable& t) {
  return {t.cells().begin(), t.cells().end()};
}

std::vector<std::int64_t> sums(const AggregateView& v) {
  return {v.fixed_sums().begin(), v.fixed_sums().end()};
}

}  // namespace

TEST(Mi, HandExamples) {
  EXPECT_NEAR(mi_from_counts(std::vector<double>{25, 25, 25, 25}, 2, 2), 0.0, 1e-15);
  EXPECT_NEAR(mi_from_counts(std::vector<double>{50, 0, 0, 50}, 2, 2), 1.0, 1e-12);
  // 1 - H2(0.2) computed by hand: 0.2780719051...
  EXPECT_NEAR(mi_from_counts(std::vector<double>{40, 10, 10, 40}, 2, 2), 0.2781, 1e-4);
  EXPECT_NEAR(mi_from_counts(std::vector<double>{40, 10, 10, 40}, 2, 2), 0.278071905112638,
              1e-12);
}

TEST(Mi, DegenerateAndNegativeCells) {
  EXPECT_THROW(mi_from_counts(std::vector<double>{0, 0, 0, 0}, 2, 2), Error);
  EXPECT_THROW(mi_from_counts(std::vector<double>{-3, 1, 1, 0}, 2, 2), Error);
  const double v = mi_from_counts(std::vector<double>{-2.5, 10, 12, 30}, 2, 2);
  EXPECT_TRUE(std::isfinite(v));
}

TEST(Mi, PropertiesOnRandomExactTables) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 2 + rng() % 4, c = 2 + rng() % 4;
    ContingencyTable t(VarPair{0, 1}, r, c, true);
    for (auto& x : t.cells()) x = static_cast<double>(rng() % 20);
    t.at(0, 0) += 1;
    const double mi = mi_from_counts(t);
    EXPECT_GE(mi, 0.0);
    EXPECT_NEAR(mi, mi_from_counts(t.transpose()), 1e-12);
    std::vector<double> rows(r, 0.0), cols(c, 0.0);
    for (std::size_t x = 0; x < r; ++x)
      for (std::size_t y = 0; y < c; ++y) rows[x] += t.at(x, y), cols[y] += t.at(x, y);
    EXPECT_LE(mi, std::min(entropy_bits(rows), entropy_bits(cols)) + 1e-9);
    // Merging the first two columns never increases MI.
    ContingencyTable merged(VarPair{0, 1}, r, c - 1, true);
    for (std::size_t x = 0; x < r; ++x) {
      merged.at(x, 0) = t.at(x, 0) + t.at(x, 1);
      for (std::size_t y = 2; y < c; ++y) merged.at(x, y - 1) = t.at(x, y);
    }
    EXPECT_LE(mi_from_counts(merged), mi + 1e-12);
  }
}

TEST(Aggregate, SumsCellwise) {
  auto s = fstest::binary_schema(1);
  BundlePool pool(s, {single_table(s, "a", {1, 0, 0, 1}), single_table(s, "b", {1, 2, 3, 4})});
  const auto v = aggregate(pool, std::vector<std::string>{"a", "b"});
  EXPECT_EQ(cells_of(v.table(0)), (std::vector<double>{2, 2, 3, 5}));
  EXPECT_EQ(v.total(0), 12.0);
  EXPECT_EQ(cells_of(aggregate(pool, std::vector<std::string>{"b"}).table(0)),
            (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(sums(aggregate(pool, std::vector<std::string>{"b", "a"})), sums(v));
}

TEST(Aggregate, PoolValidation) {
  auto s = fstest::binary_schema(1);
  EXPECT_THROW(BundlePool(s, {single_table(s, "a", {1, 0, 0, 1}),
                              single_table(s, "a", {1, 2, 3, 4})}),
               Error);
  auto wrong = single_table(s, "b", {1, 2, 3, 4});
  wrong.schema_hash = "deadbeef";
  try {
    BundlePool(s, {single_table(s, "a", {1, 0, 0, 1}), wrong});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::mismatch);
  }
  BundlePool pool(s, {single_table(s, "a", {1, 0, 0, 1})});
  EXPECT_THROW(aggregate(pool, std::vector<std::string>{"zz"}), Error);
}

TEST(Aggregate, LinearityWithNoisyCells) {
  auto s = fstest::mixed_schema({2, 3}, 2);
  std::vector<TableBundle> bundles;
  for (int c = 0; c < 6; ++c) {
    auto d = fstest::random_dataset(s, 80, 100 + c, "c" + std::to_string(c));
    bundles.push_back(noise_bundle(compute_tables(d), NoiseCalibration{3, 3.0}, c));
  }
  BundlePool pool(s, bundles);
  const Federation w{{0, 2, 4}}, wi{{0, 2, 3, 4}};
  const auto a = aggregate(pool, w), b = aggregate(pool, wi);
  const auto extra = pool.fixed_cells(3);
  for (std::size_t i = 0; i < a.fixed_sums().size(); ++i)
    EXPECT_EQ(b.fixed_sums()[i] - extra[i], a.fixed_sums()[i]);
}

TEST(SwapUpdate, MatchesFullAggregateAndRestores) {
  auto s = fstest::mixed_schema({2, 3, 2}, 2);
  std::vector<ClientDataset> clients;
  for (int c = 0; c < 8; ++c)
    clients.push_back(fstest::random_dataset(s, 60, 200 + c, "c" + std::to_string(c)));
  std::vector<TableBundle> bundles;
  for (const auto& c : clients)
    bundles.push_back(noise_bundle(compute_tables(c), NoiseCalibration{6, 2.0}, 7));
  BundlePool pool(s, bundles);
  std::mt19937_64 rng(3);
  const PflWeights w;
  for (int trial = 0; trial < 50; ++trial) {
    const auto fed = random_federation(pool.size(), 4, rng);
    const auto view = aggregate(pool, fed);
    const auto move = propose_swap(fed, pool.size(), rng);
    const auto swapped = swap_update(view, move.out_client, move.in_client, pool);
    const auto full = aggregate(pool, apply_swap(fed, move));
    EXPECT_EQ(sums(swapped), sums(full));
    EXPECT_EQ(swapped.federation(), full.federation());
    EXPECT_EQ(pfl(swapped, w, *s), pfl(full, w, *s));
    const auto back = swap_update(swapped, move.in_client, move.out_client, pool);
    EXPECT_EQ(sums(back), sums(view));
    EXPECT_EQ(pfl(back, w, *s), pfl(view, w, *s));
  }
}

TEST(SwapUpdate, IdenticalBundlesLeavePflUnchanged) {
  auto s = fstest::binary_schema(2);
  const auto base = compute_tables(fstest::random_dataset(s, 50, 1));
  std::vector<TableBundle> bundles;
  for (int c = 0; c < 4; ++c) {
    auto b = base;
    b.client_id = "c" + std::to_string(c);
    bundles.push_back(b);
  }
  BundlePool pool(s, bundles);
  const auto v = aggregate(pool, Federation{{0, 1}});
  EXPECT_EQ(pfl(swap_update(v, 1, 3, pool), PflWeights{}, *s), pfl(v, PflWeights{}, *s));
  EXPECT_THROW(swap_update(v, 2, 3, pool), Error);
  EXPECT_THROW(swap_update(v, 1, 0, pool), Error);
}

TEST(Pfl, IndependentDataNearZero) {
  auto s = fstest::mixed_schema({2, 3, 3}, 2);
  SynthSpec spec{s, {SynthClientSpec{"a", 60000, {}, {}}, SynthClientSpec{"b", 60000, {}, {}}}};
  const auto pool = fstest::exact_pool(synth_clients(spec, 1));
  EXPECT_NEAR(pfl(aggregate(pool, Federation{{0, 1}}), PflWeights{}, *s), 0.0, 5e-4);
}

TEST(Pfl, DirectTermOnlyGivesEntropyOfS) {
  auto s = fstest::binary_schema(2);
  SynthClientSpec cs{"a", 20000, {{"x0", {0.4, 0.6}}}, {{"x0", "t", 1.0}}};
  const auto pool = fstest::exact_pool(synth_clients(SynthSpec{s, {cs}}, 2));
  const auto v = aggregate(pool, Federation{{0}});
  const auto& st = v.table(s->pair_slot({0, 2}));
  const double hs = entropy_bits(std::vector<double>{st.at(0, 0) + st.at(0, 1),
                                                     st.at(1, 0) + st.at(1, 1)});
  EXPECT_NEAR(pfl(v, PflWeights{1, 0, 0, 0}, *s), hs, 1e-12);
}

TEST(Pfl, MatchesPooledRowOracle) {
  auto s = fstest::mixed_schema({2, 3, 4, 2}, 3);
  std::vector<ClientDataset> clients;
  for (int c = 0; c < 10; ++c)
    clients.push_back(fstest::random_dataset(s, 40 + 17 * c, 300 + c, "c" + std::to_string(c)));
  const auto pool = fstest::exact_pool(clients);
  std::mt19937_64 rng(5);
  const PflWeights w;
  for (int trial = 0; trial < 50; ++trial) {
    const auto fed = random_federation(pool.size(), 1 + rng() % 6, rng);
    std::vector<const ClientDataset*> parts;
    for (auto i : fed.members) parts.push_back(&clients[i]);
    EXPECT_NEAR(pfl(aggregate(pool, fed), w, *s), fstest::oracle_pfl(parts, *s, w), 1e-9);
  }
}

TEST(Pfl, WeightsValidateAndReport) {
  EXPECT_THROW((PflWeights{-1, 0, 0, 0}.validate()), Error);
  EXPECT_EQ(weights_from_json(weights_to_json(PflWeights{1, 2, 3, 4})), (PflWeights{1, 2, 3, 4}));
  auto s = fstest::binary_schema(2);
  const auto pool = fstest::exact_pool({fstest::random_dataset(s, 50, 1, "a")});
  const auto r = pfl_report(aggregate(pool, Federation{{0}}), PflWeights{}, pool);
  EXPECT_EQ(r["federation"], nlohmann::json::array({"a"}));
  EXPECT_EQ(r["n_W"]["min"], 50.0);
  EXPECT_TRUE(r["terms"].contains("redundancy"));
}
