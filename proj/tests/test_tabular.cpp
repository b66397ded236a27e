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

#include <sstream>

#include "fedselect/common.hpp"
#include "fedselect/mipfl.hpp"
#include "fedselect/tabular.hpp"
#include "support.hpp"

using namespace fedselect;
using fstest::binary_schema;

namespace {

const ContingencyTable& table_for(const TableBundle& b, const FeatureSchema& s, VarPair p) {
  return b.tables.at(s.pair_slot(p));
}

}  // namespace

TEST(Schema, PairsCoverEveryUnorderedPairOnce) {
  auto s = binary_schema(3);
  EXPECT_EQ(s->pair_count(), 6u);
  EXPECT_EQ(s->pairs().front(), (VarPair{0, 1}));
  EXPECT_EQ(s->pairs().back(), (VarPair{2, 3}));
  EXPECT_EQ(s->pair_slot(VarPair::canonical(3, 1)), s->pair_slot(VarPair{1, 3}));
  EXPECT_THROW(s->pair_slot(VarPair{0, 9}), Error);
}

TEST(Schema, HashIsStableAndSensitiveToLabels) {
  auto a = binary_schema(2), b = binary_schema(2);
  EXPECT_EQ(a->hash(), b->hash());
  auto c = std::make_shared<const FeatureSchema>(
      std::vector<Variable>{{"x0", {"0", "1"}}, {"x1", {"0", "2"}}}, 0, Variable{"t", {"0", "1"}});
  EXPECT_NE(a->hash(), c->hash());
}

TEST(Schema, JsonRoundTrip) {
  auto s = fstest::mixed_schema({2, 3, 4}, 2);
  EXPECT_EQ(*schema_from_json(schema_to_json(*s)), *s);
}

TEST(ComputeTables, CountsFourRows) {
  auto s = binary_schema(2);
  ClientDataset d{"a", s, {{0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 1}}};
  const auto b = compute_tables(d);
  const auto& t = table_for(b, *s, {0, 1});
  EXPECT_EQ(std::vector<double>(t.cells().begin(), t.cells().end()),
            (std::vector<double>{1, 1, 1, 1}));
  EXPECT_TRUE(b.exact());
  EXPECT_EQ(b.schema_hash, s->hash());
}

TEST(ComputeTables, EmptyDatasetGivesZeroTables) {
  auto s = binary_schema(2);
  const auto b = compute_tables(ClientDataset{"e", s, {}});
  ASSERT_EQ(b.tables.size(), 3u);
  for (const auto& t : b.tables) EXPECT_EQ(t.total(), 0.0);
}

TEST(ComputeTables, ThreeFeaturesGiveSixTables) {
  EXPECT_EQ(compute_tables(ClientDataset{"e", binary_schema(3), {}}).tables.size(), 6u);
}

TEST(ComputeTables, RejectsOutOfDomainRow) {
  auto s = binary_schema(2);
  ClientDataset d{"a", s, {{0, 2, 0}}};
  try {
    compute_tables(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::schema_violation);
  }
}

TEST(ComputeTables, CountConservationAndMarginalConsistency) {
  auto s = fstest::mixed_schema({2, 3, 4}, 3);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto d = fstest::random_dataset(s, 50 + seed * 13, seed);
    const auto b = compute_tables(d);
    for (const auto& t : b.tables) EXPECT_EQ(t.total(), static_cast<double>(d.size()));
    // X-marginal of variable 0 agrees across every table that contains it.
    std::vector<double> reference;
    for (const auto& t : b.tables) {
      if (t.pair().first != 0) continue;
      std::vector<double> m(t.rows(), 0.0);
      for (std::size_t x = 0; x < t.rows(); ++x)
        for (std::size_t y = 0; y < t.cols(); ++y) m[x] += t.at(x, y);
      if (reference.empty()) reference = m;
      EXPECT_EQ(m, reference);
    }
  }
}

TEST(Binning, IntervalAndClamp) {
  const std::vector<double> edges{0, 25, 50, 100};
  EXPECT_EQ(bin_index(edges, 37), 1u);
  EXPECT_EQ(bin_index(edges, 150), 2u);
  EXPECT_EQ(bin_index(edges, -4), 0u);
  EXPECT_EQ(bin_index(edges, 25), 1u);
}

TEST(Csv, CategoricalLookupAndBinning) {
  auto s = std::make_shared<const FeatureSchema>(
      std::vector<Variable>{{"state", {"AK", "CA", "CT"}}, {"age", {"0", "25", "50"}}}, 0,
      Variable{"y", {"0", "1"}});
  Binning bins;
  bins.edges["age"] = {0, 25, 50, 100};
  std::istringstream in("age,state,y,ignored\n37,CA,1,x\n150, AK ,0,y\n");
  const auto d = read_csv(in, "c1", s, bins);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.rows[0], (Row{1, 1, 1}));
  EXPECT_EQ(d.rows[1], (Row{0, 2, 0}));
}

TEST(Csv, ErrorsNameTheLine) {
  auto s = binary_schema(1);
  std::istringstream bad_label("x0,t\n0,1\n2,0\n");
  try {
    read_csv(bad_label, "c", s, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::istringstream missing("x0\n0\n");
  EXPECT_THROW(read_csv(missing, "c", s, {}), Error);
}

TEST(Csv, ExportReingestIsIdempotent) {
  auto s = std::make_shared<const FeatureSchema>(
      std::vector<Variable>{{"a", {"p", "q", "r"}}, {"b", {"lo", "mid", "hi"}}}, 0,
      Variable{"y", {"0", "1"}});
  Binning bins;
  bins.edges["b"] = {0.0, 1.5, 10.0, 20.0};
  const auto d = fstest::random_dataset(s, 300, 9);
  std::stringstream buf;
  write_csv(buf, d, bins);
  const auto again = read_csv(buf, d.client_id, s, bins);
  EXPECT_EQ(again.rows, d.rows);
  EXPECT_EQ(compute_tables(again), compute_tables(d));
}

TEST(Bundle, JsonRoundTrip) {
  auto s = fstest::mixed_schema({2, 3}, 2);
  const auto b = compute_tables(fstest::random_dataset(s, 40, 3));
  EXPECT_EQ(bundle_from_json(bundle_to_json(b)), b);
}

TEST(Synth, IndependentCouplingsGiveNearZeroMi) {
  auto s = fstest::mixed_schema({2, 3}, 2);
  SynthSpec spec{s, {SynthClientSpec{"a", 100000, {}, {}}}};
  const auto d = synth_clients(spec, 5).front();
  const auto b = compute_tables(d);
  for (const auto& t : b.tables) EXPECT_LT(mi_from_counts(t), 0.001);
}

TEST(Synth, CopyCouplingGivesEntropy) {
  auto s = binary_schema(2);
  SynthClientSpec cs{"a", 20000, {{"x0", {0.3, 0.7}}}, {{"x0", "t", 1.0}}};
  const auto d = synth_clients(SynthSpec{s, {cs}}, 5).front();
  const auto b = compute_tables(d);
  const auto& st = table_for(b, *s, {0, 2});
  std::vector<double> marg{st.at(0, 0) + st.at(0, 1), st.at(1, 0) + st.at(1, 1)};
  EXPECT_NEAR(mi_from_counts(st), entropy_bits(marg), 1e-12);
  EXPECT_NEAR(entropy_bits(marg), 0.8813, 0.01);
}

TEST(Synth, SameSeedSameData) {
  const auto spec = planted_bias_spec({}, 11);
  EXPECT_EQ(synth_clients(spec, 3)[4].rows, synth_clients(spec, 3)[4].rows);
  EXPECT_NE(synth_clients(spec, 3)[4].rows, synth_clients(spec, 4)[4].rows);
}

TEST(Synth, PlantedPoolHasBiasedAndUnbiasedClients) {
  PlantedBiasOptions o;
  o.rows_per_client = 4000;
  const auto spec = planted_bias_spec(o, 2);
  const auto clients = synth_clients(spec, 2);
  std::size_t biased = 0;
  for (const auto& c : clients) {
    const auto b = compute_tables(c);
    const auto& t = table_for(b, *spec.schema, {0, spec.schema->target_index()});
    if (mi_from_counts(t) > 0.01) ++biased;
  }
  EXPECT_EQ(biased, 10u);
}

TEST(Synth, HoldoutDrawsFromEveryClientGenerator) {
  const auto spec = planted_bias_spec({}, 2);
  const auto h = pooled_holdout(spec, 1000, 7);
  EXPECT_EQ(h.size(), 1000u);
  EXPECT_EQ(h.client_id, "holdout");
  EXPECT_EQ(pooled_holdout(spec, 1000, 7).rows, h.rows);
}

TEST(Common, DeriveSeedSeparatesLabelsAndIndices) {
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(1, std::uint64_t{1}));
  EXPECT_EQ(derive_seed(5, "x"), derive_seed(5, "x"));
}

TEST(Common, ParallelForVisitsEachIndexOnce) {
  set_thread_count(4);
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  set_thread_count(1);
  for (int h : hits) EXPECT_EQ(h, 1);
}
