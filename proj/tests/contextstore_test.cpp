#include <gtest/gtest.h>

#include <sstream>

#include "json.hpp"
#include "kgv/contextstore.hpp"
#include "kgv/error.hpp"
#include "support.hpp"

namespace kgv {
namespace {

TripletStore sample_store(const HashingEmbedder& e) {
  return make_store(extract_document("Alpha includes chat. Beta includes email. Alpha is a suite."), e);
}

TEST(Assemble, JoinsRagResultsAndBuildsGraph) {
  HashingEmbedder e;
  AssembleOptions o;
  o.id = "q1";
  auto b = assemble("What does Alpha include?", {"Alpha includes chat.", "Beta includes email."}, nullptr, e, o);
  EXPECT_EQ(b.rag_context, "Alpha includes chat.\nBeta includes email.");
  EXPECT_EQ(b.guided_context, b.rag_context);
  EXPECT_EQ(b.graph.node_count(), 4u);
  ASSERT_TRUE(b.index);
  EXPECT_EQ(b.index->size(), 4u);
  EXPECT_EQ(b.id, "q1");
}

TEST(Assemble, StoreOnlyAndCombined) {
  HashingEmbedder e;
  TripletStore store = sample_store(e);
  auto only = assemble("p", {}, &store, e);
  EXPECT_EQ(only.rag_context, "");
  EXPECT_EQ(only.graph.node_count(), store.index.size());
  EXPECT_EQ(only.store_triplets.size(), 3u);
  auto both = assemble("p", {"Gamma includes video."}, &store, e);
  EXPECT_EQ(both.graph.node_count(), store.index.size() + 2);
  EXPECT_TRUE(both.index->contains("gamma"));
  EXPECT_TRUE(both.index->contains("alpha"));
}

TEST(Assemble, NoGroundingSource) {
  HashingEmbedder e;
  try {
    assemble("p", {}, nullptr, e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_NE(std::string(err.what()).find("no grounding source"), std::string::npos);
  }
}

TEST(Splitmix64, KnownFirstOutput) {
  std::uint64_t s = 0;
  EXPECT_EQ(splitmix64(s), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(s, 0x9e3779b97f4a7c15ULL);
}

TEST(SelectDistractors, FrozenSelections) {
  // Frozen from an independent partial Fisher-Yates over splitmix64.
  EXPECT_EQ(select_distractors(5, 2, 2), (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(select_distractors(5, 5, 2), (std::vector<std::size_t>{0, 3, 2, 1, 4}));
  EXPECT_EQ(select_distractors(10, 3, 7), (std::vector<std::size_t>{7, 0, 4}));
  EXPECT_TRUE(select_distractors(3, 0, 1).empty());
  EXPECT_THROW(select_distractors(2, 3, 1), Error);
}

TEST(Augment, DeterministicAppend) {
  HashingEmbedder e;
  std::vector<std::string> pool = {"P0 includes a.", "P1 includes b.", "P2 includes c.", "P3 includes d.",
                                   "P4 includes e."};
  auto base = assemble("p", {"Alpha includes chat."}, nullptr, e);
  auto a = augment(base, pool, 2, 2, e);
  EXPECT_EQ(a.guided_context, "Alpha includes chat.\nP0 includes a.\nP3 includes d.");
  EXPECT_EQ(a.rag_context, base.rag_context);
  EXPECT_EQ(a.graph.node_count(), 6u);
  EXPECT_TRUE(a.index->contains("p3"));
  EXPECT_EQ(augment(base, pool, 2, 2, e).guided_context, a.guided_context);
  EXPECT_EQ(augment(base, pool, 0, 2, e).guided_context, base.rag_context);
}

TEST(Augment, PricingDistractorsKeepGraphSeparate) {
  HashingEmbedder e;
  auto base = assemble("How much is Business Basic?",
                       {"Microsoft 365 Business Basic is $7.2 dollars per user per month."}, nullptr, e);
  auto a = augment(base, {"Microsoft 365 Business Standard is $15 dollars per user per month."}, 1, 9, e);
  EXPECT_TRUE(a.index->contains("microsoft 365 business basic"));
  EXPECT_TRUE(a.index->contains("microsoft 365 business standard"));
  EXPECT_EQ(a.graph.component_count(), 2u);
}

TEST(Store, RoundTrip) {
  HashingEmbedder e;
  for (const TripletStore& store : {make_store({}, e), sample_store(e)}) {
    std::stringstream buf;
    save_store(store, buf);
    EXPECT_EQ(buf.str().substr(0, 4), "KTST");
    TripletStore back = load_store(buf);
    EXPECT_EQ(back, store);
  }
}

TEST(Store, CorruptionReportsOffset) {
  HashingEmbedder e;
  std::stringstream buf;
  save_store(sample_store(e), buf);
  const std::string good = buf.str();

  std::string magic = good;
  magic[1] = 'X';
  std::stringstream s1(magic);
  try {
    load_store(s1);
    FAIL();
  } catch (const FormatError& err) {
    EXPECT_EQ(err.offset(), 0u);
  }

  std::string version = good;
  version[4] = 2;
  std::stringstream s2(version);
  try {
    load_store(s2);
    FAIL();
  } catch (const FormatError& err) {
    EXPECT_EQ(err.offset(), 4u);
  }

  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, good.size() / 2, good.size() - 1}) {
    std::stringstream s(good.substr(0, cut));
    EXPECT_THROW(load_store(s), FormatError) << cut;
  }
}

TEST(Store, MissingFile) { EXPECT_THROW(load_store(std::filesystem::path("/nonexistent/store.kgv")), Error); }

TEST(ExportBundle, OneLineWithFourFields) {
  HashingEmbedder e;
  AssembleOptions o;
  o.id = "x";
  auto b = assemble("say \"hi\"", {"Alpha includes chat."}, nullptr, e, o);
  std::string line = export_bundle(b);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.size(), 4u);
  EXPECT_EQ(j["id"], "x");
  EXPECT_EQ(j["prompt"], "say \"hi\"");
  EXPECT_EQ(j["guided_context"], "Alpha includes chat.");
}

}  // namespace
}  // namespace kgv
