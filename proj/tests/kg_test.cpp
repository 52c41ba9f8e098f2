#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "eatk/embedding.hpp"
#include "eatk/kg.hpp"
#include "eatk/synthetic.hpp"
#include "test_util.hpp"

using namespace eatk;
using testutil::TempDir;
using testutil::write_file;

namespace {

KnowledgeGraph load_text(const TempDir& dir, const std::string& rel, const std::string& attr = "") {
  write_file(dir / "rel", rel);
  write_file(dir / "attr", attr);
  return load_kg(dir / "rel", dir / "attr");
}

}  // namespace

TEST(LoadKg, EmptyFilesGiveEmptyGraph) {
  TempDir dir;
  const auto kg = load_text(dir, "");
  const auto s = dataset_stats(kg);
  EXPECT_EQ(s.entity_count, 0u);
  EXPECT_EQ(s.relation_count, 0u);
  EXPECT_EQ(s.attribute_count, 0u);
  EXPECT_EQ(s.rel_triple_count, 0u);
  EXPECT_EQ(s.attr_triple_count, 0u);
  EXPECT_TRUE(s.degree_histogram.empty());
}

TEST(LoadKg, DuplicateTripleDropped) {
  TempDir dir;
  const auto kg = load_text(dir, "a\tr\tb\nb\tr\tc\na\tr\tb\nc\ts\ta\nd\tr\ta\n");
  EXPECT_EQ(kg.rel_triples.size(), 4u);
  EXPECT_EQ(kg.entities.size(), 4u);
  // first-occurrence id order
  EXPECT_EQ(kg.entities.at("a"), 0);
  EXPECT_EQ(kg.entities.at("b"), 1);
  EXPECT_EQ(kg.entities.at("c"), 2);
  EXPECT_EQ(kg.entities.at("d"), 3);
  EXPECT_EQ(kg.relations.at("s"), 1);
}

TEST(LoadKg, MalformedLineReportsLineNumber) {
  TempDir dir;
  try {
    load_text(dir, "a\tr\tb\nb\tr\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(LoadKg, MissingFileIsDataError) {
  TempDir dir;
  EXPECT_THROW(load_kg(dir / "nope", dir / "nope2"), DataError);
}

TEST(LoadKg, AttributeTriplesInterned) {
  TempDir dir;
  const auto kg = load_text(dir, "a\tr\tb\n", "a\tname\t\"Alpha\"\nc\tname\t\"Gamma\"\na\tname\t\"Alpha\"\n");
  EXPECT_EQ(kg.attr_triples.size(), 2u);
  EXPECT_EQ(kg.attributes.size(), 1u);
  EXPECT_EQ(kg.values.size(), 2u);
  EXPECT_EQ(kg.entities.size(), 3u);
}

TEST(Degree, HandCounts) {
  TempDir dir;
  const auto kg = load_text(dir, "e\tr\tx\ny\tr\te\nz\tr\tz\n", "w\ta\tv\n");
  EXPECT_EQ(degree(kg, kg.entities.at("e")), 2u);
  EXPECT_EQ(degree(kg, kg.entities.at("z")), 2u);  // self-loop: head and tail
  EXPECT_EQ(degree(kg, kg.entities.at("w")), 0u);  // attribute-only entity
  EXPECT_THROW(degree(kg, 99), LookupError);
}

TEST(Degree, SumIsTwiceTripleCount) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TwinSpec spec;
    spec.entities = 60;
    spec.extra_triples = 150;
    spec.seed = seed;
    const auto ds = make_twin_dataset(spec);
    const auto deg = degrees(ds.kg1);
    std::size_t sum = 0;
    for (EntityId e = 0; e < static_cast<EntityId>(ds.kg1.entity_count()); ++e) {
      EXPECT_EQ(deg[static_cast<std::size_t>(e)], degree(ds.kg1, e));
      sum += deg[static_cast<std::size_t>(e)];
    }
    EXPECT_EQ(sum, 2 * ds.kg1.rel_triples.size());
  }
}

TEST(DatasetStats, ChainHistogram) {
  TempDir dir;
  const auto kg = load_text(dir, "a\tr\tb\nb\tr\tc\n");
  const auto s = dataset_stats(kg);
  const std::map<std::size_t, std::size_t> expected{{1, 2}, {2, 1}};
  EXPECT_EQ(s.degree_histogram, expected);
  const auto j = to_json(s);
  EXPECT_EQ(j["degree_histogram"]["1"], 2);
  EXPECT_EQ(j["rel_triple_count"], 2);
}

TEST(SplitSeeds, DefaultRatioSizes) {
  std::vector<EntityPair> pairs;
  for (EntityId i = 0; i < 15000; ++i) pairs.push_back({i, i});
  const auto s = split_seeds(pairs, {0.2, 0.1, 0.7}, 3);
  EXPECT_EQ(s.train().size(), 3000u);
  EXPECT_EQ(s.valid().size(), 1500u);
  EXPECT_EQ(s.test().size(), 10500u);
}

TEST(SplitSeeds, AllTrain) {
  std::vector<EntityPair> pairs{{0, 0}, {1, 1}, {2, 2}};
  const auto s = split_seeds(pairs, {1.0, 0.0, 0.0}, 0);
  EXPECT_EQ(s.train().size(), 3u);
  EXPECT_TRUE(s.valid().empty());
  EXPECT_TRUE(s.test().empty());
}

TEST(SplitSeeds, DeterministicPartition) {
  std::vector<EntityPair> pairs;
  for (EntityId i = 0; i < 97; ++i) pairs.push_back({i, 96 - i});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = split_seeds(pairs, {0.3, 0.2, 0.5}, seed);
    const auto b = split_seeds(pairs, {0.3, 0.2, 0.5}, seed);
    EXPECT_EQ(a.pairs, b.pairs);
    EXPECT_EQ(a.tags, b.tags);

    // partition: disjoint and covering
    std::multiset<EntityPair> all;
    for (auto tag : {SplitTag::train, SplitTag::valid, SplitTag::test}) {
      for (const auto& p : a.with_tag(tag)) all.insert(p);
    }
    EXPECT_EQ(all, std::multiset<EntityPair>(pairs.begin(), pairs.end()));
    // sizes within one pair of the ratios
    EXPECT_LE(std::abs(static_cast<double>(a.train().size()) - 0.3 * 97), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(a.valid().size()) - 0.2 * 97), 1.0);
  }
}

TEST(SplitSeeds, BadRatiosAreConfigErrors) {
  std::vector<EntityPair> pairs{{0, 0}};
  EXPECT_THROW(split_seeds(pairs, {0.5, 0.1, 0.1}, 0), ConfigError);
  EXPECT_THROW(split_seeds({}, {0.2, 0.1, 0.7}, 0), ConfigError);
}

TEST(Links, OneToOneEnforced) {
  TempDir dir;
  write_file(dir / "rel_triples_1", "a\tr\tb\n");
  write_file(dir / "rel_triples_2", "A\tr\tB\n");
  write_file(dir / "attr_triples_1", "");
  write_file(dir / "attr_triples_2", "");
  write_file(dir / "ent_links", "a\tA\nb\tA\n");
  EXPECT_THROW(load_dataset(dir.path()), DataError);
}

TEST(Links, LinkOnlyEntitiesAreInternedLast) {
  TempDir dir;
  write_file(dir / "rel_triples_1", "a\tr\tb\n");
  write_file(dir / "rel_triples_2", "A\tr\tB\n");
  write_file(dir / "attr_triples_1", "");
  write_file(dir / "attr_triples_2", "");
  write_file(dir / "ent_links", "a\tA\nz\tZ\n");
  const auto ds = load_dataset(dir.path());
  EXPECT_EQ(ds.kg1.entities.at("z"), 2);
  EXPECT_EQ(degree(ds.kg1, 2), 0u);
  ASSERT_EQ(ds.links.size(), 2u);
  EXPECT_EQ(ds.links[1], (EntityPair{2, 2}));
}

TEST(RoundTrip, WriteThenLoadIsIdentical) {
  TwinSpec spec;
  spec.entities = 40;
  spec.extra_triples = 80;
  const auto ds = make_twin_dataset(spec);
  TempDir dir;
  write_dataset(dir.path(), ds);
  const auto back = load_dataset(dir.path());
  EXPECT_EQ(back.kg1, ds.kg1);
  EXPECT_EQ(back.kg2, ds.kg2);
  EXPECT_EQ(back.links, ds.links);
}

TEST(Vocabulary, Bijection) {
  Vocabulary v;
  EXPECT_EQ(v.intern("x"), 0);
  EXPECT_EQ(v.intern("y"), 1);
  EXPECT_EQ(v.intern("x"), 0);
  EXPECT_EQ(v.name(1), "y");
  EXPECT_FALSE(v.find("z").has_value());
  EXPECT_THROW(v.at("z"), LookupError);
  EXPECT_THROW(v.name(5), LookupError);
}

TEST(VectorsTsv, RoundTripAndErrors) {
  TempDir dir;
  Matrix m(2, 3);
  m << 0.1, -2.5, 1e-17, 3, 0.3333333333333333, -0.0;
  write_vectors_tsv(dir / "v.tsv", {"a", "b"}, m);
  const auto back = read_vectors_tsv(dir / "v.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.dim(), 3);
  EXPECT_EQ(back.vectors, m);  // shortest round-trip formatting is exact
  EXPECT_EQ(back.row_of("b"), 1);

  write_file(dir / "empty.tsv", "");
  EXPECT_EQ(read_vectors_tsv(dir / "empty.tsv").size(), 0u);

  write_file(dir / "ragged.tsv", "a\t1 2\nb\t1 2 3\n");
  try {
    read_vectors_tsv(dir / "ragged.tsv");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(gather_rows(back, {"a", "missing"}), LookupError);
}
