#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <numeric>
#include <random>

#include "eatk/matcher.hpp"
#include "eatk/synthetic.hpp"

using namespace eatk;

namespace {

SimilarityMatrix sim_of(std::initializer_list<std::initializer_list<double>> rows) {
  SimilarityMatrix s;
  s.metric = Metric::cosine;
  s.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) s.values(i, j++) = v;
    ++i;
  }
  return s;
}

std::vector<GoldCell> diagonal(Eigen::Index n) {
  std::vector<GoldCell> g;
  for (Eigen::Index i = 0; i < n; ++i) g.push_back({i, i});
  return g;
}

// Row 0 ranks gold at 1, row 1 at 2, row 2 at 4.
SimilarityMatrix ranks_124() {
  return sim_of({{0.9, 0.1, 0.2, 0.3, 0.0},
                 {0.8, 0.7, 0.1, 0.2, 0.0},
                 {0.9, 0.8, 0.5, 0.7, 0.1}});
}

}  // namespace

TEST(SimilarityMatrix, CosineExamples) {
  Matrix a(1, 2), b(1, 2);
  a << 3, 4;
  b << 3, 4;
  EXPECT_NEAR(similarity_matrix(a, b, Metric::cosine).values(0, 0), 1.0, 1e-12);

  Matrix u(2, 2), v(2, 2);
  u << 1, 0, 0, 1;
  v << 1, 0, 0, 1;
  const auto s = similarity_matrix(u, v, Metric::cosine);
  EXPECT_DOUBLE_EQ(s.values(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(s.values(1, 0), 0.0);
}

TEST(SimilarityMatrix, HandDotProductsAndDistances) {
  Matrix a(2, 2), b(2, 2);
  a << 1, 2, 0, 1;
  b << 2, 0, 1, 1;
  const auto cos = similarity_matrix(a, b, Metric::cosine);
  EXPECT_NEAR(cos.values(0, 0), 2.0 / (std::sqrt(5.0) * 2.0), 1e-12);
  EXPECT_NEAR(cos.values(0, 1), 3.0 / (std::sqrt(5.0) * std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(cos.values(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(cos.values(1, 1), 1.0 / std::sqrt(2.0), 1e-12);
  const auto l1 = similarity_matrix(a, b, Metric::neg_l1);
  EXPECT_DOUBLE_EQ(l1.values(0, 0), -3.0);
  EXPECT_DOUBLE_EQ(l1.values(1, 1), -1.0);
  const auto l2 = similarity_matrix(a, b, Metric::neg_l2);
  EXPECT_NEAR(l2.values(0, 0), -std::sqrt(5.0), 1e-12);
}

TEST(SimilarityMatrix, DimensionMismatch) {
  EXPECT_THROW(similarity_matrix(Matrix::Ones(2, 3), Matrix::Ones(2, 4), Metric::cosine), ShapeError);
}

TEST(SimilarityMatrix, ThreadCountDoesNotChangeValues) {
  Rng rng(5);
  const Matrix a = uniform_init(37, 8, rng), b = uniform_init(29, 8, rng);
  EXPECT_EQ(similarity_matrix(a, b, Metric::cosine, 1).values, similarity_matrix(a, b, Metric::cosine, 4).values);
}

TEST(Csls, SingleEntryCancels) {
  EXPECT_DOUBLE_EQ(csls_rescale(sim_of({{0.37}}), 1).values(0, 0), 0.0);
}

TEST(Csls, HandFixture) {
  const auto c = csls_rescale(sim_of({{0.9, 0.1}, {0.2, 0.8}}), 1);
  EXPECT_NEAR(c.values(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(c.values(0, 1), -1.5, 1e-12);
  EXPECT_EQ(align_top1(c).top1, (std::vector<std::int64_t>{0, 1}));
  EXPECT_EQ(c.metric, Metric::csls);
}

TEST(Csls, ConstantShiftKeepsRowDifferences) {
  Rng rng(9);
  SimilarityMatrix s;
  s.values = uniform_init(6, 5, rng);
  auto shifted = s;
  shifted.values.array() += 0.37;
  const auto a = csls_rescale(s, 2), b = csls_rescale(shifted, 2);
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index j = 1; j < 5; ++j) {
      EXPECT_NEAR(a.values(i, j) - a.values(i, 0), b.values(i, j) - b.values(i, 0), 1e-12);
    }
  }
}

TEST(Csls, ConstantRowsStayConstant) {
  const auto s = sim_of({{0.5, 0.5, 0.5}, {0.1, 0.1, 0.1}, {0.9, 0.9, 0.9}});
  const auto c = csls_rescale(s, 3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(c.values(i, 1), c.values(i, 0), 1e-12);
    EXPECT_NEAR(c.values(i, 2), c.values(i, 0), 1e-12);
  }
}

TEST(Csls, KOutOfRange) {
  EXPECT_THROW(csls_rescale(sim_of({{1, 2}}), 0), ConfigError);
  EXPECT_THROW(csls_rescale(sim_of({{1, 2}}), 2), ConfigError);
}

TEST(AlignTop1, DiagonalDominant) {
  const auto r = align_top1(sim_of({{0.9, 0.1, 0.0}, {0.2, 0.8, 0.1}, {0.0, 0.3, 0.7}}));
  EXPECT_EQ(r.top1, (std::vector<std::int64_t>{0, 1, 2}));
}

TEST(AlignTop1, TiesGoToLowestId) {
  const auto r = align_top1(sim_of({{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}}));
  EXPECT_EQ(r.top1, (std::vector<std::int64_t>{0, 0}));
}

TEST(AlignTop1, GreedyInjectiveAgainstEnumeration) {
  // Row argmax maps rows 0 and 1 both to column 0; greedy takes (1,0) = 0.95 first.
  const auto s = sim_of({{0.9, 0.8, 0.1}, {0.95, 0.2, 0.3}, {0.4, 0.6, 0.5}});
  EXPECT_EQ(align_top1(s, false).top1, (std::vector<std::int64_t>{0, 0, 1}));
  const auto inj = align_top1(s, true).top1;

  // Brute force: walk all 3! assignments and replay the greedy rule, taking
  // the assignment whose entries are picked in descending order.
  std::array<int, 3> perm{0, 1, 2};
  std::vector<std::int64_t> expected;
  do {
    // An assignment is the greedy one iff every chosen entry is the maximum of
    // the submatrix left after removing previously chosen (larger) entries.
    std::vector<std::pair<double, int>> chosen;
    for (int i = 0; i < 3; ++i) chosen.push_back({s.values(i, perm[static_cast<std::size_t>(i)]), i});
    std::sort(chosen.rbegin(), chosen.rend());
    std::array<bool, 3> row_used{}, col_used{};
    bool greedy = true;
    for (const auto& [v, i] : chosen) {
      double best = -1e9;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          if (!row_used[static_cast<std::size_t>(r)] && !col_used[static_cast<std::size_t>(c)]) {
            best = std::max(best, s.values(r, c));
          }
        }
      }
      if (v != best) greedy = false;
      row_used[static_cast<std::size_t>(i)] = true;
      col_used[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = true;
    }
    if (greedy) expected.assign(perm.begin(), perm.end());
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(inj, expected);
  EXPECT_NE(inj, align_top1(s, false).top1);
}

TEST(AlignTop1, InjectiveIsOneToOne) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index rows = 1 + static_cast<Eigen::Index>(gen() % 12);
    const Eigen::Index cols = 1 + static_cast<Eigen::Index>(gen() % 12);
    SimilarityMatrix s;
    s.values.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) s.values(i, j) = std::round(u(gen) * 4) / 4;  // many ties
    }
    const auto r = align_top1(s, true);
    std::set<std::int64_t> used;
    std::size_t assigned = 0;
    for (auto t : r.top1) {
      if (t == kUnassigned) continue;
      ++assigned;
      EXPECT_TRUE(used.insert(t).second);
    }
    EXPECT_EQ(assigned, static_cast<std::size_t>(std::min(rows, cols)));
  }
}

TEST(HitsAndMrr, RanksOneTwoFour) {
  const auto s = ranks_124();
  const auto gold = std::vector<GoldCell>{{0, 0}, {1, 1}, {2, 2}};
  EXPECT_EQ(gold_ranks(s, gold), (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_NEAR(hits_at_k(s, gold, 1), 100.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(hits_at_k(s, gold, 5), 100.0);
  EXPECT_NEAR(mrr(s, gold), (1 + 0.5 + 0.25) / 3, 1e-12);
}

TEST(HitsAndMrr, PerfectAndWorst) {
  Matrix e = Matrix::Identity(4, 4);
  const auto s = similarity_matrix(e, e, Metric::cosine);
  for (std::size_t k : {1, 5, 10}) EXPECT_DOUBLE_EQ(hits_at_k(s, diagonal(4), k), 100.0);
  EXPECT_DOUBLE_EQ(mrr(s, diagonal(4)), 1.0);

  // gold is always the smallest entry of its row
  const auto w = sim_of({{0.0, 1.0, 2.0}, {3.0, 0.0, 2.0}, {1.0, 2.0, 0.0}});
  EXPECT_DOUBLE_EQ(mrr(w, diagonal(3)), 1.0 / 3.0);
}

TEST(HitsAndMrr, MissingGoldRowIsEvaluationError) {
  EXPECT_THROW(hits_at_k(ranks_124(), {{7, 0}}, 1), EvaluationError);
}

TEST(HitsAndMrr, MonotoneInKAndBounded) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(gen() % 20);
    SimilarityMatrix s;
    s.values.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) s.values(i, j) = u(gen);
    }
    const auto g = diagonal(n);
    double prev = 0;
    for (std::size_t k = 1; k <= static_cast<std::size_t>(n); ++k) {
      const double h = hits_at_k(s, g, k);
      EXPECT_GE(h, prev);
      prev = h;
    }
    EXPECT_DOUBLE_EQ(prev, 100.0);
    const double m = mrr(s, g), h1 = hits_at_k(s, g, 1) / 100.0;
    EXPECT_GE(m, h1);
    EXPECT_LE(m, h1 + (1 - h1) * 0.5 + 1e-12);  // a miss contributes at most 1/2
  }
}

TEST(HScore, ClosedForms) {
  AlignmentResult bij;
  for (std::int64_t i = 0; i < 10; ++i) bij.top1.push_back(i);
  EXPECT_DOUBLE_EQ(h_score(bij, 10), 0.1);

  AlignmentResult one;
  one.top1.assign(10, 4);
  EXPECT_DOUBLE_EQ(h_score(one, 10), 1.0);

  AlignmentResult fixture;
  fixture.top1 = {0, 0, 0, 1, 1, 1, 2, 2, 3, 4};  // counts (3,3,2,1,1,0,...)
  EXPECT_DOUBLE_EQ(h_score(fixture, 10), 0.3);
}

TEST(HScore, MatchesDirectCountingOnRandomMappings) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + gen() % 50;
    AlignmentResult r;
    for (std::size_t i = 0; i < n; ++i) r.top1.push_back(static_cast<std::int64_t>(gen() % n));
    // Oracle: count per target, repeatedly remove the current maximum.
    std::map<std::int64_t, int> counts;
    for (auto t : r.top1) counts[t]++;
    std::vector<int> values;
    for (std::size_t z = 0; z < n; ++z) values.push_back(counts.count(static_cast<std::int64_t>(z)) ? counts[static_cast<std::int64_t>(z)] : 0);
    const std::size_t hubs = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n) - 1e-12));
    double expected = 0;
    for (std::size_t h = 0; h < hubs; ++h) {
      auto it = std::max_element(values.begin(), values.end());
      expected += static_cast<double>(*it) / static_cast<double>(n);
      *it = -1;
    }
    EXPECT_NEAR(h_score(r, n), expected, 1e-9) << "n=" << n;
  }
}

TEST(HScore, BijectiveIsTenthWhenDivisible) {
  for (std::size_t n : {10u, 20u, 50u, 100u}) {
    AlignmentResult r;
    for (std::size_t i = 0; i < n; ++i) r.top1.push_back(static_cast<std::int64_t>((i * 7) % n));
    if (std::gcd(n, 7u) == 1) {
      EXPECT_NEAR(h_score(r, n), 0.1, 1e-15);
    }
  }
}

TEST(Buckets, LabelsAndDefaultEdges) {
  const auto t = make_buckets(default_degree_edges());
  std::vector<std::string> labels;
  for (const auto& b : t) labels.push_back(b.label);
  EXPECT_EQ(labels, (std::vector<std::string>{"<=1", "2", "3", "4..5", "6..10", ">=11"}));
  const auto d = make_buckets(default_degree_diff_edges());
  labels.clear();
  for (const auto& b : d) labels.push_back(b.label);
  EXPECT_EQ(labels, (std::vector<std::string>{"<=-5", "-4..-2", "-1..1", "2..4", ">=5"}));
  EXPECT_THROW(make_buckets({3, 1}), ConfigError);
}

TEST(Buckets, DegreeReportHandTabulation) {
  // source degrees: s0 = 1, s1 = 1, s2 = 5
  KnowledgeGraph kg;
  for (const char* n : {"s0", "s1", "s2", "x1", "x2", "x3", "x4", "x5", "y0", "y1"}) kg.entities.intern(n);
  const auto r = kg.relations.intern("r");
  kg.rel_triples = {{0, r, 8}, {1, r, 9}, {2, r, 3}, {2, r, 4}, {2, r, 5}, {2, r, 6}, {2, r, 7}};
  AlignmentResult res;
  res.top1 = {0, 0, 2};  // row 0 correct, row 1 wrong, row 2 correct
  const auto gold = diagonal(3);
  const auto table = degree_bucket_report(res, gold, kg, {0, 1, 2}, {3});
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table[0].support, 2u);
  EXPECT_DOUBLE_EQ(*table[0].hits1(), 50.0);
  EXPECT_EQ(table[1].support, 1u);
  EXPECT_DOUBLE_EQ(*table[1].hits1(), 100.0);
}

TEST(Buckets, DegreeDiffHandSubtraction) {
  KnowledgeGraph kg1, kg2;
  for (const char* n : {"a", "b", "c"}) kg1.entities.intern(n);
  for (const char* n : {"A", "B", "C", "D", "E", "F"}) kg2.entities.intern(n);
  const auto r1 = kg1.relations.intern("r");
  const auto r2 = kg2.relations.intern("r");
  kg1.rel_triples = {{0, r1, 1}, {0, r1, 2}};                                  // deg(a) = 2
  kg2.rel_triples = {{0, r2, 1}, {0, r2, 2}, {0, r2, 3}, {0, r2, 4}, {0, r2, 5}};  // deg(A) = 5
  AlignmentResult res;
  res.top1 = {0};
  const auto table = degree_diff_report(res, {{0, 0}}, kg1, kg2, {0}, {0});
  for (const auto& b : table) {
    EXPECT_EQ(b.support, b.label == "-4..-2" ? 1u : 0u) << b.label;
  }
  EXPECT_FALSE(table[0].hits1().has_value());  // empty bucket: undefined marker
}

TEST(Buckets, TwinDatasetIsAllDeltaZero) {
  const auto ds = make_twin_dataset(TwinSpec{});
  std::vector<EntityId> rows, cols;
  std::vector<GoldCell> gold;
  AlignmentResult res;
  for (std::size_t i = 0; i < ds.links.size(); ++i) {
    rows.push_back(ds.links[i].source);
    cols.push_back(ds.links[i].target);
    gold.push_back({static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)});
    res.top1.push_back(static_cast<std::int64_t>(i));
  }
  const auto table = degree_diff_report(res, gold, ds.kg1, ds.kg2, rows, cols, {-1, 0});
  ASSERT_EQ(table[1].label, "0");
  EXPECT_EQ(table[1].support, ds.links.size());
  const auto deg = degree_bucket_report(res, gold, ds.kg1, rows);
  std::size_t total = 0;
  for (const auto& b : deg) {
    total += b.support;
    if (b.support > 0) {
      EXPECT_DOUBLE_EQ(*b.hits1(), 100.0);
    }
  }
  EXPECT_EQ(total, ds.links.size());
}

TEST(EvalReport, JsonRoundTrip) {
  const auto ds = make_twin_dataset(TwinSpec{});
  std::vector<EntityId> rows, cols;
  Matrix a(20, 3), b(20, 3);
  Rng rng(1);
  a = uniform_init(20, 3, rng);
  b = a + 0.1 * uniform_init(20, 3, rng);
  for (EntityId i = 0; i < 20; ++i) {
    rows.push_back(ds.links[static_cast<std::size_t>(i)].source);
    cols.push_back(ds.links[static_cast<std::size_t>(i)].target);
  }
  const auto r = evaluate(similarity_matrix(a, b, Metric::cosine), diagonal(20), false, ds.kg1, ds.kg2, rows, cols);
  const auto back = eval_report_from_json(to_json(r));
  EXPECT_EQ(back.hits_at, r.hits_at);
  EXPECT_EQ(back.mrr, r.mrr);
  EXPECT_EQ(back.h_score, r.h_score);
  EXPECT_EQ(back.test_size, 20u);
  ASSERT_EQ(back.degree_buckets.size(), r.degree_buckets.size());
  for (std::size_t i = 0; i < r.degree_buckets.size(); ++i) {
    EXPECT_EQ(back.degree_buckets[i].label, r.degree_buckets[i].label);
    EXPECT_EQ(back.degree_buckets[i].support, r.degree_buckets[i].support);
  }
}

TEST(Evaluate, InjectiveHits1UsesAssignment) {
  KnowledgeGraph kg;
  for (const char* n : {"a", "b"}) kg.entities.intern(n);
  // both rows prefer column 0; only one may have it under injective matching
  const auto s = sim_of({{0.9, 0.1}, {0.8, 0.7}});
  const auto plain = evaluate(s, diagonal(2), false, kg, kg, {0, 1}, {0, 1});
  const auto inj = evaluate(s, diagonal(2), true, kg, kg, {0, 1}, {0, 1});
  EXPECT_DOUBLE_EQ(plain.hits_at.at(1), 50.0);
  EXPECT_DOUBLE_EQ(inj.hits_at.at(1), 100.0);
}
