#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "eatk/gcn_align.hpp"
#include "eatk/synthetic.hpp"

using namespace eatk;

namespace {

KnowledgeGraph graph_of(const std::vector<std::array<std::string, 3>>& triples) {
  KnowledgeGraph kg;
  for (const auto& [h, r, t] : triples) {
    const auto hi = kg.entities.intern(h);
    const auto ri = kg.relations.intern(r);
    const auto ti = kg.entities.intern(t);
    kg.rel_triples.push_back({hi, ri, ti});
  }
  return kg;
}

Matrix dense(const SparseMatrix& m) { return Matrix(m); }

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = 2 * uniform_unit(rng) - 1;
  }
  return m;
}

SparseMatrix random_adjacency(Eigen::Index n, Rng& rng) {
  Matrix a = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (uniform_unit(rng) < 0.4) a(i, j) = a(j, i) = uniform_unit(rng);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) a.row(i) /= a.row(i).sum();
  return a.sparseView();
}

}  // namespace

TEST(Adjacency, SingleRelationHasZeroIdf) {
  const auto kg = graph_of({{"a", "r", "b"}, {"b", "r", "c"}, {"c", "r", "a"}});
  const auto adj = build_adjacency(kg, AdjacencyMode::structure);
  EXPECT_TRUE(dense(adj.normalized).isApprox(Matrix::Identity(3, 3)));
}

TEST(Adjacency, IdfWeightsByHand) {
  const auto kg = graph_of({{"a", "r1", "b"}, {"b", "r1", "c"}, {"a", "r2", "c"}});
  const Matrix w = dense(build_adjacency(kg, AdjacencyMode::structure).weights);
  Matrix expected = Matrix::Identity(3, 3);
  expected(0, 1) = expected(1, 0) = std::log(1.5);
  expected(1, 2) = expected(2, 1) = std::log(1.5);
  expected(0, 2) = expected(2, 0) = std::log(3.0);
  EXPECT_TRUE(w.isApprox(expected, 1e-12)) << w;
}

TEST(Adjacency, SymmetrisedByMax) {
  // a -> b via the rare relation, b -> a via the common one
  const auto kg = graph_of({{"a", "rare", "b"}, {"b", "common", "a"}, {"b", "common", "c"}, {"c", "common", "a"}});
  const Matrix w = dense(build_adjacency(kg, AdjacencyMode::structure).weights);
  EXPECT_NEAR(w(0, 1), std::log(4.0), 1e-12);
  EXPECT_NEAR(w(1, 0), std::log(4.0), 1e-12);
}

TEST(Adjacency, SymmetricWithStochasticRows) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ds = make_twin_dataset({.entities = 40, .extra_triples = 120, .seed = seed});
    for (auto mode : {AdjacencyMode::structure, AdjacencyMode::attribute}) {
      const auto adj = build_joint_adjacency(ds.kg1, ds.kg2, mode);
      const Matrix w = dense(adj.weights);
      EXPECT_TRUE(w.isApprox(w.transpose()));
      const Matrix a = dense(adj.normalized);
      for (Eigen::Index r = 0; r < a.rows(); ++r) EXPECT_NEAR(a.row(r).sum(), 1.0, 1e-12);
      // block-diagonal: no edge crosses the two graphs
      EXPECT_EQ(w.topRightCorner(40, 40).cwiseAbs().sum(), 0.0);
      EXPECT_EQ(w.bottomLeftCorner(40, 40).cwiseAbs().sum(), 0.0);
    }
  }
}

TEST(Forward, IdentityAdjacencyAndWeights) {
  Rng rng = derive_rng(1, 0);
  GcnParameters p;
  p.features = random_matrix(5, 4, rng);
  p.w1 = Matrix::Identity(4, 4);
  p.w2 = Matrix::Identity(4, 4);
  const SparseMatrix eye = Matrix(Matrix::Identity(5, 5)).sparseView();
  EXPECT_TRUE(gcn_forward(eye, p).isApprox(Matrix(p.features.cwiseMax(0.0))));
}

TEST(Forward, ThreeNodeHandCase) {
  Matrix a(3, 3);
  a << 0.5, 0.5, 0.0,  //
      0.25, 0.5, 0.25,  //
      0.0, 0.5, 0.5;
  GcnParameters p;
  p.features.resize(3, 2);
  p.features << 1, -1, 2, 0, -3, 1;
  p.w1.resize(2, 2);
  p.w1 << 1, 0, 0, -1;
  p.w2.resize(2, 1);
  p.w2 << 1, 2;
  // AX = [1.5 -0.5; 0.5 0; -0.5 0.5]; AXW1 = [1.5 0.5; 0.5 0; -0.5 -0.5]
  // H1 = [1.5 0.5; 0.5 0; 0 0]; AH1 = [1 0.25; 0.625 0.125; 0.25 0]
  Matrix expected(3, 1);
  expected << 1.5, 0.875, 0.25;
  EXPECT_TRUE(gcn_forward(a.sparseView(), p).isApprox(expected, 1e-12));
}

TEST(Forward, PermutationEquivariant) {
  Rng rng = derive_rng(2, 0);
  const SparseMatrix a = random_adjacency(10, rng);
  GcnParameters p{random_matrix(10, 6, rng), random_matrix(6, 5, rng), random_matrix(5, 3, rng)};
  std::vector<int> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm.begin(), perm.end(), rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> pm(10);
  for (int i = 0; i < 10; ++i) pm.indices()[i] = perm[static_cast<std::size_t>(i)];
  const Matrix pa = pm * dense(a) * pm.transpose();
  GcnParameters q = p;
  q.features = pm * p.features;
  const Matrix permuted = gcn_forward(pa.sparseView(), q);
  EXPECT_TRUE(permuted.isApprox(pm * gcn_forward(a, p), 1e-12));
}

TEST(MarginLoss, HandExample) {
  Matrix emb(3, 1);
  emb << 0.0, 0.5, 0.8;
  EXPECT_NEAR(margin_alignment_loss(emb, {{0, 1}}, {{0, 0, 2}}, 1.0), 0.7, 1e-12);
  EXPECT_EQ(margin_alignment_loss(emb, {{0, 1}}, {{0, 0, 2}}, 0.1), 0.0);
}

TEST(MarginLoss, GradientThroughGcnMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Rng rng = derive_rng(seed, 5);
    const SparseMatrix a = random_adjacency(6, rng);
    for (bool train_features : {true, false}) {
      GcnParameters p{random_matrix(6, 4, rng), random_matrix(4, 4, rng), random_matrix(4, 3, rng), train_features};
      const std::vector<RowPair> pos{{0, 3}, {1, 4}};
      const auto negs = sample_seed_negatives(pos, 0, 3, 3, 6, 2, rng);
      const double margin = 1.0;
      const auto loss = [&](const GcnParameters& q) { return margin_alignment_loss(gcn_forward(a, q), pos, negs, margin); };

      const auto cache = gcn_forward_cached(a, p);
      Matrix d_out = Matrix::Zero(cache.out.rows(), cache.out.cols());
      margin_alignment_loss(cache.out, pos, negs, margin, &d_out);
      const auto g = gcn_backward(a, p, cache, d_out);

      constexpr double h = 1e-6;
      double diff = 0;
      double scale = 0;
      const auto check = [&](Matrix GcnParameters::*field, const Matrix& analytic) {
        for (Eigen::Index r = 0; r < (p.*field).rows(); ++r) {
          for (Eigen::Index c = 0; c < (p.*field).cols(); ++c) {
            GcnParameters up = p;
            GcnParameters down = p;
            (up.*field)(r, c) += h;
            (down.*field)(r, c) -= h;
            const double numeric = (loss(up) - loss(down)) / (2 * h);
            diff += (numeric - analytic(r, c)) * (numeric - analytic(r, c));
            scale += numeric * numeric + analytic(r, c) * analytic(r, c);
          }
        }
      };
      if (train_features) check(&GcnParameters::features, g.features);
      else EXPECT_EQ(g.features.cwiseAbs().sum(), 0.0);
      check(&GcnParameters::w1, g.w1);
      check(&GcnParameters::w2, g.w2);
      ASSERT_GT(scale, 0.0);
      EXPECT_LT(std::sqrt(diff) / std::sqrt(scale), 1e-4) << "seed " << seed;
    }
  }
}

TEST(SeedNegatives, OneSideCorrupted) {
  Rng rng = derive_rng(3, 0);
  const std::vector<RowPair> pos{{0, 5}, {2, 7}};
  for (const auto& n : sample_seed_negatives(pos, 0, 5, 5, 10, 50, rng)) {
    const auto& p = pos[n.positive_index];
    EXPECT_TRUE((n.left == p.left) != (n.right == p.right));
    EXPECT_LT(n.left, 5);
    EXPECT_GE(n.right, 5);
  }
}

TEST(CombinedSimilarity, MixEndpoints) {
  SimilarityMatrix s, a;
  s.values = Matrix::Constant(2, 2, 0.2);
  s.values(0, 1) = 0.9;
  a.values = Matrix::Constant(2, 2, 0.6);
  EXPECT_EQ(combined_similarity(s, a, 1.0).values, s.values);
  EXPECT_EQ(combined_similarity(s, a, 0.0).values, a.values);
  EXPECT_NEAR(combined_similarity(s, a, 0.5).values(0, 1), 0.75, 1e-12);
  EXPECT_NEAR(combined_similarity(s, a, 0.5).values(1, 1), 0.4, 1e-12);
  EXPECT_THROW(combined_similarity(s, a, 1.5), ConfigError);
}

TEST(CombinedSimilarity, MixOneKeepsStructureArgmax) {
  Rng rng = derive_rng(4, 0);
  SimilarityMatrix s, a;
  s.values = random_matrix(8, 8, rng);
  a.values = random_matrix(8, 8, rng);
  const auto mixed = combined_similarity(s, a, 1.0);
  EXPECT_EQ(align_top1(mixed).top1, align_top1(s).top1);
}

namespace {

GcnTrainConfig small_gcn() {
  GcnTrainConfig c;
  c.dim = 32;
  c.max_epochs = 300;
  c.eval_every = 10;
  c.patience = 10;
  c.seed = 4;
  return c;
}

double structure_hits1(const GcnTrainResult& r, const std::vector<EntityPair>& pairs) {
  std::vector<GoldCell> gold;
  for (std::size_t i = 0; i < pairs.size(); ++i) gold.push_back({static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)});
  return hits_at_k(gcn_pair_similarity(r.structure, r.attribute, r.kg1_entities, pairs, Metric::neg_l1, 1.0), gold, 1) /
         100.0;
}

}  // namespace

TEST(TrainGcn, StructureChannelAlignsTwin) {
  const auto ds = make_twin_dataset({.entities = 100, .extra_triples = 300, .seed = 8});
  const auto seeds = split_seeds(ds.links, {0.3, 0.1, 0.6}, 1);
  const auto r = train_gcnalign(ds.kg1, ds.kg2, seeds, small_gcn());
  EXPECT_GE(structure_hits1(r, seeds.test()), 0.8);
}

TEST(TrainGcn, ZeroEpochsIsInitialForward) {
  const auto ds = make_twin_dataset({.entities = 20, .extra_triples = 40, .seed = 8});
  const auto seeds = split_seeds(ds.links, {0.3, 0.2, 0.5}, 1);
  auto config = small_gcn();
  config.max_epochs = 0;
  const auto r = train_gcnalign(ds.kg1, ds.kg2, seeds, config);
  EXPECT_EQ(r.epochs_run, 0);
  EXPECT_EQ(r.structure.rows(), 40);
  // isomorphic twins, tied seed rows and zero elsewhere: every linked pair
  // already has the same output row
  for (const auto& p : ds.links) {
    EXPECT_TRUE(r.structure.row(p.source).isApprox(r.structure.row(20 + p.target), 1e-12)) << p.source;
  }
}

TEST(TrainGcn, DeterministicForSeed) {
  const auto ds = make_twin_dataset({.entities = 30, .extra_triples = 60, .seed = 9});
  const auto seeds = split_seeds(ds.links, {0.3, 0.2, 0.5}, 1);
  auto config = small_gcn();
  config.max_epochs = 30;
  const auto a = train_gcnalign(ds.kg1, ds.kg2, seeds, config);
  const auto b = train_gcnalign(ds.kg1, ds.kg2, seeds, config);
  EXPECT_EQ(a.structure, b.structure);
  EXPECT_EQ(a.attribute, b.attribute);
  EXPECT_EQ(a.best_epoch, b.best_epoch);
}

TEST(TrainGcn, FeatureInitParsing) {
  EXPECT_EQ(parse_feature_init("random"), FeatureInit::random);
  EXPECT_EQ(parse_feature_init("anchored"), FeatureInit::anchored);
  EXPECT_THROW(parse_feature_init("zeros"), ConfigError);
}
