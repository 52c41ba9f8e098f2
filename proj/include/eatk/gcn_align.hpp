#pragma once

// Structure-and-attribute graph convolution alignment. Two independent
// two-layer GCN channels run over idf-weighted adjacency matrices of the
// block-diagonal union of both graphs; cross-graph signal enters only through
// a margin loss on seed pairs.

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "eatk/embedding.hpp"
#include "eatk/error.hpp"
#include "eatk/kg.hpp"
#include "eatk/matcher.hpp"
#include "eatk/optim.hpp"
#include "eatk/rng.hpp"

namespace eatk {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class AdjacencyMode { structure, attribute };

inline std::string to_string(AdjacencyMode m) { return m == AdjacencyMode::structure ? "structure" : "attribute"; }

inline constexpr std::size_t kAttributeEdgeCap = 1000;

struct WeightedAdjacency {
  SparseMatrix weights;     // symmetric idf weights plus unit self-loops
  SparseMatrix normalized;  // rows of `weights` scaled to sum to 1
  AdjacencyMode mode = AdjacencyMode::structure;

  Eigen::Index size() const noexcept { return weights.rows(); }
};

namespace detail {

using EdgeMap = std::map<std::pair<EntityId, EntityId>, double>;

inline void add_symmetric_max(EdgeMap& sym, EntityId a, EntityId b, double w) {
  auto& slot = sym[{a, b}];
  slot = std::max(slot, w);
}

inline WeightedAdjacency finish_adjacency(std::size_t n, const EdgeMap& directed, AdjacencyMode mode,
                                          std::size_t offset = 0, std::size_t total = 0) {
  if (total == 0) total = n;
  EdgeMap sym;
  for (const auto& [key, w] : directed) {
    add_symmetric_max(sym, key.first, key.second, w);
    add_symmetric_max(sym, key.second, key.first, w);
  }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(sym.size() + n);
  for (const auto& [key, w] : sym) {
    if (w > 0) {
      entries.emplace_back(static_cast<int>(offset + static_cast<std::size_t>(key.first)),
                           static_cast<int>(offset + static_cast<std::size_t>(key.second)), w);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    entries.emplace_back(static_cast<int>(offset + i), static_cast<int>(offset + i), 1.0);
  }
  WeightedAdjacency adj;
  adj.mode = mode;
  adj.weights.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(total));
  adj.weights.setFromTriplets(entries.begin(), entries.end());
  return adj;
}

inline void row_normalize(WeightedAdjacency& adj) {
  adj.normalized = adj.weights;
  for (Eigen::Index r = 0; r < adj.normalized.outerSize(); ++r) {
    double sum = 0;
    for (SparseMatrix::InnerIterator it(adj.normalized, r); it; ++it) sum += it.value();
    if (sum <= 0) continue;
    for (SparseMatrix::InnerIterator it(adj.normalized, r); it; ++it) it.valueRef() /= sum;
  }
}

/// Directed, un-symmetrised edge weights for one graph (self-loop triples
/// skipped; the unit self-loop is added later).
inline EdgeMap directed_weights(const KnowledgeGraph& kg, AdjacencyMode mode) {
  EdgeMap edges;
  if (mode == AdjacencyMode::structure) {
    std::vector<std::size_t> count(kg.relations.size(), 0);
    for (const auto& t : kg.rel_triples) ++count[static_cast<std::size_t>(t.relation)];
    const auto total = static_cast<double>(kg.rel_triples.size());
    for (const auto& t : kg.rel_triples) {
      if (t.head == t.tail) continue;
      edges[{t.head, t.tail}] += std::log(total / static_cast<double>(count[static_cast<std::size_t>(t.relation)]));
    }
    return edges;
  }

  std::vector<std::size_t> count(kg.attributes.size(), 0);
  std::vector<std::vector<EntityId>> holders(kg.attributes.size());
  for (const auto& t : kg.attr_triples) {
    ++count[static_cast<std::size_t>(t.attribute)];
    holders[static_cast<std::size_t>(t.attribute)].push_back(t.entity);
  }
  const auto total = static_cast<double>(kg.attr_triples.size());
  for (std::size_t a = 0; a < holders.size(); ++a) {
    auto& list = holders[a];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    const double idf = std::log(total / static_cast<double>(count[a]));
    std::size_t emitted = 0;
    for (std::size_t i = 0; i < list.size() && emitted < kAttributeEdgeCap; ++i) {
      for (std::size_t j = i + 1; j < list.size() && emitted < kAttributeEdgeCap; ++j, ++emitted) {
        edges[{list[i], list[j]}] += idf;
      }
    }
  }
  return edges;
}

}  // namespace detail

/// Structure mode: edge (h, t) weighs the sum of idf(r) = ln(|T_rel| / count(r))
/// over relations linking h to t. Attribute mode: entities sharing attribute a
/// are linked with weight idf(a) = ln(|T_attr| / count(a)), keeping the first
/// 1000 pairs per attribute in ascending id order. Both are symmetrised by
/// max, receive unit self-loops and are row-normalised.
inline WeightedAdjacency build_adjacency(const KnowledgeGraph& kg, AdjacencyMode mode) {
  auto adj = detail::finish_adjacency(kg.entity_count(), detail::directed_weights(kg, mode), mode);
  detail::row_normalize(adj);
  return adj;
}

/// Block-diagonal adjacency over E1 u E2; KG2 entity j occupies row |E1| + j.
inline WeightedAdjacency build_joint_adjacency(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                                               AdjacencyMode mode) {
  const auto n1 = kg1.entity_count();
  const auto n = n1 + kg2.entity_count();
  auto a1 = detail::finish_adjacency(n1, detail::directed_weights(kg1, mode), mode, 0, n);
  auto a2 = detail::finish_adjacency(kg2.entity_count(), detail::directed_weights(kg2, mode), mode, n1, n);
  WeightedAdjacency adj;
  adj.mode = mode;
  adj.weights = a1.weights + a2.weights;
  detail::row_normalize(adj);
  return adj;
}

inline void write_adjacency_tsv(const std::filesystem::path& path, const SparseMatrix& m) {
  auto out = tsv::open_output(path);
  std::string line;
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      line = std::to_string(it.row()) + '\t' + std::to_string(it.col()) + '\t';
      tsv::append_number(line, it.value());
      line += '\n';
      out << line;
    }
  }
}

// ---------------------------------------------------------------------------
// Two-layer GCN

enum class Activation { relu, identity };

struct GcnParameters {
  Matrix features;  // n x d_in
  Matrix w1;        // d_in x d_hidden
  Matrix w2;        // d_hidden x d_out
  bool train_features = true;
};

/// Intermediate products kept for back-propagation.
struct GcnForwardCache {
  Matrix ax;   // A X
  Matrix z1;   // A X W1
  Matrix h1;   // act(z1)
  Matrix ah1;  // A H1
  Matrix out;  // A H1 W2
};

inline void check_gcn_shapes(const SparseMatrix& adj, const GcnParameters& p) {
  if (adj.rows() != adj.cols()) throw ShapeError("adjacency is not square");
  if (p.features.rows() != adj.rows()) {
    throw ShapeError("features have " + std::to_string(p.features.rows()) + " rows, adjacency has " +
                     std::to_string(adj.rows()));
  }
  if (p.features.cols() != p.w1.rows()) throw ShapeError("feature width does not match layer-1 input");
  if (p.w1.cols() != p.w2.rows()) throw ShapeError("layer-1 output does not match layer-2 input");
}

/// H1 = act(A X W1), out = A H1 W2.
inline GcnForwardCache gcn_forward_cached(const SparseMatrix& adj, const GcnParameters& p,
                                          Activation first = Activation::relu) {
  check_gcn_shapes(adj, p);
  GcnForwardCache c;
  c.ax = adj * p.features;
  c.z1 = c.ax * p.w1;
  c.h1 = first == Activation::relu ? Matrix(c.z1.cwiseMax(0.0)) : c.z1;
  c.ah1 = adj * c.h1;
  c.out = c.ah1 * p.w2;
  return c;
}

inline Matrix gcn_forward(const SparseMatrix& adj, const GcnParameters& p, Activation first = Activation::relu) {
  return gcn_forward_cached(adj, p, first).out;
}

struct GcnGradients {
  Matrix features;
  Matrix w1;
  Matrix w2;
};

inline GcnGradients gcn_backward(const SparseMatrix& adj, const GcnParameters& p, const GcnForwardCache& c,
                                 const Matrix& d_out, Activation first = Activation::relu) {
  GcnGradients g;
  g.w2 = c.ah1.transpose() * d_out;
  const Matrix d_ah1 = d_out * p.w2.transpose();
  Matrix d_z1 = adj.transpose() * d_ah1;
  if (first == Activation::relu) d_z1 = d_z1.cwiseProduct((c.z1.array() > 0).cast<double>().matrix());
  g.w1 = c.ax.transpose() * d_z1;
  if (p.train_features) {
    g.features = adj.transpose() * (d_z1 * p.w1.transpose());
  } else {
    g.features = Matrix::Zero(p.features.rows(), p.features.cols());
  }
  return g;
}

// ---------------------------------------------------------------------------
// Seed margin loss

/// A corrupted seed pair (rows of the joint embedding matrix).
struct SeedNegative {
  std::size_t positive_index = 0;
  Eigen::Index left = 0;
  Eigen::Index right = 0;
};

struct RowPair {
  Eigen::Index left = 0;
  Eigen::Index right = 0;
};

/// sum_pos sum_neg [margin + ||e1 - e2||_1 - ||e1' - e2'||_1]_+ ; gradient
/// w.r.t. the embedding rows is accumulated into `grad` when given.
inline double margin_alignment_loss(const Matrix& emb, const std::vector<RowPair>& positives,
                                    const std::vector<SeedNegative>& negatives, double margin,
                                    Matrix* grad = nullptr) {
  const auto check = [&](Eigen::Index r) {
    if (r < 0 || r >= emb.rows()) throw LookupError("seed row " + std::to_string(r) + " out of range");
  };
  std::vector<std::vector<std::size_t>> by_positive(positives.size());
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    if (negatives[i].positive_index >= positives.size()) throw ConfigError("negative refers to unknown positive");
    by_positive[negatives[i].positive_index].push_back(i);
  }
  const auto sign = [](double x) { return static_cast<double>((x > 0) - (x < 0)); };
  double total = 0;
  for (std::size_t p = 0; p < positives.size(); ++p) {
    const auto& pos = positives[p];
    check(pos.left);
    check(pos.right);
    const Vector pos_diff = (emb.row(pos.left) - emb.row(pos.right)).transpose();
    const double pos_dist = pos_diff.lpNorm<1>();
    for (auto ni : by_positive[p]) {
      const auto& neg = negatives[ni];
      check(neg.left);
      check(neg.right);
      const Vector neg_diff = (emb.row(neg.left) - emb.row(neg.right)).transpose();
      const double l = margin + pos_dist - neg_diff.lpNorm<1>();
      if (l <= 0) continue;
      total += l;
      if (grad != nullptr) {
        const Vector gp = pos_diff.unaryExpr(sign);
        const Vector gn = neg_diff.unaryExpr(sign);
        grad->row(pos.left) += gp.transpose();
        grad->row(pos.right) -= gp.transpose();
        grad->row(neg.left) -= gn.transpose();
        grad->row(neg.right) += gn.transpose();
      }
    }
  }
  return total;
}

/// k corruptions per positive: a fair coin picks the side, the replacement is
/// uniform over that side's rows [lo, hi) excluding the original.
inline std::vector<SeedNegative> sample_seed_negatives(const std::vector<RowPair>& positives, Eigen::Index left_lo,
                                                       Eigen::Index left_hi, Eigen::Index right_lo,
                                                       Eigen::Index right_hi, std::size_t k, Rng& rng) {
  if (left_hi - left_lo < 2 || right_hi - right_lo < 2) throw ConfigError("seed negatives need 2+ entities per side");
  std::vector<SeedNegative> out;
  out.reserve(positives.size() * k);
  for (std::size_t p = 0; p < positives.size(); ++p) {
    for (std::size_t n = 0; n < k; ++n) {
      SeedNegative neg{p, positives[p].left, positives[p].right};
      if ((rng() >> 63) != 0) {
        do {
          neg.left = left_lo + static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(left_hi - left_lo)));
        } while (neg.left == positives[p].left);
      } else {
        do {
          neg.right =
              right_lo + static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(right_hi - right_lo)));
        } while (neg.right == positives[p].right);
      }
      out.push_back(neg);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Similarity mixing

inline SimilarityMatrix combined_similarity(const SimilarityMatrix& structure, const SimilarityMatrix& attribute,
                                            double mix) {
  if (structure.rows() != attribute.rows() || structure.cols() != attribute.cols()) {
    throw ShapeError("structure and attribute similarity shapes differ");
  }
  if (!(mix >= 0 && mix <= 1)) throw ConfigError("mix must lie in [0, 1]");
  SimilarityMatrix out;
  out.metric = structure.metric;
  out.values = mix * structure.values + (1.0 - mix) * attribute.values;
  return out;
}

// ---------------------------------------------------------------------------
// Training

enum class FeatureInit { anchored, random };

inline FeatureInit parse_feature_init(const std::string& s) {
  if (s == "anchored") return FeatureInit::anchored;
  if (s == "random") return FeatureInit::random;
  throw ConfigError("unknown feature_init '" + s + "'");
}

inline std::string to_string(FeatureInit f) { return f == FeatureInit::anchored ? "anchored" : "random"; }

struct GcnTrainConfig {
  std::size_t dim = 100;
  double learning_rate = 0.005;
  OptimizerKind optimizer = OptimizerKind::adam;
  double margin_structure = 3.0;
  double margin_attribute = 3.0;
  std::size_t negatives_per_positive = 5;
  double mix = 0.9;
  int max_epochs = 1000;
  int eval_every = 10;
  int patience = 10;
  Metric metric = Metric::neg_l1;
  FeatureInit feature_init = FeatureInit::anchored;
  bool tie_seed_features = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim == 0) throw ConfigError("dim must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (!(margin_structure >= 0) || !(margin_attribute >= 0)) throw ConfigError("margins must be >= 0");
    if (negatives_per_positive == 0) throw ConfigError("negatives_per_positive must be positive");
    if (!(mix >= 0 && mix <= 1)) throw ConfigError("mix must lie in [0, 1]");
    if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
    if (eval_every <= 0 || patience <= 0) throw ConfigError("eval_every and patience must be positive");
  }
};

/// Attribute-channel input: per entity, the idf weights of its attributes
/// (columns shared by attribute name across both graphs), projected to `dim`
/// by a fixed Gaussian matrix and L2-normalised.
inline Matrix attribute_features(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2, std::size_t dim, Rng& rng) {
  std::unordered_map<std::string, Eigen::Index> column;
  for (const auto* kg : {&kg1, &kg2}) {
    for (const auto& name : kg->attributes.names()) column.emplace(name, static_cast<Eigen::Index>(column.size()));
  }
  const auto n1 = static_cast<Eigen::Index>(kg1.entity_count());
  const auto n = n1 + static_cast<Eigen::Index>(kg2.entity_count());
  const auto cols = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(column.size()));
  Matrix indicator = Matrix::Zero(n, cols);
  Eigen::Index offset = 0;
  for (const auto* kg : {&kg1, &kg2}) {
    std::vector<std::size_t> count(kg->attributes.size(), 0);
    for (const auto& t : kg->attr_triples) ++count[static_cast<std::size_t>(t.attribute)];
    const auto total = static_cast<double>(kg->attr_triples.size());
    for (const auto& t : kg->attr_triples) {
      const auto c = column.at(kg->attributes.name(t.attribute));
      indicator(offset + t.entity, c) = std::log(total / static_cast<double>(count[static_cast<std::size_t>(t.attribute)]));
    }
    offset += static_cast<Eigen::Index>(kg->entity_count());
  }
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Matrix projection(cols, static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < projection.rows(); ++i) {
    for (Eigen::Index j = 0; j < projection.cols(); ++j) projection(i, j) = gauss(rng);
  }
  Matrix features = indicator * projection;
  normalize_rows(features);
  return features;
}

inline Matrix glorot_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (2.0 * uniform_unit(rng) - 1.0) * bound;
  }
  return m;
}

struct GcnChannel {
  WeightedAdjacency adjacency;
  GcnParameters params;
  double margin = 3.0;
};

struct GcnEpochRecord {
  int epoch = 0;
  double structure_loss = 0;
  double attribute_loss = 0;
  std::optional<double> valid_hits1;
};

struct GcnTrainResult {
  Matrix structure;  // joint rows: KG1 entities, then KG2 entities
  Matrix attribute;
  std::size_t kg1_entities = 0;
  int best_epoch = 0;
  std::optional<double> best_valid_hits1;
  int epochs_run = 0;
  std::vector<GcnEpochRecord> log;

  Matrix kg1_rows(const Matrix& m) const { return m.topRows(static_cast<Eigen::Index>(kg1_entities)); }
  Matrix kg2_rows(const Matrix& m) const {
    return m.bottomRows(m.rows() - static_cast<Eigen::Index>(kg1_entities));
  }
};

/// Similarity of KG1 -> KG2 pairs restricted to the given pairs' endpoints,
/// mixing both channels.
inline SimilarityMatrix gcn_pair_similarity(const Matrix& structure, const Matrix& attribute, std::size_t n1,
                                            const std::vector<EntityPair>& pairs, Metric metric, double mix) {
  const auto gather = [&](const Matrix& m, bool left) {
    Matrix out(static_cast<Eigen::Index>(pairs.size()), m.cols());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto row = left ? static_cast<Eigen::Index>(pairs[i].source)
                            : static_cast<Eigen::Index>(n1) + pairs[i].target;
      out.row(static_cast<Eigen::Index>(i)) = m.row(row);
    }
    return out;
  };
  return combined_similarity(similarity_matrix(gather(structure, true), gather(structure, false), metric),
                             similarity_matrix(gather(attribute, true), gather(attribute, false), metric), mix);
}

using GcnEpochCallback = std::function<void(const GcnEpochRecord&)>;

/// Each epoch takes one full-batch step per channel, each channel with its own
/// optimizer and freshly sampled seed negatives. Early stopping follows the
/// translation trainer: mixed validation Hits@1 every `eval_every` epochs,
/// `patience` stale evaluations, best snapshot returned.
inline GcnTrainResult train_gcnalign(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2, const SeedAlignment& seeds,
                                     const GcnTrainConfig& config, const GcnEpochCallback& on_epoch = {}) {
  config.validate();
  const auto train_pairs = seeds.train();
  const auto valid_pairs = seeds.valid();
  if (train_pairs.empty()) throw ConfigError("training needs at least one train seed");

  const auto n1 = static_cast<Eigen::Index>(kg1.entity_count());
  const auto n = n1 + static_cast<Eigen::Index>(kg2.entity_count());
  const auto d = static_cast<Eigen::Index>(config.dim);
  Rng rng = derive_rng(config.seed, 2);

  GcnChannel structure{build_joint_adjacency(kg1, kg2, AdjacencyMode::structure), {}, config.margin_structure};
  structure.params.features = uniform_init(n, d, rng);
  normalize_rows(structure.params.features);
  // Train seed pairs share one input row: identical initialisation here and
  // identical (summed) gradients in the update keep the two rows tied.
  // Anchored init zeroes every other row, so before training each entity's
  // output depends only on the seeds around it.
  if (config.feature_init == FeatureInit::anchored) {
    Matrix anchored = Matrix::Zero(n, d);
    for (const auto& p : train_pairs) anchored.row(p.source) = structure.params.features.row(p.source);
    structure.params.features = std::move(anchored);
  }
  if (config.tie_seed_features) {
    for (const auto& p : train_pairs) {
      structure.params.features.row(n1 + p.target) = structure.params.features.row(p.source);
    }
  }
  structure.params.w1 = glorot_init(d, d, rng);
  structure.params.w2 = glorot_init(d, d, rng);

  GcnChannel attribute{build_joint_adjacency(kg1, kg2, AdjacencyMode::attribute), {}, config.margin_attribute};
  attribute.params.features = attribute_features(kg1, kg2, config.dim, rng);
  attribute.params.train_features = false;
  attribute.params.w1 = glorot_init(d, d, rng);
  attribute.params.w2 = glorot_init(d, d, rng);

  std::vector<RowPair> positives;
  for (const auto& p : train_pairs) positives.push_back({p.source, n1 + p.target});

  GcnTrainResult result;
  result.kg1_entities = kg1.entity_count();
  result.structure = gcn_forward(structure.adjacency.normalized, structure.params);
  result.attribute = gcn_forward(attribute.adjacency.normalized, attribute.params);

  struct ChannelOptimizers {
    Optimizer features, w1, w2;
  };
  const auto make_opts = [&] {
    return ChannelOptimizers{Optimizer(config.optimizer, config.learning_rate),
                             Optimizer(config.optimizer, config.learning_rate),
                             Optimizer(config.optimizer, config.learning_rate)};
  };
  ChannelOptimizers s_opt = make_opts();
  ChannelOptimizers a_opt = make_opts();

  const auto step = [&](GcnChannel& ch, ChannelOptimizers& opt, Rng& channel_rng, int epoch) {
    const auto& adj = ch.adjacency.normalized;
    const auto cache = gcn_forward_cached(adj, ch.params);
    const auto negatives =
        sample_seed_negatives(positives, 0, n1, n1, n, config.negatives_per_positive, channel_rng);
    Matrix d_out = Matrix::Zero(cache.out.rows(), cache.out.cols());
    const double loss = margin_alignment_loss(cache.out, positives, negatives, ch.margin, &d_out);
    if (!std::isfinite(loss)) throw TrainingError("gcn " + to_string(ch.adjacency.mode) + " channel diverged", epoch);
    auto g = gcn_backward(adj, ch.params, cache, d_out);
    if (ch.params.train_features && config.tie_seed_features) {
      for (const auto& p : positives) {
        const Vector shared = (g.features.row(p.left) + g.features.row(p.right)).transpose();
        g.features.row(p.left) = shared.transpose();
        g.features.row(p.right) = shared.transpose();
      }
    }
    if (ch.params.train_features) opt.features.step(ch.params.features, g.features);
    opt.w1.step(ch.params.w1, g.w1);
    opt.w2.step(ch.params.w2, g.w2);
    if (!ch.params.features.allFinite() || !ch.params.w1.allFinite() || !ch.params.w2.allFinite()) {
      throw TrainingError("gcn " + to_string(ch.adjacency.mode) + " parameters became non-finite", epoch);
    }
    return loss;
  };

  Rng s_rng = derive_rng(config.seed, 3);
  Rng a_rng = derive_rng(config.seed, 4);
  int stale = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    GcnEpochRecord rec;
    rec.epoch = epoch;
    rec.structure_loss = step(structure, s_opt, s_rng, epoch);
    rec.attribute_loss = step(attribute, a_opt, a_rng, epoch);
    result.epochs_run = epoch;

    if (epoch % config.eval_every == 0 || epoch == config.max_epochs) {
      Matrix s_out = gcn_forward(structure.adjacency.normalized, structure.params);
      Matrix a_out = gcn_forward(attribute.adjacency.normalized, attribute.params);
      if (!valid_pairs.empty()) {
        std::vector<GoldCell> gold;
        for (std::size_t i = 0; i < valid_pairs.size(); ++i) {
          gold.push_back({static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)});
        }
        const auto sim = gcn_pair_similarity(s_out, a_out, result.kg1_entities, valid_pairs, config.metric, config.mix);
        const double h1 = hits_at_k(sim, gold, 1) / 100.0;
        rec.valid_hits1 = h1;
        if (!result.best_valid_hits1 || h1 > *result.best_valid_hits1) {
          result.best_valid_hits1 = h1;
          result.best_epoch = epoch;
          result.structure = std::move(s_out);
          result.attribute = std::move(a_out);
          stale = 0;
        } else {
          ++stale;
        }
      } else {
        result.best_epoch = epoch;
        result.structure = std::move(s_out);
        result.attribute = std::move(a_out);
      }
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stale >= config.patience) break;
  }
  return result;
}

}  // namespace eatk
