#pragma once

// Translation-based alignment: both graphs share one embedding space, train
// seed pairs share a single entity row, and triples are scored with
// ||h + r - t||.
//
//   mtranse   margin (triplet) loss, uniform negatives
//   iptranse  margin (triplet) loss, uniform negatives, bootstrapping
//   bootea    contrastive loss, epsilon-truncated negatives, bootstrapping

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "eatk/embedding.hpp"
#include "eatk/error.hpp"
#include "eatk/kg.hpp"
#include "eatk/matcher.hpp"
#include "eatk/optim.hpp"
#include "eatk/rng.hpp"

namespace eatk {

enum class Norm { l1, l2 };

inline Norm parse_norm(const std::string& s) {
  if (s == "l1" || s == "L1") return Norm::l1;
  if (s == "l2" || s == "L2") return Norm::l2;
  throw ConfigError("unknown norm '" + s + "'");
}

inline std::string to_string(Norm n) { return n == Norm::l1 ? "l1" : "l2"; }

enum class LossKind { triplet, contrastive };

struct LossConfig {
  double gamma = 1.0;    // triplet margin
  double gamma1 = 0.01;  // contrastive: positive-score cap
  double gamma2 = 2.0;   // contrastive: negative-score floor
  double beta = 1.0;     // weight of each positive's negative sum
  double epsilon = 0.9;  // truncation fraction for nearest-neighbour negatives
  std::size_t negatives_per_positive = 10;
  Norm norm = Norm::l2;

  void validate() const {
    if (!(gamma >= 0)) throw ConfigError("gamma must be >= 0");
    if (!(gamma1 > 0) || !(gamma2 > 0)) throw ConfigError("gamma1 and gamma2 must be positive");
    if (!(gamma1 < gamma2)) throw ConfigError("gamma1 must be smaller than gamma2");
    if (!(beta >= 0)) throw ConfigError("beta must be >= 0");
    if (!(epsilon >= 0 && epsilon < 1)) throw ConfigError("epsilon must lie in [0, 1)");
    if (negatives_per_positive == 0) throw ConfigError("negatives_per_positive must be positive");
  }
};

// ---------------------------------------------------------------------------
// Scores and per-pair losses

namespace detail {

inline void check_triple(const EmbeddingTable& emb, const Triple& t) {
  const auto n = emb.entities.rows();
  if (t.head < 0 || t.head >= n || t.tail < 0 || t.tail >= n) {
    throw LookupError("triple references unknown entity (" + std::to_string(t.head) + ", " +
                      std::to_string(t.tail) + ")");
  }
  if (t.relation < 0 || t.relation >= emb.relations.rows()) {
    throw LookupError("triple references unknown relation " + std::to_string(t.relation));
  }
}

inline Vector translation_residual(const EmbeddingTable& emb, const Triple& t) {
  return (emb.entities.row(t.head) + emb.relations.row(t.relation) - emb.entities.row(t.tail)).transpose();
}

}  // namespace detail

inline double score_triple(const EmbeddingTable& emb, const Triple& triple, Norm norm = Norm::l2) {
  detail::check_triple(emb, triple);
  const Vector v = detail::translation_residual(emb, triple);
  return norm == Norm::l2 ? v.norm() : v.lpNorm<1>();
}

namespace detail {
// NaN passes through so that overflowing scores surface as divergence.
inline double hinge(double x) { return x > 0 || std::isnan(x) ? x : 0.0; }
}  // namespace detail

/// [gamma + pos - neg]_+
inline double triplet_loss(double pos_score, double neg_score, double gamma) {
  return detail::hinge(gamma + pos_score - neg_score);
}

/// [pos - gamma1]_+ + [gamma2 - neg]_+
inline double contrastive_loss(double pos_score, double neg_score, double gamma1, double gamma2) {
  return detail::hinge(pos_score - gamma1) + detail::hinge(gamma2 - neg_score);
}

// ---------------------------------------------------------------------------
// Negative triples

struct NegativeTriple {
  Triple triple;
  Triple positive;
  std::size_t positive_index = 0;  // index of `positive` in the batch it corrupts
};

/// Membership oracle for the positive triple set T.
class TripleIndex {
 public:
  TripleIndex(std::size_t entity_count, std::span<const Triple> triples)
      : entity_count_(entity_count), set_(triples.begin(), triples.end()) {}

  bool contains(const Triple& t) const { return set_.count(t) != 0; }
  std::size_t entity_count() const noexcept { return entity_count_; }
  std::size_t size() const noexcept { return set_.size(); }

 private:
  std::size_t entity_count_;
  std::unordered_set<Triple, TripleHash> set_;
};

struct NegativeSamplingError : Error {
  explicit NegativeSamplingError(const std::string& what) : Error(ErrorKind::training, what) {}
};

inline constexpr int kNegativeRetryBudget = 1000;

namespace detail {

/// Draws k corruptions of `positive`; `pick(replaced_entity)` proposes the
/// replacement entity.
template <class Pick>
std::vector<NegativeTriple> corrupt(const Triple& positive, std::size_t positive_index, const TripleIndex& index,
                                    std::size_t k, Rng& rng, Pick&& pick) {
  std::vector<NegativeTriple> out;
  out.reserve(k);
  for (std::size_t n = 0; n < k; ++n) {
    bool found = false;
    for (int attempt = 0; attempt < kNegativeRetryBudget; ++attempt) {
      Triple candidate = positive;
      const bool corrupt_head = (rng() >> 63) != 0;
      if (corrupt_head) {
        candidate.head = pick(positive.head);
      } else {
        candidate.tail = pick(positive.tail);
      }
      if (candidate == positive || index.contains(candidate)) continue;
      out.push_back({candidate, positive, positive_index});
      found = true;
      break;
    }
    if (!found) {
      throw NegativeSamplingError("no valid negative for triple (" + std::to_string(positive.head) + ", " +
                                  std::to_string(positive.relation) + ", " + std::to_string(positive.tail) +
                                  ") after " + std::to_string(kNegativeRetryBudget) + " draws");
    }
  }
  return out;
}

}  // namespace detail

/// Replaces head or tail (fair coin) with an entity drawn uniformly from
/// `candidates` (the positive's own graph), rejecting candidates that are in T.
inline std::vector<NegativeTriple> sample_negatives_uniform(const Triple& positive, std::size_t positive_index,
                                                            const TripleIndex& index,
                                                            std::span<const EntityId> candidates, std::size_t k,
                                                            Rng& rng) {
  if (k == 0) return {};
  if (candidates.size() < 2) throw ConfigError("negative sampling needs at least 2 entities");
  return detail::corrupt(positive, positive_index, index, k, rng,
                         [&](EntityId) { return candidates[uniform_index(rng, candidates.size())]; });
}

/// Candidate set = every entity of the index.
inline std::vector<NegativeTriple> sample_negatives_uniform(const Triple& positive, std::size_t positive_index,
                                                            const TripleIndex& index, std::size_t k, Rng& rng) {
  if (k == 0) return {};
  std::vector<EntityId> all(index.entity_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<EntityId>(i);
  return sample_negatives_uniform(positive, positive_index, index, all, k, rng);
}

/// For every candidate entity, its s = ceil((1 - epsilon) * |candidates|)
/// nearest candidates by cosine (itself excluded, s capped at
/// |candidates| - 1, ties -> lower id).
class NeighborPool {
 public:
  NeighborPool() = default;

  NeighborPool(const Matrix& entity_vectors, double epsilon)
      : NeighborPool(entity_vectors, epsilon, all_rows(entity_vectors.rows())) {}

  NeighborPool(const Matrix& entity_vectors, double epsilon, std::span<const EntityId> candidates) {
    const auto n = candidates.size();
    if (n < 2) throw ConfigError("epsilon-truncated sampling needs at least 2 entities");
    size_ = pool_size(n, epsilon);
    Matrix unit(static_cast<Eigen::Index>(n), entity_vectors.cols());
    for (std::size_t i = 0; i < n; ++i) unit.row(static_cast<Eigen::Index>(i)) = entity_vectors.row(candidates[i]);
    normalize_rows(unit);
    constexpr Eigen::Index block = 256;
    std::vector<std::size_t> order;
    order.reserve(n);
    for (Eigen::Index start = 0; start < static_cast<Eigen::Index>(n); start += block) {
      const Eigen::Index rows = std::min<Eigen::Index>(block, static_cast<Eigen::Index>(n) - start);
      const Matrix sim = unit.middleRows(start, rows) * unit.transpose();
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto self = static_cast<std::size_t>(start + r);
        order.clear();
        for (std::size_t j = 0; j < n; ++j) {
          if (j != self) order.push_back(j);
        }
        const auto row = sim.row(r);
        const auto closer = [&](std::size_t a, std::size_t b) {
          const double va = row(static_cast<Eigen::Index>(a));
          const double vb = row(static_cast<Eigen::Index>(b));
          if (va != vb) return va > vb;
          return candidates[a] < candidates[b];
        };
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size_), order.end(), closer);
        auto& nn = neighbors_[candidates[self]];
        nn.clear();
        for (std::size_t i = 0; i < size_; ++i) nn.push_back(candidates[order[i]]);
      }
    }
  }

  /// ceil((1 - epsilon) * n), clamped to [1, n - 1]. The 1e-9 slack keeps
  /// values like (1 - 0.7) * 10 = 3.0000000000000004 from rounding up.
  static std::size_t pool_size(std::size_t n, double epsilon) {
    const double raw = std::ceil((1.0 - epsilon) * static_cast<double>(n) - 1e-9);
    const auto s = static_cast<std::size_t>(std::max(1.0, raw));
    return std::min(s, n - 1);
  }

  std::size_t size() const noexcept { return size_; }

  const std::vector<EntityId>& neighbors(EntityId e) const {
    auto it = neighbors_.find(e);
    if (it == neighbors_.end()) throw LookupError("entity " + std::to_string(e) + " has no neighbour pool");
    return it->second;
  }

 private:
  static std::vector<EntityId> all_rows(Eigen::Index n) {
    std::vector<EntityId> ids(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<EntityId>(i);
    return ids;
  }

  std::size_t size_ = 0;
  std::unordered_map<EntityId, std::vector<EntityId>> neighbors_;
};

/// Like sample_negatives_uniform, but the replacement is drawn uniformly from
/// the replaced entity's nearest-neighbour pool.
inline std::vector<NegativeTriple> sample_negatives_truncated(const Triple& positive, std::size_t positive_index,
                                                              const TripleIndex& index, const NeighborPool& pool,
                                                              std::size_t k, Rng& rng) {
  if (k == 0) return {};
  if (pool.size() == 0) throw ConfigError("neighbour pool is empty");
  return detail::corrupt(positive, positive_index, index, k, rng, [&](EntityId replaced) {
    const auto& nn = pool.neighbors(replaced);
    return nn[uniform_index(rng, nn.size())];
  });
}

// ---------------------------------------------------------------------------
// Batch loss and gradient

/// Sum over positives (ascending index) of beta * sum over that positive's
/// negatives (in the given order) of the per-pair loss. When `grad` is
/// non-null the analytic gradient is accumulated into it (same shapes as
/// `emb`).
inline double loss_and_gradient(const EmbeddingTable& emb, std::span<const Triple> positives,
                                std::span<const NegativeTriple> negatives, const LossConfig& config, LossKind kind,
                                EmbeddingTable* grad = nullptr) {
  std::vector<std::vector<std::size_t>> by_positive(positives.size());
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    const auto p = negatives[i].positive_index;
    if (p >= positives.size()) throw ConfigError("negative refers to positive " + std::to_string(p) + " out of range");
    by_positive[p].push_back(i);
  }

  const auto score_grad = [&](const Vector& residual, double score) -> Vector {
    if (config.norm == Norm::l2) return score > 0 ? Vector(residual / score) : Vector(Vector::Zero(residual.size()));
    return residual.unaryExpr([](double x) { return static_cast<double>((x > 0) - (x < 0)); });
  };
  const auto add_triple_grad = [&](const Triple& t, const Vector& g, double w) {
    grad->entities.row(t.head) += w * g.transpose();
    grad->relations.row(t.relation) += w * g.transpose();
    grad->entities.row(t.tail) -= w * g.transpose();
  };
  const auto norm_of = [&](const Vector& v) { return config.norm == Norm::l2 ? v.norm() : v.lpNorm<1>(); };

  double total = 0;
  for (std::size_t p = 0; p < positives.size(); ++p) {
    if (by_positive[p].empty()) throw ConfigError("positive " + std::to_string(p) + " has no negatives");
    const auto& pos = positives[p];
    detail::check_triple(emb, pos);
    const Vector pos_res = detail::translation_residual(emb, pos);
    const double pos_score = norm_of(pos_res);
    double per_positive = 0;
    for (auto ni : by_positive[p]) {
      const auto& neg = negatives[ni].triple;
      detail::check_triple(emb, neg);
      const Vector neg_res = detail::translation_residual(emb, neg);
      const double neg_score = norm_of(neg_res);
      double d_pos = 0;
      double d_neg = 0;
      if (kind == LossKind::triplet) {
        const double l = triplet_loss(pos_score, neg_score, config.gamma);
        per_positive += l;
        if (config.gamma + pos_score - neg_score > 0) {
          d_pos = 1;
          d_neg = -1;
        }
      } else {
        per_positive += contrastive_loss(pos_score, neg_score, config.gamma1, config.gamma2);
        if (pos_score > config.gamma1) d_pos = 1;
        if (neg_score < config.gamma2) d_neg = -1;
      }
      if (grad != nullptr) {
        if (d_pos != 0) add_triple_grad(pos, score_grad(pos_res, pos_score), config.beta * d_pos);
        if (d_neg != 0) add_triple_grad(neg, score_grad(neg_res, neg_score), config.beta * d_neg);
      }
    }
    total += config.beta * per_positive;
  }
  return total;
}

inline double epoch_loss(const EmbeddingTable& emb, std::span<const Triple> positives,
                         std::span<const NegativeTriple> negatives, const LossConfig& config, LossKind kind) {
  return loss_and_gradient(emb, positives, negatives, config, kind, nullptr);
}

// ---------------------------------------------------------------------------
// Bootstrapping

struct BootstrapPair {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double similarity = 0;
};

/// Finds mutual nearest neighbours with similarity >= threshold among rows and
/// columns not yet taken. Each round removes what it found and searches again;
/// at most `max_rounds` rounds. Accepted pairs are processed in descending
/// similarity, so the result is one-to-one and disjoint from the taken sets.
inline std::vector<BootstrapPair> bootstrap_augment(const SimilarityMatrix& sim, std::vector<bool> row_taken,
                                                    std::vector<bool> col_taken, double threshold,
                                                    int max_rounds = 1) {
  if (!(threshold > 0 && threshold <= 1)) throw ConfigError("bootstrap threshold must lie in (0, 1]");
  if (row_taken.size() != static_cast<std::size_t>(sim.rows()) ||
      col_taken.size() != static_cast<std::size_t>(sim.cols())) {
    throw ShapeError("taken masks do not match the similarity matrix");
  }
  std::vector<BootstrapPair> added;
  constexpr Eigen::Index none = -1;
  for (int round = 0; round < max_rounds; ++round) {
    std::vector<Eigen::Index> row_best(static_cast<std::size_t>(sim.rows()), none);
    std::vector<Eigen::Index> col_best(static_cast<std::size_t>(sim.cols()), none);
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
      if (row_taken[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < sim.cols(); ++j) {
        if (col_taken[static_cast<std::size_t>(j)]) continue;
        const double v = sim.values(i, j);
        auto& rb = row_best[static_cast<std::size_t>(i)];
        if (rb == none || v > sim.values(i, rb)) rb = j;
        auto& cb = col_best[static_cast<std::size_t>(j)];
        if (cb == none || v > sim.values(cb, j)) cb = i;
      }
    }
    std::vector<BootstrapPair> found;
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
      const auto j = row_best[static_cast<std::size_t>(i)];
      if (j == none || col_best[static_cast<std::size_t>(j)] != i) continue;
      if (sim.values(i, j) >= threshold) found.push_back({i, j, sim.values(i, j)});
    }
    if (found.empty()) break;
    std::sort(found.begin(), found.end(), [](const BootstrapPair& a, const BootstrapPair& b) {
      if (a.similarity != b.similarity) return a.similarity > b.similarity;
      return a.row < b.row;
    });
    for (const auto& p : found) {
      if (row_taken[static_cast<std::size_t>(p.row)] || col_taken[static_cast<std::size_t>(p.col)]) continue;
      row_taken[static_cast<std::size_t>(p.row)] = true;
      col_taken[static_cast<std::size_t>(p.col)] = true;
      added.push_back(p);
    }
  }
  return added;
}

/// Entity-level form: returns `train` followed by the newly aligned pairs,
/// found by cosine similarity between all KG1 and KG2 entity vectors.
inline std::vector<EntityPair> bootstrap_augment(const Matrix& kg1_vectors, const Matrix& kg2_vectors,
                                                 const std::vector<EntityPair>& train, double threshold,
                                                 int max_rounds = 1) {
  const auto sim = similarity_matrix(kg1_vectors, kg2_vectors, Metric::cosine);
  std::vector<bool> row_taken(static_cast<std::size_t>(sim.rows()), false);
  std::vector<bool> col_taken(static_cast<std::size_t>(sim.cols()), false);
  for (const auto& p : train) {
    row_taken.at(static_cast<std::size_t>(p.source)) = true;
    col_taken.at(static_cast<std::size_t>(p.target)) = true;
  }
  auto out = train;
  for (const auto& p : bootstrap_augment(sim, row_taken, col_taken, threshold, max_rounds)) {
    out.push_back({static_cast<EntityId>(p.row), static_cast<EntityId>(p.col)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared embedding space

/// Joint index space for two graphs. KG1 entity i -> joint i; a KG2 entity
/// that is the train counterpart of KG1 entity i also maps to i, every other
/// KG2 entity gets a fresh joint id. KG2 relations get fresh ids too, unless
/// `share_relations` is set and KG1 has a relation with the same URI.
struct JointSpace {
  std::size_t kg1_entities = 0;
  std::size_t kg2_entities = 0;
  std::vector<EntityId> kg2_to_joint;
  std::size_t entity_count = 0;
  std::vector<RelationId> kg2_relation_to_joint;
  std::size_t relation_count = 0;
  std::vector<Triple> triples;
  std::vector<std::uint8_t> triple_graph;  // 0: triple comes from KG1, 1: from KG2
  std::vector<EntityId> kg1_candidates;    // joint ids of KG1 entities
  std::vector<EntityId> kg2_candidates;    // joint ids of KG2 entities

  EntityId joint_of_kg1(EntityId e) const { return e; }
  EntityId joint_of_kg2(EntityId e) const { return kg2_to_joint.at(static_cast<std::size_t>(e)); }

  Matrix kg1_vectors(const EmbeddingTable& emb) const {
    return emb.entities.topRows(static_cast<Eigen::Index>(kg1_entities));
  }
  Matrix kg2_vectors(const EmbeddingTable& emb) const {
    Matrix out(static_cast<Eigen::Index>(kg2_entities), emb.dim());
    for (std::size_t e = 0; e < kg2_entities; ++e) out.row(static_cast<Eigen::Index>(e)) = emb.entities.row(kg2_to_joint[e]);
    return out;
  }
};

inline JointSpace build_joint_space(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                                    const std::vector<EntityPair>& train, bool share_relations = true) {
  JointSpace js;
  js.kg1_entities = kg1.entity_count();
  js.kg2_entities = kg2.entity_count();
  js.kg2_to_joint.assign(js.kg2_entities, -1);
  for (const auto& p : train) {
    if (!kg1.entities.contains(p.source) || !kg2.entities.contains(p.target)) {
      throw LookupError("train pair references an unknown entity");
    }
    js.kg2_to_joint[static_cast<std::size_t>(p.target)] = p.source;
  }
  auto next = static_cast<EntityId>(js.kg1_entities);
  for (auto& j : js.kg2_to_joint) {
    if (j < 0) j = next++;
  }
  js.entity_count = static_cast<std::size_t>(next);
  js.kg2_relation_to_joint.assign(kg2.relations.size(), -1);
  auto next_rel = static_cast<RelationId>(kg1.relations.size());
  for (std::size_t r = 0; r < kg2.relations.size(); ++r) {
    const auto shared = share_relations ? kg1.relations.find(kg2.relations.name(static_cast<RelationId>(r)))
                                        : std::nullopt;
    js.kg2_relation_to_joint[r] = shared ? *shared : next_rel++;
  }
  js.relation_count = static_cast<std::size_t>(next_rel);

  js.triples = kg1.rel_triples;
  js.triple_graph.assign(js.triples.size(), 0);
  std::unordered_set<Triple, TripleHash> seen(js.triples.begin(), js.triples.end());
  for (const auto& t : kg2.rel_triples) {
    const Triple jt{js.joint_of_kg2(t.head), js.kg2_relation_to_joint[static_cast<std::size_t>(t.relation)],
                    js.joint_of_kg2(t.tail)};
    if (seen.insert(jt).second) {
      js.triples.push_back(jt);
      js.triple_graph.push_back(1);
    }
  }
  for (std::size_t e = 0; e < js.kg1_entities; ++e) js.kg1_candidates.push_back(static_cast<EntityId>(e));
  js.kg2_candidates = js.kg2_to_joint;
  return js;
}

// ---------------------------------------------------------------------------
// Training

enum class TransMethod { mtranse, iptranse, bootea };

inline TransMethod parse_trans_method(const std::string& s) {
  if (s == "mtranse") return TransMethod::mtranse;
  if (s == "iptranse") return TransMethod::iptranse;
  if (s == "bootea") return TransMethod::bootea;
  throw ConfigError("unknown translation method '" + s + "'");
}

inline std::string to_string(TransMethod m) {
  switch (m) {
    case TransMethod::mtranse: return "mtranse";
    case TransMethod::iptranse: return "iptranse";
    case TransMethod::bootea: return "bootea";
  }
  return "unknown";
}

struct TransTrainConfig {
  TransMethod method = TransMethod::mtranse;
  LossConfig loss;
  std::size_t dim = 100;
  double learning_rate = 0.01;
  OptimizerKind optimizer = OptimizerKind::sgd;
  std::size_t batch_size = 5000;
  int max_epochs = 1000;
  int eval_every = 10;
  int patience = 10;
  bool unit_norm = true;
  bool share_relations = true;
  int nn_refresh_every = 10;
  double bootstrap_threshold = 0.7;
  int bootstrap_rounds = 1;
  std::uint64_t seed = 0;

  LossKind loss_kind() const { return method == TransMethod::bootea ? LossKind::contrastive : LossKind::triplet; }
  bool truncated_negatives() const { return method == TransMethod::bootea; }
  bool bootstraps() const { return method != TransMethod::mtranse; }

  void validate() const {
    loss.validate();
    if (dim == 0) throw ConfigError("dim must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
    if (eval_every <= 0) throw ConfigError("eval_every must be positive");
    if (patience <= 0) throw ConfigError("patience must be positive");
    if (nn_refresh_every <= 0) throw ConfigError("nn_refresh_every must be positive");
    if (bootstraps() && !(bootstrap_threshold > 0 && bootstrap_threshold <= 1)) {
      throw ConfigError("bootstrap_threshold must lie in (0, 1]");
    }
    if (bootstrap_rounds < 1) throw ConfigError("bootstrap_rounds must be >= 1");
  }
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0;
  std::optional<double> valid_hits1;  // fraction in [0, 1]
  std::size_t bootstrapped = 0;
};

struct TransTrainResult {
  EmbeddingTable embeddings;  // best-validation snapshot
  JointSpace space;
  int best_epoch = 0;
  std::optional<double> best_valid_hits1;
  int epochs_run = 0;
  std::vector<EpochRecord> log;
};

/// Validation Hits@1 (fraction) of KG1 -> KG2 cosine nearest neighbour over
/// the given pairs, candidates restricted to the pairs' targets.
inline double split_hits1(const Matrix& kg1_vectors, const Matrix& kg2_vectors, const std::vector<EntityPair>& pairs) {
  Matrix src(static_cast<Eigen::Index>(pairs.size()), kg1_vectors.cols());
  Matrix tgt(static_cast<Eigen::Index>(pairs.size()), kg2_vectors.cols());
  std::vector<GoldCell> gold;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    src.row(r) = kg1_vectors.row(pairs[i].source);
    tgt.row(r) = kg2_vectors.row(pairs[i].target);
    gold.push_back({r, r});
  }
  return hits_at_k(similarity_matrix(src, tgt, Metric::cosine), gold, 1) / 100.0;
}

/// Initial table: entries uniform in [-6/sqrt(d), 6/sqrt(d)], then every row
/// unit-normalised. Only entity rows are re-normalised during training.
inline EmbeddingTable init_embeddings(std::size_t entities, std::size_t relations, std::size_t dim, Rng& rng) {
  EmbeddingTable emb;
  emb.entities = uniform_init(static_cast<Eigen::Index>(entities), static_cast<Eigen::Index>(dim), rng);
  emb.relations = uniform_init(static_cast<Eigen::Index>(relations), static_cast<Eigen::Index>(dim), rng);
  normalize_rows(emb.entities);
  normalize_rows(emb.relations);
  return emb;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains shared-space translation embeddings. Validation Hits@1 is checked
/// every `eval_every` epochs (and after the last epoch); training stops after
/// `patience` evaluations without improvement and the best snapshot is
/// returned. Single-threaded and bit-reproducible for a fixed seed.
inline TransTrainResult train_trans(const KnowledgeGraph& kg1, const KnowledgeGraph& kg2, const SeedAlignment& seeds,
                                    const TransTrainConfig& config, const EpochCallback& on_epoch = {}) {
  config.validate();
  const auto train_pairs = seeds.train();
  const auto valid_pairs = seeds.valid();
  if (train_pairs.empty()) throw ConfigError("training needs at least one train seed");

  TransTrainResult result;
  result.space = build_joint_space(kg1, kg2, train_pairs, config.share_relations);
  const auto& space = result.space;
  if (space.triples.empty()) throw ConfigError("no relation triples to train on");

  Rng rng = derive_rng(config.seed, 1);
  EmbeddingTable emb = init_embeddings(space.entity_count, space.relation_count, config.dim, rng);
  result.embeddings = emb;

  const TripleIndex index(space.entity_count, space.triples);
  Optimizer ent_opt(config.optimizer, config.learning_rate);
  Optimizer rel_opt(config.optimizer, config.learning_rate);
  NeighborPool pools[2];
  const std::span<const EntityId> candidates[2] = {space.kg1_candidates, space.kg2_candidates};

  // Bootstrapped pairs live in joint coordinates and are refreshed each
  // evaluation; gold train pairs already share a row.
  std::vector<std::pair<EntityId, EntityId>> boot_pairs;
  std::vector<bool> kg1_gold(space.kg1_entities, false);
  std::vector<bool> kg2_gold(space.kg2_entities, false);
  for (const auto& p : train_pairs) {
    kg1_gold[static_cast<std::size_t>(p.source)] = true;
    kg2_gold[static_cast<std::size_t>(p.target)] = true;
  }

  std::vector<std::size_t> order(space.triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  EmbeddingTable grad;
  int stale = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (config.truncated_negatives() && (epoch - 1) % config.nn_refresh_every == 0) {
      for (int g = 0; g < 2; ++g) pools[g] = NeighborPool(emb.entities, config.loss.epsilon, candidates[g]);
    }
    shuffle(order.begin(), order.end(), rng);

    double loss = 0;
    std::vector<Triple> batch;
    std::vector<NegativeTriple> negatives;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      negatives.clear();
      for (std::size_t i = start; i < stop; ++i) {
        const auto& pos = space.triples[order[i]];
        const auto graph = space.triple_graph[order[i]];
        batch.push_back(pos);
        auto negs = config.truncated_negatives()
                        ? sample_negatives_truncated(pos, batch.size() - 1, index, pools[graph],
                                                     config.loss.negatives_per_positive, rng)
                        : sample_negatives_uniform(pos, batch.size() - 1, index, candidates[graph],
                                                   config.loss.negatives_per_positive, rng);
        negatives.insert(negatives.end(), negs.begin(), negs.end());
      }
      grad.entities = Matrix::Zero(emb.entities.rows(), emb.entities.cols());
      grad.relations = Matrix::Zero(emb.relations.rows(), emb.relations.cols());
      loss += loss_and_gradient(emb, batch, negatives, config.loss, config.loss_kind(), &grad);
      ent_opt.step(emb.entities, grad.entities);
      rel_opt.step(emb.relations, grad.relations);
      if (config.unit_norm) normalize_rows(emb.entities);
    }

    if (!boot_pairs.empty()) {
      // Pull bootstrapped pairs together: one step on 0.5 * ||e1 - e2||^2.
      for (const auto& [a, b] : boot_pairs) {
        const Vector diff = (emb.entities.row(a) - emb.entities.row(b)).transpose();
        emb.entities.row(a) -= config.learning_rate * diff.transpose();
        emb.entities.row(b) += config.learning_rate * diff.transpose();
      }
      if (config.unit_norm) normalize_rows(emb.entities);
    }

    if (!std::isfinite(loss) || !emb.all_finite()) throw TrainingError("training diverged", epoch);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss;
    result.epochs_run = epoch;

    const bool evaluate_now = epoch % config.eval_every == 0 || epoch == config.max_epochs;
    if (evaluate_now) {
      const Matrix v1 = space.kg1_vectors(emb);
      const Matrix v2 = space.kg2_vectors(emb);
      if (config.bootstraps()) {
        const auto sim = similarity_matrix(v1, v2, Metric::cosine);
        boot_pairs.clear();
        for (const auto& p : bootstrap_augment(sim, kg1_gold, kg2_gold, config.bootstrap_threshold,
                                               config.bootstrap_rounds)) {
          boot_pairs.emplace_back(space.joint_of_kg1(static_cast<EntityId>(p.row)),
                                  space.joint_of_kg2(static_cast<EntityId>(p.col)));
        }
        rec.bootstrapped = boot_pairs.size();
      }
      if (!valid_pairs.empty()) {
        const double h1 = split_hits1(v1, v2, valid_pairs);
        rec.valid_hits1 = h1;
        if (!result.best_valid_hits1 || h1 > *result.best_valid_hits1) {
          result.best_valid_hits1 = h1;
          result.best_epoch = epoch;
          result.embeddings = emb;
          stale = 0;
        } else {
          ++stale;
        }
      } else {
        result.best_epoch = epoch;
        result.embeddings = emb;
      }
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stale >= config.patience) break;
  }
  return result;
}

}  // namespace eatk
