#pragma once

// Alignment inference (nearest neighbour, CSLS) and evaluation: Hits@k, MRR,
// h-score and the degree / degree-difference bucket reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eatk/embedding.hpp"
#include "eatk/error.hpp"
#include "eatk/kg.hpp"
#include "eatk/parallel.hpp"
#include "json.hpp"

namespace eatk {

enum class Metric { cosine, neg_l1, neg_l2, csls };

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::cosine: return "cosine";
    case Metric::neg_l1: return "neg_l1";
    case Metric::neg_l2: return "neg_l2";
    case Metric::csls: return "csls";
  }
  return "unknown";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "neg_l1" || s == "l1") return Metric::neg_l1;
  if (s == "neg_l2" || s == "l2") return Metric::neg_l2;
  throw ConfigError("unknown similarity metric '" + s + "'");
}

/// |source| x |target|; larger means more similar.
struct SimilarityMatrix {
  Matrix values;
  Metric metric = Metric::cosine;

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index cols() const noexcept { return values.cols(); }
};

inline SimilarityMatrix similarity_matrix(const Matrix& source, const Matrix& target, Metric metric,
                                          unsigned threads = 1) {
  if (source.cols() != target.cols()) {
    throw ShapeError("embedding dimensions differ: " + std::to_string(source.cols()) + " vs " +
                     std::to_string(target.cols()));
  }
  SimilarityMatrix sim;
  sim.metric = metric;
  sim.values.resize(source.rows(), target.rows());
  switch (metric) {
    case Metric::cosine: {
      Matrix s = source;
      Matrix t = target;
      normalize_rows(s);
      normalize_rows(t);
      sim.values.noalias() = s * t.transpose();
      break;
    }
    case Metric::neg_l1:
    case Metric::neg_l2:
      parallel_for(static_cast<std::size_t>(source.rows()), threads, [&](std::size_t i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < target.rows(); ++j) {
          const auto diff = source.row(r) - target.row(j);
          sim.values(r, j) = metric == Metric::neg_l1 ? -diff.cwiseAbs().sum() : -diff.norm();
        }
      });
      break;
    case Metric::csls:
      throw ConfigError("csls is a rescaling of another metric; use csls_rescale");
  }
  return sim;
}

namespace detail {

template <class Range>
double mean_of_top_k(Range values, std::size_t k) {
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(), std::greater<>());
  double sum = 0;
  for (std::size_t i = 0; i < k; ++i) sum += v[i];
  return sum / static_cast<double>(k);
}

}  // namespace detail

/// Cross-domain similarity local scaling:
///   csls(i, j) = 2 sim(i, j) - r_T(i) - r_S(j)
/// with r_T(i) the mean of row i's k largest entries and r_S(j) the mean of
/// column j's k largest entries.
inline SimilarityMatrix csls_rescale(const SimilarityMatrix& sim, std::size_t k) {
  const auto rows = static_cast<std::size_t>(sim.rows());
  const auto cols = static_cast<std::size_t>(sim.cols());
  if (k < 1 || k > std::min(rows, cols)) {
    throw ConfigError("csls k=" + std::to_string(k) + " outside [1, " + std::to_string(std::min(rows, cols)) + "]");
  }
  Vector row_mean(sim.rows());
  Vector col_mean(sim.cols());
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    const auto row = sim.values.row(i);
    row_mean(i) = detail::mean_of_top_k(std::vector<double>(row.begin(), row.end()), k);
  }
  for (Eigen::Index j = 0; j < sim.cols(); ++j) {
    const auto col = sim.values.col(j);
    col_mean(j) = detail::mean_of_top_k(std::vector<double>(col.begin(), col.end()), k);
  }
  SimilarityMatrix out;
  out.metric = Metric::csls;
  out.values = 2.0 * sim.values;
  out.values.colwise() -= row_mean;
  out.values.rowwise() -= col_mean.transpose();
  return out;
}

inline constexpr std::int64_t kUnassigned = -1;

struct AlignmentResult {
  /// top1[row] is a target column, or kUnassigned (injective mode with more
  /// sources than targets).
  std::vector<std::int64_t> top1;
  bool injective = false;
};

/// Per-row argmax (ties -> lowest column), or, when `injective`, global greedy
/// matching that repeatedly takes the largest entry whose row and column are
/// both still free (ties -> lowest row, then lowest column).
inline AlignmentResult align_top1(const SimilarityMatrix& sim, bool injective = false) {
  if (sim.rows() == 0 || sim.cols() == 0) throw EvaluationError("cannot align an empty similarity matrix");
  AlignmentResult res;
  res.injective = injective;
  res.top1.assign(static_cast<std::size_t>(sim.rows()), kUnassigned);
  if (!injective) {
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < sim.cols(); ++j) {
        if (sim.values(i, j) > sim.values(i, best)) best = j;
      }
      res.top1[static_cast<std::size_t>(i)] = best;
    }
    return res;
  }

  struct Cell {
    double value;
    Eigen::Index row;
    Eigen::Index col;
  };
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(sim.rows() * sim.cols()));
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    for (Eigen::Index j = 0; j < sim.cols(); ++j) cells.push_back({sim.values(i, j), i, j});
  }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  std::vector<bool> col_used(static_cast<std::size_t>(sim.cols()), false);
  std::size_t remaining = static_cast<std::size_t>(std::min(sim.rows(), sim.cols()));
  for (const auto& c : cells) {
    if (remaining == 0) break;
    auto& slot = res.top1[static_cast<std::size_t>(c.row)];
    if (slot != kUnassigned || col_used[static_cast<std::size_t>(c.col)]) continue;
    slot = c.col;
    col_used[static_cast<std::size_t>(c.col)] = true;
    --remaining;
  }
  return res;
}

/// A gold correspondence expressed in similarity-matrix coordinates.
struct GoldCell {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
};

/// Rank of the gold column in its row: 1 + number of strictly larger entries.
inline std::vector<std::size_t> gold_ranks(const SimilarityMatrix& sim, const std::vector<GoldCell>& gold) {
  std::vector<std::size_t> ranks;
  ranks.reserve(gold.size());
  for (const auto& g : gold) {
    if (g.row < 0 || g.row >= sim.rows() || g.col < 0 || g.col >= sim.cols()) {
      throw EvaluationError("gold pair (" + std::to_string(g.row) + ", " + std::to_string(g.col) +
                            ") outside the similarity matrix");
    }
    const double v = sim.values(g.row, g.col);
    std::size_t greater = 0;
    for (Eigen::Index j = 0; j < sim.cols(); ++j) greater += static_cast<std::size_t>(sim.values(g.row, j) > v);
    ranks.push_back(greater + 1);
  }
  return ranks;
}

inline double hits_from_ranks(const std::vector<std::size_t>& ranks, std::size_t k) {
  if (ranks.empty()) throw EvaluationError("no gold pairs to evaluate");
  const auto hit = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return 100.0 * static_cast<double>(hit) / static_cast<double>(ranks.size());
}

inline double mrr_from_ranks(const std::vector<std::size_t>& ranks) {
  if (ranks.empty()) throw EvaluationError("no gold pairs to evaluate");
  double sum = 0;
  for (auto r : ranks) sum += 1.0 / static_cast<double>(r);
  return sum / static_cast<double>(ranks.size());
}

/// Percentage of gold sources whose counterpart ranks within the top k.
inline double hits_at_k(const SimilarityMatrix& sim, const std::vector<GoldCell>& gold, std::size_t k) {
  return hits_from_ranks(gold_ranks(sim, gold), k);
}

inline double mrr(const SimilarityMatrix& sim, const std::vector<GoldCell>& gold) {
  return mrr_from_ranks(gold_ranks(sim, gold));
}

/// Number of sources aligned to each target column.
inline std::vector<std::size_t> hub_counts(const AlignmentResult& result, std::size_t target_entity_count) {
  std::vector<std::size_t> counts(target_entity_count, 0);
  for (auto t : result.top1) {
    if (t == kUnassigned) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= target_entity_count) {
      throw EvaluationError("alignment target " + std::to_string(t) + " outside target range");
    }
    ++counts[static_cast<std::size_t>(t)];
  }
  return counts;
}

/// Hubness score: hub(z) = (#sources aligned with z) / target_entity_count,
/// summed over the ceil(10%) targets with the largest hub values.
inline double h_score(const AlignmentResult& result, std::size_t target_entity_count) {
  if (result.top1.empty()) throw EvaluationError("h-score of an empty alignment");
  if (target_entity_count == 0) throw EvaluationError("h-score needs at least one target entity");
  auto counts = hub_counts(result, target_entity_count);
  const std::size_t hub_set_size = (target_entity_count + 9) / 10;
  // Ties at the boundary do not change the sum, so a value-only partial sort suffices.
  std::partial_sort(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(hub_set_size), counts.end(),
                    std::greater<>());
  std::size_t aligned = 0;
  for (std::size_t i = 0; i < hub_set_size; ++i) aligned += counts[i];
  return static_cast<double>(aligned) / static_cast<double>(target_entity_count);
}

// ---------------------------------------------------------------------------
// Bucket reports

struct Bucket {
  std::string label;
  std::optional<long> lo;  // inclusive; nullopt = unbounded
  std::optional<long> hi;  // inclusive; nullopt = unbounded
  std::size_t support = 0;
  std::size_t correct = 0;

  /// Hits@1 percent; empty when support is 0.
  std::optional<double> hits1() const {
    if (support == 0) return std::nullopt;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(support);
  }
  bool contains(long v) const { return (!lo || v >= *lo) && (!hi || v <= *hi); }
};

using BucketTable = std::vector<Bucket>;

/// Buckets from ascending inclusive upper edges e0 < e1 < ...:
/// (-inf, e0], [e0+1, e1], ..., [e_last+1, inf).
inline BucketTable make_buckets(const std::vector<long>& upper_edges) {
  if (!std::is_sorted(upper_edges.begin(), upper_edges.end()) ||
      std::adjacent_find(upper_edges.begin(), upper_edges.end()) != upper_edges.end()) {
    throw ConfigError("bucket edges must be strictly increasing");
  }
  BucketTable table;
  std::optional<long> lo;
  auto range_label = [](std::optional<long> a, std::optional<long> b) {
    if (!a) return "<=" + std::to_string(*b);
    if (!b) return ">=" + std::to_string(*a);
    if (*a == *b) return std::to_string(*a);
    return std::to_string(*a) + ".." + std::to_string(*b);
  };
  for (long e : upper_edges) {
    table.push_back({range_label(lo, e), lo, e, 0, 0});
    lo = e + 1;
  }
  if (lo) {
    table.push_back({range_label(lo, std::nullopt), lo, std::nullopt, 0, 0});
  } else {
    table.push_back({"all", std::nullopt, std::nullopt, 0, 0});
  }
  return table;
}

inline const std::vector<long>& default_degree_edges() {
  static const std::vector<long> edges{1, 2, 3, 5, 10};
  return edges;
}

inline const std::vector<long>& default_degree_diff_edges() {
  static const std::vector<long> edges{-5, -2, 1, 4};
  return edges;
}

namespace detail {

inline bool top1_correct(const AlignmentResult& result, const GoldCell& g) {
  if (g.row < 0 || static_cast<std::size_t>(g.row) >= result.top1.size()) {
    throw EvaluationError("gold row " + std::to_string(g.row) + " missing from alignment result");
  }
  return result.top1[static_cast<std::size_t>(g.row)] == g.col;
}

inline void tally(BucketTable& table, long value, bool correct) {
  for (auto& b : table) {
    if (b.contains(value)) {
      ++b.support;
      b.correct += static_cast<std::size_t>(correct);
      return;
    }
  }
}

inline EntityId entity_at(const std::vector<EntityId>& ids, Eigen::Index index) {
  if (index < 0 || static_cast<std::size_t>(index) >= ids.size()) {
    throw EvaluationError("matrix index " + std::to_string(index) + " has no entity id");
  }
  return ids[static_cast<std::size_t>(index)];
}

}  // namespace detail

/// Top-1 accuracy bucketed by the source entity's degree in `kg_source`.
/// `row_entities[r]` is the KG entity id of similarity row r.
inline BucketTable degree_bucket_report(const AlignmentResult& result, const std::vector<GoldCell>& gold,
                                        const KnowledgeGraph& kg_source, const std::vector<EntityId>& row_entities,
                                        const std::vector<long>& bucket_edges = default_degree_edges()) {
  auto table = make_buckets(bucket_edges);
  const auto deg = degrees(kg_source);
  for (const auto& g : gold) {
    const auto e = detail::entity_at(row_entities, g.row);
    if (!kg_source.entities.contains(e)) throw EvaluationError("unknown source entity " + std::to_string(e));
    detail::tally(table, static_cast<long>(deg[static_cast<std::size_t>(e)]), detail::top1_correct(result, g));
  }
  return table;
}

/// Top-1 accuracy bucketed by the signed degree difference
/// degree_kg1(source) - degree_kg2(target) of each gold pair.
inline BucketTable degree_diff_report(const AlignmentResult& result, const std::vector<GoldCell>& gold,
                                      const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                                      const std::vector<EntityId>& row_entities,
                                      const std::vector<EntityId>& col_entities,
                                      const std::vector<long>& bucket_edges = default_degree_diff_edges()) {
  auto table = make_buckets(bucket_edges);
  const auto deg1 = degrees(kg1);
  const auto deg2 = degrees(kg2);
  for (const auto& g : gold) {
    const auto e1 = detail::entity_at(row_entities, g.row);
    const auto e2 = detail::entity_at(col_entities, g.col);
    if (!kg1.entities.contains(e1) || !kg2.entities.contains(e2)) {
      throw EvaluationError("gold pair references an unknown entity");
    }
    const long delta = static_cast<long>(deg1[static_cast<std::size_t>(e1)]) -
                       static_cast<long>(deg2[static_cast<std::size_t>(e2)]);
    detail::tally(table, delta, detail::top1_correct(result, g));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Report

inline constexpr int kReportSchemaVersion = 1;

struct EvalReport {
  std::string variant = "plain";
  std::map<std::size_t, double> hits_at;  // k -> percent
  double mrr = 0;
  double h_score = 0;
  std::size_t test_size = 0;
  BucketTable degree_buckets;
  BucketTable degree_diff_buckets;
};

inline nlohmann::json to_json(const BucketTable& table) {
  auto arr = nlohmann::json::array();
  for (const auto& b : table) {
    nlohmann::json j{{"label", b.label}, {"support", b.support}, {"correct", b.correct}};
    j["lo"] = b.lo ? nlohmann::json(*b.lo) : nlohmann::json(nullptr);
    j["hi"] = b.hi ? nlohmann::json(*b.hi) : nlohmann::json(nullptr);
    const auto h = b.hits1();
    j["hits1"] = h ? nlohmann::json(*h) : nlohmann::json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

inline BucketTable bucket_table_from_json(const nlohmann::json& arr) {
  BucketTable table;
  for (const auto& j : arr) {
    Bucket b;
    b.label = j.at("label").get<std::string>();
    b.support = j.at("support").get<std::size_t>();
    b.correct = j.at("correct").get<std::size_t>();
    if (!j.at("lo").is_null()) b.lo = j.at("lo").get<long>();
    if (!j.at("hi").is_null()) b.hi = j.at("hi").get<long>();
    table.push_back(std::move(b));
  }
  return table;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json hits = nlohmann::json::object();
  for (const auto& [k, v] : r.hits_at) hits[std::to_string(k)] = v;
  return {{"variant", r.variant},
          {"hits_at", hits},
          {"mrr", r.mrr},
          {"h_score", r.h_score},
          {"test_size", r.test_size},
          {"degree_buckets", to_json(r.degree_buckets)},
          {"degree_diff_buckets", to_json(r.degree_diff_buckets)}};
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.variant = j.at("variant").get<std::string>();
  for (const auto& [k, v] : j.at("hits_at").items()) r.hits_at[std::stoul(k)] = v.get<double>();
  r.mrr = j.at("mrr").get<double>();
  r.h_score = j.at("h_score").get<double>();
  r.test_size = j.at("test_size").get<std::size_t>();
  r.degree_buckets = bucket_table_from_json(j.at("degree_buckets"));
  r.degree_diff_buckets = bucket_table_from_json(j.at("degree_diff_buckets"));
  return r;
}

/// Everything the report needs, evaluated on one similarity matrix whose
/// rows/columns correspond to `row_entities` / `col_entities`.
inline EvalReport evaluate(const SimilarityMatrix& sim, const std::vector<GoldCell>& gold, bool injective,
                           const KnowledgeGraph& kg1, const KnowledgeGraph& kg2,
                           const std::vector<EntityId>& row_entities, const std::vector<EntityId>& col_entities,
                           const std::vector<std::size_t>& ks = {1, 5, 10}) {
  EvalReport r;
  const auto ranks = gold_ranks(sim, gold);
  const auto top1 = align_top1(sim, injective);
  for (auto k : ks) r.hits_at[k] = hits_from_ranks(ranks, k);
  if (injective) {
    const auto correct = std::count_if(gold.begin(), gold.end(),
                                       [&](const GoldCell& g) { return detail::top1_correct(top1, g); });
    r.hits_at[1] = 100.0 * static_cast<double>(correct) / static_cast<double>(gold.size());
  }
  r.mrr = mrr_from_ranks(ranks);
  r.h_score = h_score(top1, static_cast<std::size_t>(sim.cols()));
  r.test_size = gold.size();
  r.degree_buckets = degree_bucket_report(top1, gold, kg1, row_entities);
  r.degree_diff_buckets = degree_diff_report(top1, gold, kg1, kg2, row_entities, col_entities);
  return r;
}

}  // namespace eatk
