#pragma once

// Low-name-bias sampling: stratify linked pairs by source-side degree, draw
// each bin's share at random, and drop candidates with a probability that
// grows with the name similarity of the pair.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eatk/embedding.hpp"
#include "eatk/error.hpp"
#include "eatk/kg.hpp"
#include "eatk/matcher.hpp"
#include "eatk/rng.hpp"
#include "json.hpp"

namespace eatk {

using NameEmbeddingTable = NamedVectors;

inline NameEmbeddingTable load_name_embeddings(const std::filesystem::path& path) { return read_vectors_tsv(path); }

struct SamplerConfig {
  std::size_t num_bins = 10;
  std::size_t target_pair_count = 0;
  double drop_scale = 1.0;
  std::uint64_t seed = 0;

  void validate(std::size_t available) const {
    if (num_bins == 0) throw ConfigError("num_bins must be positive");
    if (target_pair_count == 0) throw ConfigError("target_pair_count must be positive");
    if (target_pair_count > available) {
      throw ConfigError("target_pair_count " + std::to_string(target_pair_count) + " exceeds the " +
                        std::to_string(available) + " available linked pairs");
    }
    if (!(drop_scale > 0.0 && drop_scale <= 1.0)) throw ConfigError("drop_scale must lie in (0, 1]");
  }
};

inline double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

/// Cosine similarity of the name vectors of every linked pair, in link order.
inline std::vector<double> pair_name_similarity(const std::vector<EntityPair>& links, const KnowledgeGraph& kg1,
                                                const KnowledgeGraph& kg2, const NameEmbeddingTable& names1,
                                                const NameEmbeddingTable& names2) {
  if (!links.empty() && names1.dim() != names2.dim()) {
    throw ShapeError("name vector dimensions differ: " + std::to_string(names1.dim()) + " vs " +
                     std::to_string(names2.dim()));
  }
  std::vector<std::string> missing;
  for (const auto& p : links) {
    const auto& a = kg1.entities.name(p.source);
    const auto& b = kg2.entities.name(p.target);
    if (!names1.contains(a)) missing.push_back(a);
    if (!names2.contains(b)) missing.push_back(b);
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " linked entities have no name vector:";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) msg += " " + missing[i];
    throw LookupError(msg);
  }
  std::vector<double> sims;
  sims.reserve(links.size());
  for (const auto& p : links) {
    const Vector a = names1.vectors.row(names1.row_of(kg1.entities.name(p.source))).transpose();
    const Vector b = names2.vectors.row(names2.row_of(kg2.entities.name(p.target))).transpose();
    sims.push_back(cosine(a, b));
  }
  return sims;
}

struct DegreeBin {
  std::size_t lo = 0, hi = 0;  // inclusive degree range covered by the bin
  std::vector<std::size_t> members;  // indices into the link list
};

/// Equal-width bins over [min, max] of source-side degree. The last bin is
/// closed on the right.
inline std::vector<DegreeBin> bin_by_degree(const KnowledgeGraph& kg, const std::vector<EntityPair>& links,
                                            std::size_t num_bins) {
  if (num_bins == 0) throw ConfigError("num_bins must be positive");
  std::vector<DegreeBin> bins(num_bins);
  if (links.empty()) return bins;
  const auto deg = degrees(kg);
  std::vector<std::size_t> d(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) d[i] = deg.at(static_cast<std::size_t>(links[i].source));
  const auto [lo_it, hi_it] = std::minmax_element(d.begin(), d.end());
  const std::size_t lo = *lo_it, hi = *hi_it, span = hi - lo;

  const auto bin_of = [&](std::size_t degree) -> std::size_t {
    if (span == 0) return 0;
    return std::min(num_bins - 1, (degree - lo) * num_bins / span);
  };
  for (std::size_t b = 0; b < num_bins; ++b) {
    bins[b].lo = hi + 1;
    bins[b].hi = lo;
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    auto& bin = bins[bin_of(d[i])];
    bin.members.push_back(i);
    bin.lo = std::min(bin.lo, d[i]);
    bin.hi = std::max(bin.hi, d[i]);
  }
  for (auto& bin : bins) {
    if (bin.members.empty()) bin.lo = bin.hi = 0;
  }
  return bins;
}

struct BinOutcome {
  std::size_t lo = 0, hi = 0;
  std::size_t size = 0;
  std::size_t quota = 0;
  std::size_t retained = 0;
  std::size_t dropped = 0;
};

struct SampleResult {
  std::vector<std::size_t> kept;  // indices into the link list, ascending
  std::vector<BinOutcome> bins;
  double mean_similarity_before = 0;
  double mean_similarity_after = 0;
};

inline double mean_of(const std::vector<double>& values, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  double s = 0;
  for (auto i : idx) s += values[i];
  return s / static_cast<double>(idx.size());
}

/// Per bin: shuffle the members, then walk them in order, dropping each with
/// probability drop_scale * max(0, sim), until the bin's quota
/// ceil(target * bin / total) is kept or the bin runs out. Walking a random
/// permutation is the same as drawing a candidate set and re-drawing from the
/// remainder after drops. Throws SamplerError when fewer than
/// target_pair_count pairs survive once every bin is exhausted.
inline SampleResult sample_low_name_bias(const KnowledgeGraph& kg1, const std::vector<EntityPair>& links,
                                         const std::vector<double>& name_sims, const SamplerConfig& config) {
  config.validate(links.size());
  if (name_sims.size() != links.size()) {
    throw ShapeError("name similarities cover " + std::to_string(name_sims.size()) + " of " +
                     std::to_string(links.size()) + " links");
  }
  const auto bins = bin_by_degree(kg1, links, config.num_bins);
  const auto total = static_cast<std::uint64_t>(links.size());

  SampleResult res;
  std::vector<Rng> rngs;
  std::vector<std::vector<std::size_t>> orders;
  std::vector<std::size_t> cursor(bins.size(), 0);
  const auto draw = [&](std::size_t b) {
    const auto i = orders[b][cursor[b]++];
    const double p = std::clamp(config.drop_scale * std::max(0.0, name_sims[i]), 0.0, 1.0);
    if (uniform_unit(rngs[b]) < p) {
      ++res.bins[b].dropped;
    } else {
      res.kept.push_back(i);
      ++res.bins[b].retained;
    }
  };
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const auto& bin = bins[b];
    const auto size = static_cast<std::uint64_t>(bin.members.size());
    const auto quota = static_cast<std::size_t>((config.target_pair_count * size + total - 1) / total);
    res.bins.push_back({bin.lo, bin.hi, bin.members.size(), quota, 0, 0});
    rngs.push_back(derive_rng(config.seed, b));
    orders.push_back(bin.members);
    shuffle(orders[b].begin(), orders[b].end(), rngs[b]);
    while (res.bins[b].retained < quota && cursor[b] < orders[b].size()) draw(b);
  }
  // Bins exhausted before meeting their quota leave a deficit; the bins with
  // members left make it up one draw at a time, round robin.
  bool progress = true;
  while (res.kept.size() < config.target_pair_count && progress) {
    progress = false;
    for (std::size_t b = 0; b < bins.size() && res.kept.size() < config.target_pair_count; ++b) {
      if (cursor[b] == orders[b].size()) continue;
      draw(b);
      progress = true;
    }
  }
  std::sort(res.kept.begin(), res.kept.end());

  if (res.kept.size() < config.target_pair_count) {
    const auto shortfall = config.target_pair_count - res.kept.size();
    throw SamplerError("sampler kept " + std::to_string(res.kept.size()) + " of " +
                           std::to_string(config.target_pair_count) + " requested pairs (shortfall " +
                           std::to_string(shortfall) + ")",
                       shortfall);
  }
  std::vector<std::size_t> all(links.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  res.mean_similarity_before = mean_of(name_sims, all);
  res.mean_similarity_after = mean_of(name_sims, res.kept);
  return res;
}

/// Keeps the listed entities (in their original id order), relation triples
/// with both endpoints kept, and attribute triples of kept entities.
/// Relations, attributes and values are re-interned in order of first use.
inline KnowledgeGraph induce_subgraph(const KnowledgeGraph& kg, const std::vector<EntityId>& keep_entities) {
  std::vector<char> keep(kg.entity_count(), 0);
  for (auto e : keep_entities) {
    if (!kg.entities.contains(e)) throw LookupError("unknown entity id " + std::to_string(e));
    keep[static_cast<std::size_t>(e)] = 1;
  }
  KnowledgeGraph out;
  std::vector<EntityId> remap(kg.entity_count(), -1);
  for (std::size_t e = 0; e < keep.size(); ++e) {
    if (keep[e]) remap[e] = out.entities.intern(kg.entities.name(static_cast<EntityId>(e)));
  }
  for (const auto& t : kg.rel_triples) {
    const auto h = remap[static_cast<std::size_t>(t.head)], tl = remap[static_cast<std::size_t>(t.tail)];
    if (h < 0 || tl < 0) continue;
    out.rel_triples.push_back({h, out.relations.intern(kg.relations.name(t.relation)), tl});
  }
  for (const auto& t : kg.attr_triples) {
    const auto e = remap[static_cast<std::size_t>(t.entity)];
    if (e < 0) continue;
    out.attr_triples.push_back(
        {e, out.attributes.intern(kg.attributes.name(t.attribute)), out.values.intern(kg.values.name(t.value))});
  }
  return out;
}

using DegreeHistogram = std::map<std::size_t, double>;

/// Fraction of entities at each degree.
inline DegreeHistogram degree_histogram(const KnowledgeGraph& kg) {
  if (kg.entity_count() == 0) throw DataError("degree histogram of an empty graph");
  DegreeHistogram h;
  const auto deg = degrees(kg);
  const double w = 1.0 / static_cast<double>(deg.size());
  for (auto d : deg) h[d] += w;
  return h;
}

inline double l1_distance(const DegreeHistogram& a, const DegreeHistogram& b) {
  double s = 0;
  for (const auto& [d, p] : a) {
    auto it = b.find(d);
    s += std::abs(p - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [d, p] : b) {
    if (!a.count(d)) s += p;
  }
  return s;
}

inline double compare_degree_distributions(const KnowledgeGraph& a, const KnowledgeGraph& b) {
  return l1_distance(degree_histogram(a), degree_histogram(b));
}

/// Hits@1 of nearest-neighbour search over name vectors, restricted to the
/// given pairs: how often the closest target name (cosine) is the counterpart.
inline double name_nn_hits1(const std::vector<EntityPair>& pairs, const KnowledgeGraph& kg1,
                            const KnowledgeGraph& kg2, const NameEmbeddingTable& names1,
                            const NameEmbeddingTable& names2) {
  if (pairs.empty()) return 0.0;
  std::vector<std::string> a, b;
  for (const auto& p : pairs) {
    a.push_back(kg1.entities.name(p.source));
    b.push_back(kg2.entities.name(p.target));
  }
  const auto sim = similarity_matrix(gather_rows(names1, a), gather_rows(names2, b), Metric::cosine);
  const auto top = align_top1(sim);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) hit += static_cast<std::size_t>(top.top1[i] == static_cast<std::int64_t>(i));
  return static_cast<double>(hit) / static_cast<double>(pairs.size());
}

struct LnbSample {
  Dataset dataset;
  SampleResult result;
  double degree_distance_kg1 = 0;
  double degree_distance_kg2 = 0;
};

/// Samples pairs and materializes the sub-dataset: both graphs induced on the
/// kept linked entities, links re-resolved in the new id spaces.
inline LnbSample sample_dataset(const Dataset& ds, const std::vector<double>& name_sims, const SamplerConfig& config) {
  LnbSample out;
  out.result = sample_low_name_bias(ds.kg1, ds.links, name_sims, config);
  std::vector<EntityId> keep1, keep2;
  for (auto i : out.result.kept) {
    keep1.push_back(ds.links[i].source);
    keep2.push_back(ds.links[i].target);
  }
  out.dataset.kg1 = induce_subgraph(ds.kg1, keep1);
  out.dataset.kg2 = induce_subgraph(ds.kg2, keep2);
  for (auto i : out.result.kept) {
    out.dataset.links.push_back({out.dataset.kg1.entities.at(ds.kg1.entities.name(ds.links[i].source)),
                                 out.dataset.kg2.entities.at(ds.kg2.entities.name(ds.links[i].target))});
  }
  out.degree_distance_kg1 = compare_degree_distributions(ds.kg1, out.dataset.kg1);
  out.degree_distance_kg2 = compare_degree_distributions(ds.kg2, out.dataset.kg2);
  return out;
}

inline nlohmann::json provenance_json(const SamplerConfig& config, const LnbSample& s) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : s.result.bins) {
    bins.push_back({{"degree_lo", b.lo},
                    {"degree_hi", b.hi},
                    {"size", b.size},
                    {"quota", b.quota},
                    {"retained", b.retained},
                    {"dropped", b.dropped}});
  }
  return {{"config",
           {{"num_bins", config.num_bins},
            {"target_pair_count", config.target_pair_count},
            {"drop_scale", config.drop_scale},
            {"seed", config.seed}}},
          {"retained_pairs", s.result.kept.size()},
          {"bins", bins},
          {"mean_name_similarity_before", s.result.mean_similarity_before},
          {"mean_name_similarity_after", s.result.mean_similarity_after},
          {"degree_distance_kg1", s.degree_distance_kg1},
          {"degree_distance_kg2", s.degree_distance_kg2}};
}

}  // namespace eatk
