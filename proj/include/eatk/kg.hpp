#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "eatk/error.hpp"
#include "eatk/log.hpp"
#include "eatk/rng.hpp"
#include "eatk/tsv.hpp"
#include "json.hpp"

namespace eatk {

using EntityId = std::int32_t;
using RelationId = std::int32_t;
using AttributeId = std::int32_t;
using ValueId = std::int32_t;

/// Bijective string <-> dense id mapping. Ids follow first-insertion order.
class Vocabulary {
 public:
  std::int32_t intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::int32_t>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
  }

  std::optional<std::int32_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::int32_t at(std::string_view name) const {
    if (auto id = find(name)) return *id;
    throw LookupError("unknown identifier '" + std::string(name) + "'");
  }

  const std::string& name(std::int32_t id) const {
    if (!contains(id)) throw LookupError("id " + std::to_string(id) + " out of range");
    return names_[static_cast<std::size_t>(id)];
  }

  bool contains(std::int32_t id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < names_.size();
  }

  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct AttrTriple {
  EntityId entity = 0;
  AttributeId attribute = 0;
  ValueId value = 0;
  friend auto operator<=>(const AttrTriple&, const AttrTriple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t h = splitmix64(static_cast<std::uint32_t>(t.head));
    h = splitmix64(h ^ static_cast<std::uint32_t>(t.relation));
    return static_cast<std::size_t>(splitmix64(h ^ static_cast<std::uint32_t>(t.tail)));
  }
};

struct AttrTripleHash {
  std::size_t operator()(const AttrTriple& t) const noexcept {
    return TripleHash{}(Triple{t.entity, t.attribute, t.value});
  }
};

/// A knowledge graph: four vocabularies plus deduplicated relation and
/// attribute triples. Treated as immutable once built.
struct KnowledgeGraph {
  Vocabulary entities;
  Vocabulary relations;
  Vocabulary attributes;
  Vocabulary values;
  std::vector<Triple> rel_triples;
  std::vector<AttrTriple> attr_triples;

  std::size_t entity_count() const noexcept { return entities.size(); }

  friend bool operator==(const KnowledgeGraph&, const KnowledgeGraph&) = default;
};

namespace detail {

inline std::array<std::string_view, 3> three_fields(std::string_view line, const std::filesystem::path& path,
                                                    std::size_t lineno) {
  const auto fields = tsv::split(line);
  if (fields.size() != 3) {
    throw ParseError(path.string(), lineno,
                     "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
  }
  return {fields[0], fields[1], fields[2]};
}

}  // namespace detail

/// Loads relation triples ("head\trelation\ttail") and attribute triples
/// ("entity\tattribute\tvalue"). Duplicates are dropped, keeping the first
/// occurrence. Entity ids are assigned in first-occurrence order across the
/// relation file, then the attribute file.
inline KnowledgeGraph load_kg(const std::filesystem::path& rel_triple_path,
                              const std::filesystem::path& attr_triple_path) {
  KnowledgeGraph kg;
  std::size_t dropped = 0;

  std::unordered_set<Triple, TripleHash> seen_rel;
  tsv::for_each_line(rel_triple_path, [&](std::string_view line, std::size_t lineno) {
    const auto [h, r, t] = detail::three_fields(line, rel_triple_path, lineno);
    const Triple triple{kg.entities.intern(h), kg.relations.intern(r), kg.entities.intern(t)};
    if (seen_rel.insert(triple).second) {
      kg.rel_triples.push_back(triple);
    } else {
      ++dropped;
    }
  });

  std::unordered_set<AttrTriple, AttrTripleHash> seen_attr;
  tsv::for_each_line(attr_triple_path, [&](std::string_view line, std::size_t lineno) {
    const auto [e, a, v] = detail::three_fields(line, attr_triple_path, lineno);
    const AttrTriple triple{kg.entities.intern(e), kg.attributes.intern(a), kg.values.intern(v)};
    if (seen_attr.insert(triple).second) {
      kg.attr_triples.push_back(triple);
    } else {
      ++dropped;
    }
  });

  if (dropped > 0) {
    log::info("dropped " + std::to_string(dropped) + " duplicate triples from " + rel_triple_path.string() +
              " / " + attr_triple_path.string());
  }
  return kg;
}

inline void write_kg(const KnowledgeGraph& kg, const std::filesystem::path& rel_triple_path,
                     const std::filesystem::path& attr_triple_path) {
  {
    auto out = tsv::open_output(rel_triple_path);
    for (const auto& t : kg.rel_triples) {
      out << kg.entities.name(t.head) << '\t' << kg.relations.name(t.relation) << '\t'
          << kg.entities.name(t.tail) << '\n';
    }
  }
  auto out = tsv::open_output(attr_triple_path);
  for (const auto& t : kg.attr_triples) {
    out << kg.entities.name(t.entity) << '\t' << kg.attributes.name(t.attribute) << '\t'
        << kg.values.name(t.value) << '\n';
  }
}

/// Number of relation triples in which the entity occurs as head or tail.
/// A self-loop counts twice.
inline std::size_t degree(const KnowledgeGraph& kg, EntityId entity) {
  if (!kg.entities.contains(entity)) throw LookupError("unknown entity id " + std::to_string(entity));
  std::size_t d = 0;
  for (const auto& t : kg.rel_triples) {
    d += static_cast<std::size_t>(t.head == entity) + static_cast<std::size_t>(t.tail == entity);
  }
  return d;
}

/// All degrees at once, indexed by entity id.
inline std::vector<std::size_t> degrees(const KnowledgeGraph& kg) {
  std::vector<std::size_t> d(kg.entity_count(), 0);
  for (const auto& t : kg.rel_triples) {
    ++d[static_cast<std::size_t>(t.head)];
    ++d[static_cast<std::size_t>(t.tail)];
  }
  return d;
}

struct DatasetStats {
  std::size_t entity_count = 0;
  std::size_t relation_count = 0;
  std::size_t attribute_count = 0;
  std::size_t rel_triple_count = 0;
  std::size_t attr_triple_count = 0;
  std::map<std::size_t, std::size_t> degree_histogram;
};

inline DatasetStats dataset_stats(const KnowledgeGraph& kg) {
  DatasetStats s;
  s.entity_count = kg.entity_count();
  s.relation_count = kg.relations.size();
  s.attribute_count = kg.attributes.size();
  s.rel_triple_count = kg.rel_triples.size();
  s.attr_triple_count = kg.attr_triples.size();
  for (auto d : degrees(kg)) ++s.degree_histogram[d];
  return s;
}

inline nlohmann::json to_json(const DatasetStats& s) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [deg, count] : s.degree_histogram) hist[std::to_string(deg)] = count;
  return {{"entity_count", s.entity_count},
          {"relation_count", s.relation_count},
          {"attribute_count", s.attribute_count},
          {"rel_triple_count", s.rel_triple_count},
          {"attr_triple_count", s.attr_triple_count},
          {"degree_histogram", hist}};
}

// ---------------------------------------------------------------------------
// Gold links and seed splits

struct EntityPair {
  EntityId source = 0;  // id in KG1
  EntityId target = 0;  // id in KG2
  friend auto operator<=>(const EntityPair&, const EntityPair&) = default;
};

using UriPair = std::pair<std::string, std::string>;

inline std::vector<UriPair> load_links(const std::filesystem::path& path) {
  std::vector<UriPair> links;
  tsv::for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    const auto fields = tsv::split(line);
    if (fields.size() != 2) {
      throw ParseError(path.string(), lineno,
                       "expected 2 tab-separated fields, found " + std::to_string(fields.size()));
    }
    links.emplace_back(std::string(fields[0]), std::string(fields[1]));
  });
  return links;
}

inline void write_links(const std::filesystem::path& path, const std::vector<EntityPair>& pairs,
                        const KnowledgeGraph& kg1, const KnowledgeGraph& kg2) {
  auto out = tsv::open_output(path);
  for (const auto& p : pairs) out << kg1.entities.name(p.source) << '\t' << kg2.entities.name(p.target) << '\n';
}

/// Throws DataError if an entity occurs in more than one pair.
inline void check_one_to_one(const std::vector<EntityPair>& pairs) {
  std::unordered_set<EntityId> src;
  std::unordered_set<EntityId> tgt;
  for (const auto& p : pairs) {
    if (!src.insert(p.source).second || !tgt.insert(p.target).second) {
      throw DataError("gold links are not one-to-one (entity pair " + std::to_string(p.source) + ", " +
                      std::to_string(p.target) + ")");
    }
  }
}

/// Maps URI pairs to ids. Every URI must already exist in its graph.
inline std::vector<EntityPair> resolve_links(const std::vector<UriPair>& links, const KnowledgeGraph& kg1,
                                             const KnowledgeGraph& kg2) {
  std::vector<EntityPair> pairs;
  pairs.reserve(links.size());
  std::vector<std::string> missing;
  for (const auto& [a, b] : links) {
    const auto ia = kg1.entities.find(a);
    const auto ib = kg2.entities.find(b);
    if (!ia) missing.push_back(a);
    if (!ib) missing.push_back(b);
    if (ia && ib) pairs.push_back({*ia, *ib});
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " linked entities not found:";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) msg += " " + missing[i];
    throw LookupError(msg);
  }
  check_one_to_one(pairs);
  return pairs;
}

enum class SplitTag : std::uint8_t { train, valid, test };

struct SplitRatios {
  double train = 0.2;
  double valid = 0.1;
  double test = 0.7;
};

struct SeedAlignment {
  std::vector<EntityPair> pairs;
  std::vector<SplitTag> tags;

  std::vector<EntityPair> with_tag(SplitTag tag) const {
    std::vector<EntityPair> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (tags[i] == tag) out.push_back(pairs[i]);
    }
    return out;
  }
  std::vector<EntityPair> train() const { return with_tag(SplitTag::train); }
  std::vector<EntityPair> valid() const { return with_tag(SplitTag::valid); }
  std::vector<EntityPair> test() const { return with_tag(SplitTag::test); }
};

/// Shuffles the pairs with `rng_seed` and cuts them into contiguous
/// train/valid/test runs. Split sizes are rounded; test takes the remainder.
inline SeedAlignment split_seeds(const std::vector<EntityPair>& pairs, const SplitRatios& ratios,
                                 std::uint64_t rng_seed) {
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  if (pairs.empty()) throw ConfigError("cannot split an empty set of gold links");

  SeedAlignment seeds;
  seeds.pairs = pairs;
  Rng rng(rng_seed);
  shuffle(seeds.pairs.begin(), seeds.pairs.end(), rng);

  const auto n = pairs.size();
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n))));
  const auto n_valid =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios.valid * static_cast<double>(n))));
  seeds.tags.assign(n, SplitTag::test);
  std::fill_n(seeds.tags.begin(), n_train, SplitTag::train);
  std::fill_n(seeds.tags.begin() + static_cast<std::ptrdiff_t>(n_train), n_valid, SplitTag::valid);
  return seeds;
}

// ---------------------------------------------------------------------------
// Dataset directory: rel_triples_{1,2}, attr_triples_{1,2}, ent_links

struct Dataset {
  KnowledgeGraph kg1;
  KnowledgeGraph kg2;
  std::vector<EntityPair> links;
};

namespace detail {

/// Entities named only in ent_links are interned after all triple entities
/// so they show up with degree 0.
inline void intern_linked(KnowledgeGraph& kg, const std::vector<UriPair>& links, bool first) {
  for (const auto& [a, b] : links) kg.entities.intern(first ? a : b);
}

}  // namespace detail

inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.kg1 = load_kg(dir / "rel_triples_1", dir / "attr_triples_1");
  ds.kg2 = load_kg(dir / "rel_triples_2", dir / "attr_triples_2");
  const auto uri_links = load_links(dir / "ent_links");
  detail::intern_linked(ds.kg1, uri_links, true);
  detail::intern_linked(ds.kg2, uri_links, false);
  ds.links = resolve_links(uri_links, ds.kg1, ds.kg2);
  return ds;
}

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  write_kg(ds.kg1, dir / "rel_triples_1", dir / "attr_triples_1");
  write_kg(ds.kg2, dir / "rel_triples_2", dir / "attr_triples_2");
  write_links(dir / "ent_links", ds.links, ds.kg1, ds.kg2);
}

}  // namespace eatk
