#pragma once

// Synthetic "isomorphic twin" datasets: one random graph, copied into a second
// graph under different URIs and a different triple order. Every entity is
// linked to its twin.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "eatk/embedding.hpp"
#include "eatk/kg.hpp"
#include "eatk/rng.hpp"

namespace eatk {

struct TwinSpec {
  std::size_t entities = 200;
  std::size_t relations = 10;
  std::size_t extra_triples = 800;  // on top of a spanning chain of entities - 1 triples
  std::size_t attributes = 20;
  std::size_t attributes_per_entity = 3;
  double skew = 0.8;  // endpoint popularity ~ 1 / (rank + 1)^skew
  std::uint64_t seed = 7;
};

namespace detail {

struct RawTriple {
  std::size_t head, relation, tail;
};

inline std::size_t draw_weighted(const std::vector<double>& cumulative, Rng& rng) {
  const double x = uniform_unit(rng) * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                           static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
}

}  // namespace detail

inline Dataset make_twin_dataset(const TwinSpec& spec) {
  Rng rng = derive_rng(spec.seed, 11);
  const auto n = spec.entities;

  std::vector<double> cumulative(n);
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += 1.0 / std::pow(static_cast<double>(i + 1), spec.skew);
    cumulative[i] = acc;
  }

  std::vector<detail::RawTriple> raw;
  std::vector<std::size_t> chain(n);
  for (std::size_t i = 0; i < n; ++i) chain[i] = i;
  shuffle(chain.begin(), chain.end(), rng);
  for (std::size_t i = 1; i < n; ++i) {
    raw.push_back({chain[i - 1], uniform_index(rng, spec.relations), chain[i]});
  }
  for (std::size_t k = 0; k < spec.extra_triples; ++k) {
    const auto h = detail::draw_weighted(cumulative, rng);
    auto t = uniform_index(rng, n);
    if (t == h) t = (t + 1) % n;
    raw.push_back({h, uniform_index(rng, spec.relations), t});
  }

  struct RawAttr {
    std::size_t entity, attribute;
  };
  std::vector<RawAttr> attrs;
  if (spec.attributes > 0) {
    for (std::size_t e = 0; e < n; ++e) {
      for (std::size_t k = 0; k < spec.attributes_per_entity; ++k) {
        attrs.push_back({e, uniform_index(rng, spec.attributes)});
      }
    }
  }

  const auto fill = [&](KnowledgeGraph& kg, const std::string& prefix, const std::vector<std::size_t>& triple_order,
                        const std::vector<std::size_t>& attr_order) {
    const auto ent = [&](std::size_t e) { return prefix + "/entity/" + std::to_string(e); };
    std::unordered_set<Triple, TripleHash> seen;
    for (auto i : triple_order) {
      const auto& t = raw[i];
      const Triple triple{kg.entities.intern(ent(t.head)),
                          kg.relations.intern("relation/" + std::to_string(t.relation)),
                          kg.entities.intern(ent(t.tail))};
      if (seen.insert(triple).second) kg.rel_triples.push_back(triple);
    }
    std::unordered_set<AttrTriple, AttrTripleHash> seen_attr;
    for (auto i : attr_order) {
      const auto& a = attrs[i];
      const AttrTriple triple{kg.entities.intern(ent(a.entity)),
                              kg.attributes.intern("attribute/" + std::to_string(a.attribute)),
                              kg.values.intern("\"" + std::to_string(a.entity % 97) + "\"")};
      if (seen_attr.insert(triple).second) kg.attr_triples.push_back(triple);
    }
  };

  std::vector<std::size_t> order1(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) order1[i] = i;
  auto order2 = order1;
  shuffle(order2.begin(), order2.end(), rng);
  std::vector<std::size_t> attr1(attrs.size());
  for (std::size_t i = 0; i < attrs.size(); ++i) attr1[i] = i;
  auto attr2 = attr1;
  shuffle(attr2.begin(), attr2.end(), rng);

  Dataset ds;
  fill(ds.kg1, "kg1", order1, attr1);
  fill(ds.kg2, "kg2", order2, attr2);
  for (std::size_t e = 0; e < n; ++e) {
    ds.links.push_back({ds.kg1.entities.at("kg1/entity/" + std::to_string(e)),
                        ds.kg2.entities.at("kg2/entity/" + std::to_string(e))});
  }
  return ds;
}

struct NameVectorSpec {
  Eigen::Index dim = 64;
  double high_fraction = 0.5;
  double high_similarity = 0.9;
  double low_similarity = 0.1;
  std::uint64_t seed = 3;
};

struct TwinNames {
  NamedVectors kg1, kg2;
};

/// Name vectors for every linked pair whose cosine is exactly high_similarity
/// for a random high_fraction of the pairs and low_similarity for the rest.
inline TwinNames make_name_vectors(const Dataset& ds, const NameVectorSpec& spec) {
  Rng rng = derive_rng(spec.seed, 13);
  const auto n = static_cast<Eigen::Index>(ds.links.size());
  TwinNames out;
  out.kg1.vectors.resize(n, spec.dim);
  out.kg2.vectors.resize(n, spec.dim);
  const auto gaussian = [&] {
    Vector v(spec.dim);
    for (Eigen::Index j = 0; j < spec.dim; ++j) {
      // Box-Muller keeps the stream independent of the standard library.
      const double u1 = 1.0 - uniform_unit(rng), u2 = uniform_unit(rng);
      v(j) = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    return v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& link = ds.links[static_cast<std::size_t>(i)];
    const double s = uniform_unit(rng) < spec.high_fraction ? spec.high_similarity : spec.low_similarity;
    Vector u = gaussian().normalized();
    Vector w = gaussian();
    w -= w.dot(u) * u;
    w.normalize();
    out.kg1.vectors.row(i) = u.transpose();
    out.kg2.vectors.row(i) = (s * u + std::sqrt(1.0 - s * s) * w).transpose();
    out.kg1.names.push_back(ds.kg1.entities.name(link.source));
    out.kg2.names.push_back(ds.kg2.entities.name(link.target));
    out.kg1.index.emplace(out.kg1.names.back(), i);
    out.kg2.index.emplace(out.kg2.names.back(), i);
  }
  return out;
}

}  // namespace eatk
