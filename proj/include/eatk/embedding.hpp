#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "eatk/error.hpp"
#include "eatk/rng.hpp"
#include "eatk/tsv.hpp"

namespace eatk {

/// One entity (or relation) per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct EmbeddingTable {
  Matrix entities;
  Matrix relations;

  Eigen::Index dim() const noexcept { return entities.cols(); }

  bool all_finite() const { return entities.allFinite() && relations.allFinite(); }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.entities.rows() == b.entities.rows() && a.entities.cols() == b.entities.cols() &&
           a.relations.rows() == b.relations.rows() && a.relations.cols() == b.relations.cols() &&
           a.entities == b.entities && a.relations == b.relations;
  }
};

inline void normalize_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > 0) m.row(i) /= n;
  }
}

/// Entries uniform in [-6/sqrt(d), 6/sqrt(d)].
inline Matrix uniform_init(Eigen::Index rows, Eigen::Index dim, Rng& rng) {
  Matrix m(rows, dim);
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = (2.0 * uniform_unit(rng) - 1.0) * bound;
  }
  return m;
}

/// Vectors keyed by URI, as read from "uri\tv1 v2 ... vd" files.
struct NamedVectors {
  std::vector<std::string> names;
  Matrix vectors;
  std::unordered_map<std::string, Eigen::Index> index;

  std::size_t size() const noexcept { return names.size(); }
  Eigen::Index dim() const noexcept { return vectors.cols(); }
  bool contains(const std::string& name) const { return index.count(name) != 0; }

  Eigen::Index row_of(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw LookupError("no vector for '" + name + "'");
    return it->second;
  }
};

inline void write_vectors_tsv(const std::filesystem::path& path, const std::vector<std::string>& names,
                              const Matrix& vectors) {
  if (static_cast<Eigen::Index>(names.size()) != vectors.rows()) {
    throw ShapeError("name count does not match vector rows");
  }
  auto out = tsv::open_output(path);
  std::string line;
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    line = names[static_cast<std::size_t>(i)];
    line += '\t';
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
      if (j > 0) line += ' ';
      tsv::append_number(line, vectors(i, j));
    }
    line += '\n';
    out << line;
  }
}

inline NamedVectors read_vectors_tsv(const std::filesystem::path& path) {
  std::vector<std::string> names;
  std::vector<double> flat;
  Eigen::Index dim = -1;
  tsv::for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(path.string(), lineno, "missing tab separator");
    const auto values = tsv::split(line.substr(tab + 1), ' ');
    Eigen::Index count = 0;
    for (auto v : values) {
      if (v.empty()) continue;
      double x = 0;
      if (!tsv::parse_number(v, x)) throw ParseError(path.string(), lineno, "bad number '" + std::string(v) + "'");
      flat.push_back(x);
      ++count;
    }
    if (dim < 0) dim = count;
    if (count != dim || count == 0) {
      throw ParseError(path.string(), lineno,
                       "ragged vector: expected dimension " + std::to_string(dim) + ", found " + std::to_string(count));
    }
    names.emplace_back(line.substr(0, tab));
  });

  NamedVectors nv;
  nv.names = std::move(names);
  const auto rows = static_cast<Eigen::Index>(nv.names.size());
  nv.vectors = rows == 0 ? Matrix(0, 0) : Matrix(Eigen::Map<const Matrix>(flat.data(), rows, dim));
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!nv.index.emplace(nv.names[static_cast<std::size_t>(i)], i).second) {
      throw DataError(path.string() + ": duplicate entry '" + nv.names[static_cast<std::size_t>(i)] + "'");
    }
  }
  return nv;
}

/// Gathers rows for `names` in order; reports every missing name at once.
inline Matrix gather_rows(const NamedVectors& table, const std::vector<std::string>& names) {
  Matrix out(static_cast<Eigen::Index>(names.size()), table.dim());
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto it = table.index.find(names[i]);
    if (it == table.index.end()) {
      missing.push_back(names[i]);
      continue;
    }
    out.row(static_cast<Eigen::Index>(i)) = table.vectors.row(it->second);
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " entities have no vector:";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) msg += " " + missing[i];
    throw LookupError(msg);
  }
  return out;
}

}  // namespace eatk
