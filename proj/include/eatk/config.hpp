#pragma once

// Experiment configuration: one JSON file with nested sections. Every key has
// a default here; unknown keys are rejected. The effective config (defaults
// filled in) is what gets written next to the outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "eatk/error.hpp"
#include "eatk/gcn_align.hpp"
#include "eatk/kg.hpp"
#include "eatk/lnb_sampler.hpp"
#include "eatk/matcher.hpp"
#include "eatk/optim.hpp"
#include "eatk/trans_align.hpp"
#include "json.hpp"

namespace eatk {

enum class CslsMode { off, on, automatic };

inline CslsMode parse_csls_mode(const std::string& s) {
  if (s == "off") return CslsMode::off;
  if (s == "on") return CslsMode::on;
  if (s == "auto") return CslsMode::automatic;
  throw ConfigError("csls must be off, on or auto (got '" + s + "')");
}

inline std::string to_string(CslsMode m) {
  switch (m) {
    case CslsMode::off: return "off";
    case CslsMode::on: return "on";
    case CslsMode::automatic: return "auto";
  }
  return "off";
}

struct MatcherConfig {
  std::string metric = "auto";  // "auto": the metric the training method recommends
  CslsMode csls = CslsMode::off;
  std::size_t csls_k = 10;
  bool injective = false;
  std::vector<std::size_t> ks{1, 5, 10};
};

struct SampleConfig {
  SamplerConfig sampler{10, 0, 1.0, 0};
  std::string names_1 = "name_embeds_1.tsv";  // relative to the dataset directory
  std::string names_2 = "name_embeds_2.tsv";
};

inline const std::set<std::string>& known_methods() {
  static const std::set<std::string> m{"mtranse", "iptranse", "bootea", "gcnalign"};
  return m;
}

struct ExperimentConfig {
  std::string dataset;
  std::string method = "mtranse";
  SplitRatios split;
  std::uint64_t seed = 0;
  std::string output_dir = "runs";
  std::string run_name;  // empty: "<timestamp>-seed<seed>"
  unsigned threads = 1;
  TransTrainConfig trans;
  GcnTrainConfig gcn;
  MatcherConfig matcher;
  SampleConfig sample;

  bool is_trans() const { return method != "gcnalign"; }

  /// Checks the fields the chosen method will use, plus the shared ones.
  void validate() const {
    if (!known_methods().count(method)) {
      throw ConfigError("unknown method '" + method + "' (expected mtranse, iptranse, bootea or gcnalign)");
    }
    const double sum = split.train + split.valid + split.test;
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    if (split.train <= 0 || split.valid < 0 || split.test <= 0) throw ConfigError("split ratios out of range");
    if (threads == 0) throw ConfigError("threads must be positive");
    if (is_trans()) {
      auto t = trans;
      t.method = parse_trans_method(method);
      t.validate();
    } else {
      gcn.validate();
    }
    if (matcher.metric != "auto") parse_metric(matcher.metric);
    if (matcher.csls_k == 0) throw ConfigError("csls_k must be positive");
    if (matcher.ks.empty()) throw ConfigError("matcher.ks must not be empty");
    for (auto k : matcher.ks) {
      if (k == 0) throw ConfigError("matcher.ks entries must be positive");
    }
  }

  TransTrainConfig trans_config() const {
    auto t = trans;
    t.method = parse_trans_method(method);
    t.seed = seed;
    return t;
  }

  GcnTrainConfig gcn_config() const {
    auto g = gcn;
    g.seed = seed;
    return g;
  }

  /// Similarity the trained embeddings are meant to be compared with.
  Metric recommended_metric() const { return is_trans() ? Metric::cosine : gcn.metric; }

  Metric eval_metric() const {
    return matcher.metric == "auto" ? recommended_metric() : parse_metric(matcher.metric);
  }
};

namespace detail {

/// Reads keys out of one JSON object, remembering which were consumed so that
/// leftovers can be reported as unknown.
class SectionReader {
 public:
  SectionReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (it->is_number_integer() && it->template get<long long>() < 0) {
        throw ConfigError(where() + key + ": must not be negative");
      }
    }
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where() + key + ": wrong type");
    }
  }

  template <class T, class Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_string()) throw ConfigError(where() + key + ": expected a string");
    out = parse(it->template get<std::string>());
  }

  SectionReader section(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return SectionReader(it == j_.end() ? empty : *it, path_ + key + ".");
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + path_ + k + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? std::string("config: ") : path_; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::SectionReader r(j, "");
  r.get("dataset", c.dataset);
  r.get("method", c.method);
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  r.get("run_name", c.run_name);
  r.get("threads", c.threads);
  {
    auto s = r.section("split");
    s.get("train", c.split.train);
    s.get("valid", c.split.valid);
    s.get("test", c.split.test);
    s.finish();
  }
  {
    auto t = r.section("trans");
    auto& tc = c.trans;
    t.get("dim", tc.dim);
    t.get("learning_rate", tc.learning_rate);
    t.get_enum("optimizer", tc.optimizer, parse_optimizer);
    t.get("batch_size", tc.batch_size);
    t.get("max_epochs", tc.max_epochs);
    t.get("eval_every", tc.eval_every);
    t.get("patience", tc.patience);
    t.get("unit_norm", tc.unit_norm);
    t.get("share_relations", tc.share_relations);
    t.get("nn_refresh_every", tc.nn_refresh_every);
    t.get("bootstrap_threshold", tc.bootstrap_threshold);
    t.get("bootstrap_rounds", tc.bootstrap_rounds);
    auto l = t.section("loss");
    l.get("gamma", tc.loss.gamma);
    l.get("gamma1", tc.loss.gamma1);
    l.get("gamma2", tc.loss.gamma2);
    l.get("beta", tc.loss.beta);
    l.get("epsilon", tc.loss.epsilon);
    l.get("negatives_per_positive", tc.loss.negatives_per_positive);
    l.get_enum("norm", tc.loss.norm, parse_norm);
    l.finish();
    t.finish();
  }
  {
    auto g = r.section("gcn");
    auto& gc = c.gcn;
    g.get("dim", gc.dim);
    g.get("learning_rate", gc.learning_rate);
    g.get_enum("optimizer", gc.optimizer, parse_optimizer);
    g.get("margin_structure", gc.margin_structure);
    g.get("margin_attribute", gc.margin_attribute);
    g.get("negatives_per_positive", gc.negatives_per_positive);
    g.get("mix", gc.mix);
    g.get("max_epochs", gc.max_epochs);
    g.get("eval_every", gc.eval_every);
    g.get("patience", gc.patience);
    g.get_enum("metric", gc.metric, parse_metric);
    g.get_enum("feature_init", gc.feature_init, parse_feature_init);
    g.get("tie_seed_features", gc.tie_seed_features);
    g.finish();
  }
  {
    auto m = r.section("matcher");
    m.get("metric", c.matcher.metric);
    m.get_enum("csls", c.matcher.csls, parse_csls_mode);
    m.get("csls_k", c.matcher.csls_k);
    m.get("injective", c.matcher.injective);
    m.get("ks", c.matcher.ks);
    m.finish();
  }
  {
    auto s = r.section("sample");
    s.get("num_bins", c.sample.sampler.num_bins);
    s.get("target_pair_count", c.sample.sampler.target_pair_count);
    s.get("drop_scale", c.sample.sampler.drop_scale);
    s.get("names_1", c.sample.names_1);
    s.get("names_2", c.sample.names_2);
    s.finish();
  }
  r.finish();
  return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& t = c.trans;
  const auto& g = c.gcn;
  return {
      {"dataset", c.dataset},
      {"method", c.method},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"run_name", c.run_name},
      {"threads", c.threads},
      {"split", {{"train", c.split.train}, {"valid", c.split.valid}, {"test", c.split.test}}},
      {"trans",
       {{"dim", t.dim},
        {"learning_rate", t.learning_rate},
        {"optimizer", to_string(t.optimizer)},
        {"batch_size", t.batch_size},
        {"max_epochs", t.max_epochs},
        {"eval_every", t.eval_every},
        {"patience", t.patience},
        {"unit_norm", t.unit_norm},
        {"share_relations", t.share_relations},
        {"nn_refresh_every", t.nn_refresh_every},
        {"bootstrap_threshold", t.bootstrap_threshold},
        {"bootstrap_rounds", t.bootstrap_rounds},
        {"loss",
         {{"gamma", t.loss.gamma},
          {"gamma1", t.loss.gamma1},
          {"gamma2", t.loss.gamma2},
          {"beta", t.loss.beta},
          {"epsilon", t.loss.epsilon},
          {"negatives_per_positive", t.loss.negatives_per_positive},
          {"norm", to_string(t.loss.norm)}}}}},
      {"gcn",
       {{"dim", g.dim},
        {"learning_rate", g.learning_rate},
        {"optimizer", to_string(g.optimizer)},
        {"margin_structure", g.margin_structure},
        {"margin_attribute", g.margin_attribute},
        {"negatives_per_positive", g.negatives_per_positive},
        {"mix", g.mix},
        {"max_epochs", g.max_epochs},
        {"eval_every", g.eval_every},
        {"patience", g.patience},
        {"metric", to_string(g.metric)},
        {"feature_init", to_string(g.feature_init)},
        {"tie_seed_features", g.tie_seed_features}}},
      {"matcher",
       {{"metric", c.matcher.metric},
        {"csls", to_string(c.matcher.csls)},
        {"csls_k", c.matcher.csls_k},
        {"injective", c.matcher.injective},
        {"ks", c.matcher.ks}}},
      {"sample",
       {{"num_bins", c.sample.sampler.num_bins},
        {"target_pair_count", c.sample.sampler.target_pair_count},
        {"drop_scale", c.sample.sampler.drop_scale},
        {"names_1", c.sample.names_1},
        {"names_2", c.sample.names_2}}}};
}

inline nlohmann::json load_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return config_from_json(load_config_json(path)); }

/// Applies "a.b.c=value" to a raw config object. The value is read as JSON
/// when it parses (numbers, booleans, arrays), otherwise as a plain string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: '" + assignment + "'");
  const auto key = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad override key '" + key + "'");
    if (!node->is_object()) throw ConfigError("override '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

/// Relative dataset paths resolve against $EATK_DATA_ROOT when it is set.
inline std::filesystem::path resolve_dataset(const std::string& dataset) {
  if (dataset.empty()) throw ConfigError("no dataset given");
  std::filesystem::path p(dataset);
  if (p.is_relative()) {
    if (const char* root = std::getenv("EATK_DATA_ROOT"); root && *root) return std::filesystem::path(root) / p;
  }
  return p;
}

}  // namespace eatk
