#pragma once

// The four experiment commands behind the CLI. Each takes a validated config,
// writes everything under one run directory and returns that directory.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "eatk/config.hpp"
#include "eatk/embedding.hpp"
#include "eatk/gcn_align.hpp"
#include "eatk/kg.hpp"
#include "eatk/lnb_sampler.hpp"
#include "eatk/log.hpp"
#include "eatk/matcher.hpp"
#include "eatk/trans_align.hpp"
#include "eatk/tsv.hpp"
#include "json.hpp"

namespace eatk {

namespace fs = std::filesystem;

inline std::string default_run_name(std::uint64_t seed) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return std::string(buf) + "-seed" + std::to_string(seed);
}

/// Fills in the run name and creates the run directory.
inline fs::path prepare_run_dir(ExperimentConfig& config) {
  if (config.run_name.empty()) config.run_name = default_run_name(config.seed);
  const fs::path dir = fs::path(config.output_dir) / config.run_name;
  fs::create_directories(dir);
  return dir;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = tsv::open_output(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline std::string optional_number(const std::optional<double>& v) { return v ? tsv::format_number(*v) : "null"; }

// ---------------------------------------------------------------------------
// train

inline fs::path cmd_train(ExperimentConfig config) {
  config.validate();
  const auto data_dir = resolve_dataset(config.dataset);
  const auto ds = load_dataset(data_dir);
  const auto seeds = split_seeds(ds.links, config.split, config.seed);
  log::info("loaded " + data_dir.string() + ": " + std::to_string(ds.kg1.entity_count()) + " + " +
            std::to_string(ds.kg2.entity_count()) + " entities, " + std::to_string(ds.links.size()) + " links");

  const auto dir = prepare_run_dir(config);
  write_json(dir / "config.json", to_json(config));
  write_links(dir / "train_links.tsv", seeds.train(), ds.kg1, ds.kg2);
  write_links(dir / "valid_links.tsv", seeds.valid(), ds.kg1, ds.kg2);
  write_links(dir / "test_links.tsv", seeds.test(), ds.kg1, ds.kg2);

  nlohmann::json meta{{"method", config.method},
                      {"dataset", data_dir.string()},
                      {"seed", config.seed},
                      {"metric", to_string(config.recommended_metric())},
                      {"deterministic", config.threads == 1},
                      {"kg1_entities", ds.kg1.entity_count()},
                      {"kg2_entities", ds.kg2.entity_count()},
                      {"train_pairs", seeds.train().size()},
                      {"valid_pairs", seeds.valid().size()},
                      {"test_pairs", seeds.test().size()}};
  const auto started = std::chrono::steady_clock::now();

  if (config.is_trans()) {
    auto log_out = tsv::open_output(dir / "training_log.csv");
    log_out << "epoch,loss,valid_hits1,bootstrapped\n";
    const auto on_epoch = [&](const EpochRecord& r) {
      log_out << r.epoch << ',' << tsv::format_number(r.loss) << ',' << optional_number(r.valid_hits1) << ','
              << r.bootstrapped << '\n';
      if (r.valid_hits1) {
        log::info("epoch " + std::to_string(r.epoch) + " loss " + tsv::format_number(r.loss) + " valid hits@1 " +
                  tsv::format_number(*r.valid_hits1));
      }
    };
    const auto res = train_trans(ds.kg1, ds.kg2, seeds, config.trans_config(), on_epoch);
    write_vectors_tsv(dir / "ent_embeds_1.tsv", ds.kg1.entities.names(), res.space.kg1_vectors(res.embeddings));
    write_vectors_tsv(dir / "ent_embeds_2.tsv", ds.kg2.entities.names(), res.space.kg2_vectors(res.embeddings));
    meta["dim"] = res.embeddings.dim();
    meta["best_epoch"] = res.best_epoch;
    meta["epochs_run"] = res.epochs_run;
    meta["best_valid_hits1"] = res.best_valid_hits1 ? nlohmann::json(*res.best_valid_hits1) : nlohmann::json(nullptr);
  } else {
    auto log_out = tsv::open_output(dir / "training_log.csv");
    log_out << "epoch,structure_loss,attribute_loss,valid_hits1\n";
    const auto on_epoch = [&](const GcnEpochRecord& r) {
      log_out << r.epoch << ',' << tsv::format_number(r.structure_loss) << ','
              << tsv::format_number(r.attribute_loss) << ',' << optional_number(r.valid_hits1) << '\n';
      if (r.valid_hits1) {
        log::info("epoch " + std::to_string(r.epoch) + " valid hits@1 " + tsv::format_number(*r.valid_hits1));
      }
    };
    const auto gc = config.gcn_config();
    const auto res = train_gcnalign(ds.kg1, ds.kg2, seeds, gc, on_epoch);
    const Matrix s1 = res.kg1_rows(res.structure), s2 = res.kg2_rows(res.structure);
    const Matrix a1 = res.kg1_rows(res.attribute), a2 = res.kg2_rows(res.attribute);
    write_vectors_tsv(dir / "struct_embeds_1.tsv", ds.kg1.entities.names(), s1);
    write_vectors_tsv(dir / "struct_embeds_2.tsv", ds.kg2.entities.names(), s2);
    write_vectors_tsv(dir / "attr_embeds_1.tsv", ds.kg1.entities.names(), a1);
    write_vectors_tsv(dir / "attr_embeds_2.tsv", ds.kg2.entities.names(), a2);
    // Under negative L1, mix * sim_s + (1 - mix) * sim_a is exactly the
    // similarity of the concatenated, scaled vectors.
    const auto concat = [&](const Matrix& s, const Matrix& a) {
      Matrix out(s.rows(), s.cols() + a.cols());
      out << gc.mix * s, (1.0 - gc.mix) * a;
      return out;
    };
    if (gc.metric == Metric::neg_l1) {
      write_vectors_tsv(dir / "ent_embeds_1.tsv", ds.kg1.entities.names(), concat(s1, a1));
      write_vectors_tsv(dir / "ent_embeds_2.tsv", ds.kg2.entities.names(), concat(s2, a2));
    } else {
      log::info("gcn metric is not neg_l1: ent_embeds hold the structure channel only");
      write_vectors_tsv(dir / "ent_embeds_1.tsv", ds.kg1.entities.names(), s1);
      write_vectors_tsv(dir / "ent_embeds_2.tsv", ds.kg2.entities.names(), s2);
    }
    meta["dim"] = s1.cols();
    meta["mix"] = gc.mix;
    meta["best_epoch"] = res.best_epoch;
    meta["epochs_run"] = res.epochs_run;
    meta["best_valid_hits1"] = res.best_valid_hits1 ? nlohmann::json(*res.best_valid_hits1) : nlohmann::json(nullptr);
  }
  meta["train_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_json(dir / "metadata.json", meta);
  log::info("wrote " + dir.string());
  return dir;
}

// ---------------------------------------------------------------------------
// eval

inline void write_bucket_tsv(const fs::path& path, const BucketTable& table) {
  auto out = tsv::open_output(path);
  out << "bucket\tlo\thi\tsupport\tcorrect\thits1\n";
  for (const auto& b : table) {
    out << b.label << '\t' << (b.lo ? std::to_string(*b.lo) : "null") << '\t'
        << (b.hi ? std::to_string(*b.hi) : "null") << '\t' << b.support << '\t' << b.correct << '\t'
        << optional_number(b.hits1()) << '\n';
  }
}

inline NamedVectors read_embeddings_for_eval(const fs::path& path) {
  if (!fs::exists(path)) throw EvaluationError("missing embedding file " + path.string());
  return read_vectors_tsv(path);
}

inline Matrix gather_for_eval(const NamedVectors& table, const std::vector<std::string>& names, const char* side) {
  try {
    return gather_rows(table, names);
  } catch (const LookupError& e) {
    throw EvaluationError(std::string(side) + " embeddings: " + e.what());
  }
}

struct EvalInputs {
  fs::path run_dir;
  std::string dataset;  // empty: the dataset recorded in the run's metadata
  fs::path links;       // empty: <run_dir>/test_links.tsv
  fs::path out_dir;     // empty: <run_dir>
};

/// Scores the test links of a trained run. Writes eval_report.json with one
/// entry per variant ("plain", "csls"), eval_report.csv and the bucket TSVs.
inline nlohmann::json cmd_eval(const ExperimentConfig& config, const EvalInputs& in) {
  const auto meta_path = in.run_dir / "metadata.json";
  const auto meta = fs::exists(meta_path) ? read_json(meta_path) : nlohmann::json::object();
  const std::string dataset = !in.dataset.empty() ? in.dataset : meta.value("dataset", config.dataset);
  const auto ds = load_dataset(resolve_dataset(dataset));
  const auto links =
      resolve_links(load_links(in.links.empty() ? in.run_dir / "test_links.tsv" : in.links), ds.kg1, ds.kg2);
  if (links.empty()) throw EvaluationError("no test links to evaluate");

  const auto e1 = read_embeddings_for_eval(in.run_dir / "ent_embeds_1.tsv");
  const auto e2 = read_embeddings_for_eval(in.run_dir / "ent_embeds_2.tsv");
  std::vector<std::string> src, tgt;
  std::vector<EntityId> rows, cols;
  std::vector<GoldCell> gold;
  for (std::size_t i = 0; i < links.size(); ++i) {
    src.push_back(ds.kg1.entities.name(links[i].source));
    tgt.push_back(ds.kg2.entities.name(links[i].target));
    rows.push_back(links[i].source);
    cols.push_back(links[i].target);
    gold.push_back({static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)});
  }
  Matrix a, b;
  std::string missing;
  try {
    a = gather_for_eval(e1, src, "KG1");
  } catch (const EvaluationError& e) {
    missing += e.what();
  }
  try {
    b = gather_for_eval(e2, tgt, "KG2");
  } catch (const EvaluationError& e) {
    missing += (missing.empty() ? "" : "; ") + std::string(e.what());
  }
  if (!missing.empty()) throw EvaluationError(missing);
  if (a.cols() != b.cols()) {
    throw EvaluationError("embedding dimensions differ: " + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.cols()));
  }

  Metric metric = config.eval_metric();
  if (config.matcher.metric == "auto" && meta.contains("metric")) metric = parse_metric(meta["metric"]);
  const auto plain = similarity_matrix(a, b, metric, config.threads);

  std::vector<std::pair<std::string, SimilarityMatrix>> variants;
  if (config.matcher.csls != CslsMode::on) variants.emplace_back("plain", plain);
  if (config.matcher.csls != CslsMode::off) variants.emplace_back("csls", csls_rescale(plain, config.matcher.csls_k));

  const fs::path out_dir = in.out_dir.empty() ? in.run_dir : in.out_dir;
  nlohmann::json report{{"schema_version", kReportSchemaVersion},
                        {"method", meta.value("method", config.method)},
                        {"run", in.run_dir.filename().string()},
                        {"metric", to_string(metric)},
                        {"injective", config.matcher.injective},
                        {"csls_k", config.matcher.csls_k},
                        {"variants", nlohmann::json::object()}};

  std::set<std::size_t> ks(config.matcher.ks.begin(), config.matcher.ks.end());
  auto csv = tsv::open_output(out_dir / "eval_report.csv");
  csv << "variant";
  for (auto k : ks) csv << ",hits@" << k;
  csv << ",mrr,h_score,test_size\n";
  for (const auto& [name, sim] : variants) {
    auto r = evaluate(sim, gold, config.matcher.injective, ds.kg1, ds.kg2, rows, cols,
                      std::vector<std::size_t>(ks.begin(), ks.end()));
    r.variant = name;
    report["variants"][name] = to_json(r);
    csv << name;
    for (auto k : ks) csv << ',' << tsv::format_number(r.hits_at.at(k));
    csv << ',' << tsv::format_number(r.mrr) << ',' << tsv::format_number(r.h_score) << ',' << r.test_size << '\n';
    write_bucket_tsv(out_dir / ("degree_buckets_" + name + ".tsv"), r.degree_buckets);
    write_bucket_tsv(out_dir / ("degree_diff_buckets_" + name + ".tsv"), r.degree_diff_buckets);
    log::info(name + ": hits@1 " + tsv::format_number(r.hits_at.at(1)) + " mrr " + tsv::format_number(r.mrr) +
              " h-score " + tsv::format_number(r.h_score));
  }
  write_json(out_dir / "eval_report.json", report);
  return report;
}

// ---------------------------------------------------------------------------
// sample

inline fs::path resolve_beside(const fs::path& dir, const std::string& file) {
  const fs::path p(file);
  return p.is_absolute() ? p : dir / p;
}

inline void write_name_subset(const fs::path& path, const NameEmbeddingTable& table, const KnowledgeGraph& kg) {
  write_vectors_tsv(path, kg.entities.names(), gather_rows(table, kg.entities.names()));
}

/// Draws a low-name-bias sub-dataset. The output directory holds the
/// dataset files, the matching name vectors and provenance.json.
inline fs::path cmd_sample(ExperimentConfig config, std::ostream& report = std::cout) {
  const auto data_dir = resolve_dataset(config.dataset);
  const auto ds = load_dataset(data_dir);
  auto sc = config.sample.sampler;
  sc.seed = config.seed;
  sc.validate(ds.links.size());

  const auto names1 = load_name_embeddings(resolve_beside(data_dir, config.sample.names_1));
  const auto names2 = load_name_embeddings(resolve_beside(data_dir, config.sample.names_2));
  const auto sims = pair_name_similarity(ds.links, ds.kg1, ds.kg2, names1, names2);
  LnbSample sample;
  try {
    sample = sample_dataset(ds, sims, sc);
  } catch (const SamplerError& e) {
    report << "shortfall\t" << e.shortfall() << '\n';
    throw;
  }

  const auto dir = prepare_run_dir(config);
  write_dataset(dir, sample.dataset);
  write_name_subset(dir / "name_embeds_1.tsv", names1, sample.dataset.kg1);
  write_name_subset(dir / "name_embeds_2.tsv", names2, sample.dataset.kg2);
  auto prov = provenance_json(sc, sample);
  prov["source_dataset"] = data_dir.string();
  prov["source_pairs"] = ds.links.size();
  write_json(dir / "provenance.json", prov);
  write_json(dir / "config.json", to_json(config));

  report << "pairs\t" << ds.links.size() << " -> " << sample.result.kept.size() << '\n'
         << "mean_name_similarity\t" << tsv::format_number(sample.result.mean_similarity_before) << " -> "
         << tsv::format_number(sample.result.mean_similarity_after) << '\n'
         << "degree_distance_kg1\t" << tsv::format_number(sample.degree_distance_kg1) << '\n'
         << "degree_distance_kg2\t" << tsv::format_number(sample.degree_distance_kg2) << '\n';
  return dir;
}

// ---------------------------------------------------------------------------
// analyze

struct LoadedReport {
  std::string name;  // run name, or file stem when absent
  std::string method;
  std::vector<EvalReport> variants;
};

inline LoadedReport load_report(const fs::path& path) {
  const auto j = read_json(path);
  const auto version = j.value("schema_version", -1);
  if (version != kReportSchemaVersion) {
    throw DataError(path.string() + ": report schema version " + std::to_string(version) + ", expected " +
                    std::to_string(kReportSchemaVersion));
  }
  LoadedReport r;
  r.name = j.value("run", std::string());
  if (r.name.empty()) r.name = path.stem().string();
  r.method = j.value("method", std::string("unknown"));
  try {
    for (const auto& [key, v] : j.at("variants").items()) r.variants.push_back(eval_report_from_json(v));
    // JSON objects come back key-sorted; list the plain variant first.
    std::stable_partition(r.variants.begin(), r.variants.end(),
                          [](const EvalReport& v) { return v.variant == "plain"; });
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed report: " + e.what());
  }
  return r;
}

/// Merges eval reports into comparison.csv (one row per report and variant,
/// union of metric columns, "null" where a report lacks a value) plus
/// plot-ready TSVs: Hits@1 vs h-score, Hits@1 with and without CSLS, and
/// Hits@1 per degree and degree-difference bucket.
inline fs::path cmd_analyze(const std::vector<fs::path>& report_paths, const fs::path& out_dir) {
  if (report_paths.empty()) throw ConfigError("analyze needs at least one report");
  std::vector<LoadedReport> reports;
  for (const auto& p : report_paths) reports.push_back(load_report(p));

  std::set<std::size_t> ks;
  for (const auto& r : reports) {
    for (const auto& v : r.variants) {
      for (const auto& [k, _] : v.hits_at) ks.insert(k);
    }
  }
  fs::create_directories(out_dir);

  auto csv = tsv::open_output(out_dir / "comparison.csv");
  csv << "run,method,variant";
  for (auto k : ks) csv << ",hits@" << k;
  csv << ",mrr,h_score,test_size\n";
  for (const auto& r : reports) {
    for (const auto& v : r.variants) {
      csv << r.name << ',' << r.method << ',' << v.variant;
      for (auto k : ks) {
        auto it = v.hits_at.find(k);
        csv << ',' << (it == v.hits_at.end() ? std::string("null") : tsv::format_number(it->second));
      }
      csv << ',' << tsv::format_number(v.mrr) << ',' << tsv::format_number(v.h_score) << ',' << v.test_size << '\n';
    }
  }

  const auto hits1 = [](const EvalReport& v) -> std::optional<double> {
    auto it = v.hits_at.find(1);
    if (it == v.hits_at.end()) return std::nullopt;
    return it->second;
  };

  auto hub = tsv::open_output(out_dir / "hits1_vs_hscore.tsv");
  hub << "run\tmethod\tvariant\thits1\th_score\n";
  auto csls = tsv::open_output(out_dir / "csls_effect.tsv");
  csls << "run\tmethod\thits1_plain\thits1_csls\n";
  auto deg = tsv::open_output(out_dir / "degree_buckets.tsv");
  deg << "run\tmethod\tvariant\tbucket\tsupport\thits1\n";
  auto diff = tsv::open_output(out_dir / "degree_diff_buckets.tsv");
  diff << "run\tmethod\tvariant\tbucket\tsupport\thits1\n";
  for (const auto& r : reports) {
    std::optional<double> plain, with_csls;
    for (const auto& v : r.variants) {
      hub << r.name << '\t' << r.method << '\t' << v.variant << '\t' << optional_number(hits1(v)) << '\t'
          << tsv::format_number(v.h_score) << '\n';
      if (v.variant == "plain") plain = hits1(v);
      if (v.variant == "csls") with_csls = hits1(v);
      for (const auto& b : v.degree_buckets) {
        deg << r.name << '\t' << r.method << '\t' << v.variant << '\t' << b.label << '\t' << b.support << '\t'
            << optional_number(b.hits1()) << '\n';
      }
      for (const auto& b : v.degree_diff_buckets) {
        diff << r.name << '\t' << r.method << '\t' << v.variant << '\t' << b.label << '\t' << b.support << '\t'
             << optional_number(b.hits1()) << '\n';
      }
    }
    csls << r.name << '\t' << r.method << '\t' << optional_number(plain) << '\t' << optional_number(with_csls) << '\n';
  }
  return out_dir;
}

}  // namespace eatk
