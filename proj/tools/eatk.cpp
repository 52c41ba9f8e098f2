// eatk: train, evaluate, sample and analyze entity-alignment experiments.
//
// Exit codes: 0 ok, 1 config, 2 data, 3 training, 4 evaluation, 5 sampler
// shortfall.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eatk/commands.hpp"
#include "eatk/config.hpp"
#include "eatk/log.hpp"
#include "eatk/synthetic.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::string> dataset, method, output_dir, run_name;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON experiment config");
  cmd->add_option("--set", o.sets, "Override a config value, e.g. --set trans.loss.gamma=2")->take_all();
  cmd->add_option("--dataset", o.dataset, "Dataset directory (relative paths resolve against $EATK_DATA_ROOT)");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--threads", o.threads, "Worker threads (1 = deterministic)");
  cmd->add_option("--output-dir", o.output_dir, "Parent directory for run directories");
  cmd->add_option("--run-name", o.run_name, "Run directory name (default: timestamp and seed)");
}

nlohmann::json raw_config(const CommonOptions& o) {
  auto j = o.config_path.empty() ? nlohmann::json::object() : eatk::load_config_json(o.config_path);
  for (const auto& s : o.sets) eatk::apply_override(j, s);
  if (o.dataset) j["dataset"] = *o.dataset;
  if (o.method) j["method"] = *o.method;
  if (o.seed) j["seed"] = *o.seed;
  if (o.threads) j["threads"] = *o.threads;
  if (o.output_dir) j["output_dir"] = *o.output_dir;
  if (o.run_name) j["run_name"] = *o.run_name;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entity alignment toolkit"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress logging");

  CommonOptions train_o;
  std::optional<int> max_epochs;
  auto* train = app.add_subcommand("train", "Train embeddings and write them to a run directory");
  add_common(train, train_o);
  train->add_option("--method", train_o.method, "mtranse, iptranse, bootea or gcnalign");
  train->add_option("--max-epochs", max_epochs, "Epoch limit for the chosen method");

  CommonOptions eval_o;
  std::string run_dir, links, eval_out;
  std::optional<std::string> csls, metric;
  std::optional<std::size_t> csls_k;
  bool injective = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained run on its test links");
  add_common(eval, eval_o);
  eval->add_option("--run", run_dir, "Run directory written by train")->required();
  eval->add_option("--links", links, "Gold links to score (default: the run's test_links.tsv)");
  eval->add_option("--out", eval_out, "Report directory (default: the run directory)");
  eval->add_option("--csls", csls, "off, on or auto (both variants)");
  eval->add_option("--csls-k", csls_k, "CSLS neighbourhood size");
  eval->add_option("--metric", metric, "cosine, neg_l1, neg_l2 or auto");
  eval->add_flag("--injective", injective, "One-to-one greedy assignment for Hits@1");

  CommonOptions sample_o;
  std::optional<std::size_t> target, bins;
  std::optional<double> drop_scale;
  auto* sample = app.add_subcommand("sample", "Draw a low-name-bias sub-dataset");
  add_common(sample, sample_o);
  sample->add_option("--target", target, "Number of linked pairs to keep");
  sample->add_option("--bins", bins, "Number of degree bins");
  sample->add_option("--drop-scale", drop_scale, "Drop probability per unit of name similarity");

  std::vector<std::string> reports;
  std::string analyze_out;
  auto* analyze = app.add_subcommand("analyze", "Merge eval reports into comparison tables");
  analyze->add_option("reports", reports, "eval_report.json files")->required();
  analyze->add_option("--out", analyze_out, "Output directory")->required();

  std::string synth_out;
  eatk::TwinSpec twin;
  bool with_names = false;
  auto* synth = app.add_subcommand("synth", "Write a synthetic isomorphic-twin dataset");
  synth->add_option("--out", synth_out, "Dataset directory")->required();
  synth->add_option("--entities", twin.entities, "Entities per graph");
  synth->add_option("--extra-triples", twin.extra_triples, "Triples beyond the spanning chain");
  synth->add_option("--relations", twin.relations, "Relation count");
  synth->add_option("--seed", twin.seed, "Generator seed");
  synth->add_flag("--names", with_names, "Also write bimodal name vectors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(eatk::ErrorKind::config);
  }
  eatk::log::set_enabled(!quiet);

  try {
    if (*train) {
      auto j = raw_config(train_o);
      if (max_epochs) {
        const std::string method = j.value("method", std::string("mtranse"));
        j[method == "gcnalign" ? "gcn" : "trans"]["max_epochs"] = *max_epochs;
      }
      const auto dir = eatk::cmd_train(eatk::config_from_json(j));
      std::cout << dir.string() << '\n';
    } else if (*eval) {
      auto j = raw_config(eval_o);
      if (csls) j["matcher"]["csls"] = *csls;
      if (csls_k) j["matcher"]["csls_k"] = *csls_k;
      if (metric) j["matcher"]["metric"] = *metric;
      if (injective) j["matcher"]["injective"] = true;
      auto config = eatk::config_from_json(j);
      eatk::EvalInputs in{run_dir, eval_o.dataset.value_or(""), links, eval_out};
      const auto report = eatk::cmd_eval(config, in);
      for (const auto& [name, v] : report["variants"].items()) {
        std::cout << name << "\thits@1 " << v["hits_at"]["1"].get<double>() << "\tmrr " << v["mrr"].get<double>()
                  << "\th_score " << v["h_score"].get<double>() << '\n';
      }
    } else if (*sample) {
      auto j = raw_config(sample_o);
      if (target) j["sample"]["target_pair_count"] = *target;
      if (bins) j["sample"]["num_bins"] = *bins;
      if (drop_scale) j["sample"]["drop_scale"] = *drop_scale;
      const auto dir = eatk::cmd_sample(eatk::config_from_json(j));
      std::cout << dir.string() << '\n';
    } else if (*analyze) {
      std::vector<std::filesystem::path> paths(reports.begin(), reports.end());
      std::cout << eatk::cmd_analyze(paths, analyze_out).string() << '\n';
    } else if (*synth) {
      const auto ds = eatk::make_twin_dataset(twin);
      eatk::write_dataset(synth_out, ds);
      if (with_names) {
        eatk::NameVectorSpec spec;
        spec.seed = twin.seed;
        const auto names = eatk::make_name_vectors(ds, spec);
        eatk::write_vectors_tsv(std::filesystem::path(synth_out) / "name_embeds_1.tsv", names.kg1.names,
                                names.kg1.vectors);
        eatk::write_vectors_tsv(std::filesystem::path(synth_out) / "name_embeds_2.tsv", names.kg2.names,
                                names.kg2.vectors);
      }
      std::cout << synth_out << '\n';
    }
  } catch (const eatk::Error& e) {
    std::cerr << "eatk: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "eatk: " << e.what() << '\n';
    return static_cast<int>(eatk::ErrorKind::data);
  }
  return 0;
}
