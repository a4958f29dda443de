// emoharness: command-line front end for the emotion-recognition harness.
//
//   emoharness run <config.json>
//   emoharness score <gold.csv> <predictions.jsonl> [--gold-track A|B] [--language eng]
//   emoharness export-sft <config.json>
//   emoharness retrieve --query <text> -k <n> <config.json>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "emoharness/emoharness.hpp"

namespace fs = std::filesystem;

namespace {

int report_error(std::string_view command, const std::exception& e) {
  if (const auto* se = dynamic_cast<const emo::StageError*>(&e)) {
    std::cerr << "emoharness " << command << ": stage " << se->stage() << ": " << se->what()
              << "\n";
  } else {
    std::cerr << "emoharness " << command << ": " << e.what() << "\n";
  }
  return 1;
}

emo::ExperimentConfig load_with_strategy_override(const std::string& path) {
  auto raw = nlohmann::json::parse(emo::detail::read_file(path));
  const std::string strategy = raw.value("strategy", "");
  if (strategy != "export_sft" && strategy != "export_ebridge") raw["strategy"] = "export_sft";
  return emo::validate_config(raw.dump(), fs::absolute(path).parent_path());
}

void print_manifest_summary(const emo::RunManifest& m) {
  if (m.metrics) std::cout << m.metrics->to_table();
  std::cout << "outputs: " << m.output_dir.string() << "\n";
  for (const auto& a : m.artifacts) std::cout << "  " << a.sha256.substr(0, 16) << "  " << a.file << "\n";
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
}

emo::RunOptions cli_options(bool verbose) {
  emo::RunOptions options;
  if (verbose) options.log = [](std::string_view msg) { std::cerr << msg << "\n"; };
  return options;
}

int cmd_run(const std::string& config_path, bool verbose) {
  auto config = emo::load_config(config_path);
  auto manifest = emo::run(config, cli_options(verbose));
  print_manifest_summary(manifest);
  return 0;
}

int cmd_export(const std::string& config_path, bool verbose) {
  auto config = load_with_strategy_override(config_path);
  auto manifest = emo::run(config, cli_options(verbose));
  print_manifest_summary(manifest);
  return 0;
}

int cmd_score(const std::string& gold_path, const std::string& pred_path,
              const std::string& gold_track_opt, const std::string& language, bool as_json) {
  std::vector<emo::PredictionRecord> records;
  {
    std::istringstream in(emo::detail::read_file(pred_path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        records.push_back(emo::PredictionRecord::from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw emo::Error(emo::ErrorKind::protocol, pred_path + ":" + std::to_string(n) + ": " + e.what());
      }
    }
  }
  if (records.empty()) throw emo::Error(emo::ErrorKind::argument, pred_path + " holds no predictions");

  const emo::Track pred_track = records.front().track;
  const emo::Track gold_track = gold_track_opt.empty() ? pred_track : emo::parse_track(gold_track_opt);
  if (gold_track == emo::Track::B && pred_track == emo::Track::A) {
    throw emo::Error(emo::ErrorKind::argument, "Track A predictions cannot be scored against intensity gold");
  }

  std::optional<emo::EmotionSet> emotions;
  if (!language.empty()) {
    emotions = emo::EmotionSet::for_language(language);
  } else {
    std::set<emo::Emotion> present;
    for (const auto& r : records) present.insert(r.key.emotion);
    emotions.emplace("und", std::vector<emo::Emotion>(present.begin(), present.end()));
  }

  auto gold = emo::gold_vectors(emo::load_dataset(gold_path, {}, *emotions, gold_track), gold_track);
  auto pred = emo::aggregate(records, *emotions);
  if (gold_track == emo::Track::A && pred_track == emo::Track::B) pred = emo::marginalise(pred);

  auto report = gold_track == emo::Track::A ? emo::macro_f1(gold, pred, *emotions)
                                            : emo::mean_pearson_r(gold, pred, *emotions);
  report.parse_failures = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.parse_failed(); }));
  if (as_json) {
    std::cout << report.to_json().dump(2) << "\n";
  } else {
    std::cout << report.to_table();
  }
  return 0;
}

int cmd_retrieve(const std::string& config_path, const std::string& query, std::size_t k,
                 bool stats) {
  auto config = emo::load_config(config_path);
  if (!config.dataset.train) {
    throw emo::Error(emo::ErrorKind::config, "dataset.train: required for retrieval");
  }
  auto train = emo::load_dataset(*config.dataset.train, config.schema, config.emotions, config.track);
  std::vector<emo::Document> docs;
  std::vector<const emo::Snippet*> kept;
  for (const auto& s : train) {
    if (s.language != config.language) continue;
    docs.push_back({s.id, s.text});
    kept.push_back(&s);
  }
  auto index = emo::Bm25Index::build(docs, config.bm25);
  if (stats) std::cout << index.stats_json().dump(2) << "\n";
  std::size_t rank = 0;
  for (const auto& hit : index.top_k(query, {k})) {
    nlohmann::ordered_json labels = nlohmann::ordered_json::object();
    for (auto [e, v] : kept[hit.position]->labels) labels[std::string(emo::to_string(e))] = v;
    nlohmann::ordered_json line = {{"rank", ++rank},
                                   {"id", hit.id},
                                   {"score", hit.score},
                                   {"text", kept[hit.position]->text},
                                   {"labels", labels}};
    std::cout << emo::detail::dump_json(line) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion recognition experiment harness"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log pipeline stages to stderr");

  std::string run_config;
  auto* run = app.add_subcommand("run", "Execute one experiment config end to end");
  run->add_option("config", run_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::string gold_path, pred_path, gold_track, score_language;
  bool score_json = false;
  auto* score = app.add_subcommand("score", "Score a predictions file against a gold dataset");
  score->add_option("gold", gold_path, "Gold dataset (CSV)")->required()->check(CLI::ExistingFile);
  score->add_option("pred", pred_path, "Predictions (JSONL)")->required()->check(CLI::ExistingFile);
  score->add_option("--gold-track", gold_track, "Track of the gold labels (default: predictions' track)");
  score->add_option("--language", score_language, "Language code selecting the emotion set");
  score->add_flag("--json", score_json, "Print the metrics report as JSON");

  std::string export_config;
  auto* exp = app.add_subcommand("export-sft", "Export fine-tuning datasets for a config");
  exp->add_option("config", export_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::string query, retrieve_config;
  std::size_t k = 1;
  bool stats = false;
  auto* retrieve = app.add_subcommand("retrieve", "Show BM25 top-k training snippets for a query");
  retrieve->add_option("--query", query, "Query text")->required();
  retrieve->add_option("-k", k, "Number of results")->check(CLI::PositiveNumber);
  retrieve->add_flag("--stats", stats, "Dump index statistics first");
  retrieve->add_option("config", retrieve_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  std::string_view command = app.get_subcommands().front()->get_name();
  try {
    if (*run) return cmd_run(run_config, verbose);
    if (*score) return cmd_score(gold_path, pred_path, gold_track, score_language, score_json);
    if (*exp) return cmd_export(export_config, verbose);
    if (*retrieve) return cmd_retrieve(retrieve_config, query, k, stats);
  } catch (const std::exception& e) {
    return report_error(command, e);
  }
  return 2;
}
