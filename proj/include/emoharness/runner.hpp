#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emoharness/config.hpp"
#include "emoharness/corpus.hpp"
#include "emoharness/evaluation.hpp"
#include "emoharness/hashing.hpp"
#include "emoharness/http_backend.hpp"
#include "emoharness/inference.hpp"
#include "emoharness/prompting.hpp"
#include "emoharness/retrieval.hpp"

namespace emo {

struct ArtifactHash {
  std::string file;
  std::string sha256;
  std::uintmax_t bytes = 0;

  bool operator==(const ArtifactHash&) const = default;
};

struct RunCounts {
  std::size_t snippets = 0;
  std::size_t instances = 0;
  std::size_t requests = 0;
  std::size_t parse_failures = 0;
  std::size_t oversampled_added = 0;

  bool operator==(const RunCounts&) const = default;
};

struct RunManifest {
  nlohmann::ordered_json config;
  std::vector<ArtifactHash> artifacts;  // sorted by file name
  RunCounts counts;
  std::vector<std::string> warnings;
  std::string backend;
  std::map<std::string, double> stage_ms;
  double wall_ms = 0.0;
  std::string started_utc;
  std::filesystem::path output_dir;
  std::optional<MetricsReport> metrics;

  const ArtifactHash* find(std::string_view file) const {
    for (const auto& a : artifacts) {
      if (a.file == file) return &a;
    }
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& a : artifacts) {
      files.push_back({{"file", a.file}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    }
    return {{"config", config},
            {"backend", backend},
            {"artifacts", std::move(files)},
            {"counts",
             {{"snippets", counts.snippets},
              {"instances", counts.instances},
              {"requests", counts.requests},
              {"parse_failures", counts.parse_failures},
              {"oversampled_added", counts.oversampled_added}}},
            {"warnings", warnings},
            {"timing", {{"started_utc", started_utc}, {"wall_ms", wall_ms}, {"stage_ms", stage_ms}}}};
  }
};

struct RunOptions {
  // Called as each stage begins; throwing from it aborts the run.
  std::function<void(std::string_view stage)> on_stage;
  // Replaces the backend the config would construct.
  std::shared_ptr<CompletionBackend> backend;
  std::function<void(std::string_view message)> log;
};

inline constexpr std::string_view kManifestFile = "manifest.json";

namespace detail {

inline std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline std::string jsonl(const std::vector<nlohmann::ordered_json>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += dump_json(l);
    out += '\n';
  }
  return out;
}

inline std::vector<ArtifactHash> hash_directory(const std::filesystem::path& dir) {
  std::vector<ArtifactHash> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto rel = std::filesystem::relative(entry.path(), dir).generic_string();
    if (rel == kManifestFile) continue;
    out.push_back({rel, sha256_file(entry.path()), entry.file_size()});
  }
  std::sort(out.begin(), out.end(),
            [](const ArtifactHash& a, const ArtifactHash& b) { return a.file < b.file; });
  return out;
}

// Only an empty directory or one holding a previous run's manifest may be
// replaced by a new run.
inline void clear_previous_output(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir)) return;
  if (!fs::is_directory(dir)) {
    throw Error(ErrorKind::io, "output path '" + dir.string() + "' exists and is not a directory");
  }
  if (!fs::is_empty(dir) && !fs::exists(dir / kManifestFile)) {
    throw Error(ErrorKind::io, "output directory '" + dir.string() +
                                   "' is not empty and holds no previous run manifest");
  }
  fs::remove_all(dir);
}

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& config, const RunOptions& options,
           const std::filesystem::path& staging, RunManifest& manifest)
      : cfg_(config), opt_(options), dir_(staging), manifest_(manifest) {}

  void execute() {
    switch (cfg_.strategy) {
      case Strategy::zero_shot:
      case Strategy::few_shot:
      case Strategy::marginalise_from_b:
        run_inference();
        break;
      case Strategy::export_sft:
        run_export_sft();
        break;
      case Strategy::export_ebridge:
        run_export_ebridge();
        break;
    }
    close_stage();
  }

  const std::string& current_stage() const { return stage_; }

 private:
  void stage(std::string name) {
    close_stage();
    stage_ = std::move(name);
    stage_closed_ = false;
    stage_start_ = std::chrono::steady_clock::now();
    if (opt_.on_stage) opt_.on_stage(stage_);
    if (opt_.log) opt_.log("stage " + stage_);
  }

  void close_stage() {
    if (stage_.empty() || stage_closed_) return;
    stage_closed_ = true;
    manifest_.stage_ms[stage_] += std::chrono::duration<double, std::milli>(
                                      std::chrono::steady_clock::now() - stage_start_)
                                      .count();
  }

  void warn(std::string message) {
    if (opt_.log) opt_.log("warning: " + message);
    manifest_.warnings.push_back(std::move(message));
  }

  std::vector<Snippet> load(const std::filesystem::path& path, Track track) const {
    return load_dataset(path, cfg_.schema, cfg_.emotions, track);
  }

  std::vector<Snippet> same_language(std::vector<Snippet> snippets) {
    std::vector<Snippet> kept;
    for (auto& s : snippets) {
      if (s.language == cfg_.language) kept.push_back(std::move(s));
    }
    if (kept.size() != snippets.size()) {
      warn("dropped " + std::to_string(snippets.size() - kept.size()) +
           " training snippets in other languages");
    }
    return kept;
  }

  std::shared_ptr<CompletionBackend> make_backend(Track prompt_track) const {
    if (opt_.backend) return opt_.backend;
    if (cfg_.endpoint) return std::make_shared<ChatCompletionsBackend>(*cfg_.endpoint, cfg_.seed);
    std::map<InstanceKey, int> gold;
    if (cfg_.mock->kind == MockKind::gold) {
      const auto& path = cfg_.mock->gold ? *cfg_.mock->gold : cfg_.eval_path();
      for (const auto& s : load(path, prompt_track)) {
        for (auto [e, v] : s.labels) gold[{s.id, e}] = v;
      }
    }
    return std::make_shared<MockBackend>(cfg_.mock->kind, std::move(gold));
  }

  void run_inference() {
    const Track prompt_track = cfg_.prompt_track();
    const TemplateId tmpl = template_for(prompt_track);

    stage("load");
    const auto eval = load(cfg_.eval_path(), cfg_.track);
    manifest_.counts.snippets = eval.size();
    std::vector<Snippet> train;
    if (cfg_.strategy == Strategy::few_shot) train = same_language(load(*cfg_.dataset.train, cfg_.track));

    stage("transform");
    const auto instances = explode(eval, cfg_.emotions, cfg_.track);
    manifest_.counts.instances = instances.size();

    std::vector<std::vector<std::size_t>> shots(eval.size());
    if (cfg_.strategy == Strategy::few_shot) {
      stage("retrieve");
      if (train.empty()) throw Error(ErrorKind::validation, "no training snippets in language '" + cfg_.language + "'");
      std::vector<Document> docs;
      docs.reserve(train.size());
      for (const auto& s : train) docs.push_back({s.id, s.text});
      const auto index = Bm25Index::build(docs, cfg_.bm25);
      if (cfg_.retrieval.k > index.doc_count()) {
        throw Error(ErrorKind::config, "retrieval.k = " + std::to_string(cfg_.retrieval.k) +
                                           " exceeds the " + std::to_string(index.doc_count()) +
                                           " training snippets");
      }
      for (std::size_t i = 0; i < eval.size(); ++i) {
        for (const auto& hit : index.top_k(eval[i].text, cfg_.retrieval)) shots[i].push_back(hit.position);
      }
    }

    stage("prompt");
    std::vector<CompletionRequest> requests;
    requests.reserve(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const auto& inst = instances[i];
      CompletionRequest req{{inst.snippet_id, inst.emotion}, {}};
      if (cfg_.strategy == Strategy::few_shot) {
        std::vector<FewShotExample> examples;
        for (std::size_t pos : shots[i / cfg_.emotions.size()]) {
          const auto& ex = train[pos];
          auto it = ex.labels.find(inst.emotion);
          examples.push_back({ex.text, inst.emotion,
                              it == ex.labels.end() ? std::nullopt : std::optional<int>(it->second)});
        }
        req.prompt = render_few_shot(examples, inst.text, cfg_.language_name, inst.emotion,
                                     examples.size(), tmpl);
      } else {
        req.prompt = render_zero_shot(tmpl, inst.text, cfg_.language_name, inst.emotion, cfg_.emotions);
      }
      requests.push_back(std::move(req));
    }

    stage("infer");
    auto backend = make_backend(prompt_track);
    manifest_.backend = backend->describe();
    const int concurrency = cfg_.endpoint ? cfg_.endpoint->concurrency_limit : 1;
    const auto completions = run_batch(*backend, requests, concurrency);
    manifest_.counts.requests = completions.size();

    stage("aggregate");
    std::vector<PredictionRecord> records;
    records.reserve(completions.size());
    std::vector<nlohmann::ordered_json> pred_lines;
    for (const auto& c : completions) {
      records.push_back(to_prediction(c, prompt_track));
      manifest_.counts.parse_failures += records.back().parse_failed();
      pred_lines.push_back(records.back().to_json());
    }
    auto vectors = aggregate(records, cfg_.emotions);
    std::vector<nlohmann::ordered_json> vector_lines;
    for (const auto& v : vectors) vector_lines.push_back(v.to_json(cfg_.emotions));
    write_file(dir_ / "predictions.jsonl", jsonl(pred_lines));
    write_file(dir_ / "vectors.jsonl", jsonl(vector_lines));
    if (cfg_.strategy == Strategy::marginalise_from_b) {
      vectors = marginalise(vectors);
      std::vector<nlohmann::ordered_json> marg_lines;
      for (const auto& v : vectors) marg_lines.push_back(v.to_json(cfg_.emotions));
      write_file(dir_ / "vectors_marginalised.jsonl", jsonl(marg_lines));
    }

    stage("score");
    const auto gold = gold_vectors(eval, cfg_.track);
    MetricsReport report = cfg_.track == Track::A ? macro_f1(gold, vectors, cfg_.emotions)
                                                  : mean_pearson_r(gold, vectors, cfg_.emotions);
    report.parse_failures = manifest_.counts.parse_failures;
    write_file(dir_ / "metrics.json", dump_json(report.to_json(), 2) + "\n");
    write_file(dir_ / "metrics.txt", report.to_table());
    manifest_.metrics = std::move(report);
  }

  std::vector<TaskInstance> training_instances(const std::filesystem::path& path) {
    auto snippets = load(path, cfg_.track);
    manifest_.counts.snippets += snippets.size();
    auto instances = explode(snippets, cfg_.emotions, cfg_.track);
    if (cfg_.track == Track::A && cfg_.oversample) {
      const std::size_t before = instances.size();
      auto balanced = oversample(instances, cfg_.seed);
      for (auto& w : balanced.warnings) warn(path.filename().string() + ": " + w);
      instances = std::move(balanced.instances);
      manifest_.counts.oversampled_added += instances.size() - before;
    }
    manifest_.counts.instances += instances.size();
    return instances;
  }

  SftExportConfig sft_config() const {
    auto c = SftExportConfig::for_track(cfg_.track);
    c.language_name = cfg_.language_name;
    return c;
  }

  void run_export_sft() {
    stage("load");
    auto instances = training_instances(*cfg_.dataset.train);
    stage("export");
    export_sft_dataset(instances, sft_config(), dir_ / "sft_train.jsonl");
  }

  void run_export_ebridge() {
    stage("load");
    auto target = training_instances(*cfg_.dataset.train);
    // Stage 1 uses the English annotation scheme.
    auto english_set = EmotionSet::for_language("eng");
    auto english_snippets = load_dataset(*cfg_.dataset.english_train, cfg_.schema, english_set, cfg_.track);
    manifest_.counts.snippets += english_snippets.size();
    auto english = explode(english_snippets, english_set, cfg_.track);
    if (cfg_.track == Track::A && cfg_.oversample) {
      const std::size_t before = english.size();
      auto balanced = oversample(english, cfg_.seed);
      for (auto& w : balanced.warnings) warn("english_train: " + w);
      english = std::move(balanced.instances);
      manifest_.counts.oversampled_added += english.size() - before;
    }
    manifest_.counts.instances += english.size();
    stage("export");
    export_ebridge_plan(english, target, sft_config(), dir_);
  }

  const ExperimentConfig& cfg_;
  const RunOptions& opt_;
  std::filesystem::path dir_;
  RunManifest& manifest_;
  std::string stage_;
  bool stage_closed_ = false;
  std::chrono::steady_clock::time_point stage_start_;
};

}  // namespace detail

// Executes one experiment. Outputs are written to a staging directory and
// moved into config.output_dir only once every stage has succeeded; a failed
// run is moved to "<output_dir>.quarantine" instead and the error rethrown
// with its stage.
inline RunManifest run(const ExperimentConfig& config, const RunOptions& options = {}) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = config.output_dir;
  const fs::path parent = out.parent_path();
  const std::string name = out.filename().string();
  const fs::path staging = parent / ("." + name + ".staging");
  const fs::path quarantine = parent / (name + ".quarantine");

  RunManifest manifest;
  manifest.config = config.snapshot();
  manifest.started_utc = detail::utc_now();
  manifest.output_dir = out;

  fs::create_directories(parent);
  fs::remove_all(staging);
  fs::create_directories(staging);

  std::string failed_stage = "setup";
  try {
    detail::Pipeline pipeline(config, options, staging, manifest);
    try {
      pipeline.execute();
    } catch (...) {
      failed_stage = pipeline.current_stage();
      throw;
    }
    failed_stage = "persist";
    if (options.on_stage) options.on_stage("persist");
    manifest.artifacts = detail::hash_directory(staging);
    manifest.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    detail::write_file(staging / kManifestFile, detail::dump_json(manifest.to_json(), 2) + "\n");
    detail::clear_previous_output(out);
    fs::rename(staging, out);
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::remove_all(quarantine, ec);
    fs::rename(staging, quarantine, ec);
    if (!ec) {
      detail::write_file(quarantine / "FAILED.txt",
                         "stage: " + failed_stage + "\nerror: " + e.what() + "\n");
    }
    if (const auto* err = dynamic_cast<const Error*>(&e)) throw StageError(failed_stage, *err);
    throw StageError(failed_stage, Error(ErrorKind::io, e.what()));
  }
  return manifest;
}

}  // namespace emo
