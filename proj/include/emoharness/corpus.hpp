#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "emoharness/detail/csv.hpp"
#include "emoharness/emotion.hpp"
#include "emoharness/error.hpp"
#include "emoharness/prompting.hpp"

namespace emo {

using LabelMap = std::map<Emotion, int>;

struct Snippet {
  std::string id;
  std::string text;
  std::string language;
  LabelMap labels;

  bool operator==(const Snippet&) const = default;
};

struct TaskInstance {
  std::string snippet_id;
  std::string text;
  std::string language;
  Emotion emotion;
  int gold;
  Track track;

  bool operator==(const TaskInstance&) const = default;
};

// Maps dataset columns onto snippet fields. Emotion columns default to the
// emotion's lowercase name.
struct ColumnSchema {
  std::string id = "id";
  std::string text = "text";
  std::optional<std::string> language;
  std::map<Emotion, std::string> emotion_columns;

  std::string column_for(Emotion e) const {
    auto it = emotion_columns.find(e);
    return it == emotion_columns.end() ? std::string(to_string(e)) : it->second;
  }
};

namespace detail {

inline int parse_label_cell(std::string_view cell, const std::string& row_id,
                            std::string_view column, Track track) {
  cell = trim(cell);
  int value = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw Error(ErrorKind::validation, "row '" + row_id + "': column '" + std::string(column) +
                                           "' holds non-integer label '" + std::string(cell) +
                                           "'");
  }
  if (!label_in_range(value, track)) {
    throw Error(ErrorKind::validation,
                "row '" + row_id + "': label " + std::to_string(value) + " in column '" +
                    std::string(column) + "' is outside the Track " +
                    std::string(to_string(track)) + " range 0.." +
                    std::to_string(max_label(track)));
  }
  return value;
}

}  // namespace detail

inline std::vector<Snippet> parse_dataset(std::string_view csv, const ColumnSchema& schema,
                                          const EmotionSet& emotions, Track track) {
  auto rows = detail::parse_csv(csv);
  if (rows.empty()) throw Error(ErrorKind::schema, "dataset has no header row");

  const auto& header = rows.front();
  auto column_index = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorKind::schema, "missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t id_col = column_index(schema.id);
  const std::size_t text_col = column_index(schema.text);
  std::optional<std::size_t> lang_col;
  if (schema.language) lang_col = column_index(*schema.language);
  std::vector<std::pair<Emotion, std::size_t>> label_cols;
  for (Emotion e : emotions) label_cols.emplace_back(e, column_index(schema.column_for(e)));

  std::vector<Snippet> out;
  out.reserve(rows.size() - 1);
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw Error(ErrorKind::schema, "record " + std::to_string(r) + " has " +
                                         std::to_string(row.size()) + " fields, header has " +
                                         std::to_string(header.size()));
    }
    Snippet s;
    s.id = std::string(detail::trim(row[id_col]));
    if (s.id.empty()) {
      throw Error(ErrorKind::validation, "record " + std::to_string(r) + " has an empty id");
    }
    if (!seen.insert(s.id).second) {
      throw Error(ErrorKind::validation, "duplicate id '" + s.id + "'");
    }
    s.text = row[text_col];
    if (detail::trim(s.text).empty()) {
      throw Error(ErrorKind::validation, "row '" + s.id + "' has empty text");
    }
    s.language = lang_col ? std::string(detail::trim(row[*lang_col])) : emotions.language();
    for (auto [e, col] : label_cols) {
      s.labels[e] = detail::parse_label_cell(row[col], s.id, header[col], track);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Reads a CSV dataset with a header row. Row order is kept.
inline std::vector<Snippet> load_dataset(const std::filesystem::path& path,
                                         const ColumnSchema& schema,
                                         const EmotionSet& emotions, Track track) {
  try {
    return parse_dataset(detail::read_file(path.string()), schema, emotions, track);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

// One instance per (snippet, emotion), snippet-major, emotion order as in the set.
inline std::vector<TaskInstance> explode(std::span<const Snippet> snippets,
                                         const EmotionSet& emotions, Track track) {
  std::vector<TaskInstance> out;
  out.reserve(snippets.size() * emotions.size());
  for (const auto& s : snippets) {
    for (Emotion e : emotions) {
      auto it = s.labels.find(e);
      if (it == s.labels.end()) {
        throw Error(ErrorKind::validation, "snippet '" + s.id + "' has no label for '" +
                                               std::string(to_string(e)) + "'");
      }
      if (!label_in_range(it->second, track)) {
        throw Error(ErrorKind::validation, "snippet '" + s.id + "' label out of range");
      }
      out.push_back({s.id, s.text, s.language, e, it->second, track});
    }
  }
  return out;
}

struct OversampleResult {
  std::vector<TaskInstance> instances;
  std::vector<std::string> warnings;
};

// Balances each emotion's binary problem by duplicating minority-class
// instances, drawn uniformly with replacement, until both classes have the
// same count. Output is grouped by emotion (first-appearance order): the
// group's originals in input order, then its duplicates in draw order.
inline OversampleResult oversample(std::span<const TaskInstance> instances, std::uint64_t seed) {
  std::vector<Emotion> order;
  std::map<Emotion, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i].track != Track::A) {
      throw Error(ErrorKind::argument, "oversampling applies to Track A instances only");
    }
    auto [it, inserted] = groups.try_emplace(instances[i].emotion);
    if (inserted) order.push_back(instances[i].emotion);
    it->second.push_back(i);
  }

  std::mt19937_64 rng(seed);
  OversampleResult result;
  result.instances.reserve(instances.size());
  for (Emotion e : order) {
    const auto& members = groups[e];
    std::vector<std::size_t> pos, neg;
    for (auto i : members) (instances[i].gold == 1 ? pos : neg).push_back(i);
    for (auto i : members) result.instances.push_back(instances[i]);

    if (pos.empty() || neg.empty()) {
      result.warnings.push_back("emotion '" + std::string(to_string(e)) +
                                "' has a single class present; left unbalanced");
      continue;
    }
    const auto& minority = pos.size() < neg.size() ? pos : neg;
    const std::size_t deficit = std::max(pos.size(), neg.size()) - minority.size();
    std::uniform_int_distribution<std::size_t> pick(0, minority.size() - 1);
    for (std::size_t d = 0; d < deficit; ++d) {
      result.instances.push_back(instances[minority[pick(rng)]]);
    }
  }
  return result;
}

// Fine-tuning hyperparameters. Emitted into export metadata as-is for an
// external trainer; nothing here reads them.
struct SftHyperparameters {
  int lora_rank = 32;
  int lora_alpha = 64;
  double dropout = 0.05;
  int max_source_length = 512;
  int max_target_length = 512;
  int epochs = 10;
  int batch_size = 2;
  double learning_rate = 2e-5;
  std::string quantisation = "4-bit";

  static SftHyperparameters for_track(Track track) {
    SftHyperparameters h;
    h.learning_rate = track == Track::A ? 2e-5 : 5e-5;
    return h;
  }

  nlohmann::ordered_json to_json() const {
    return {{"lora_rank", lora_rank},
            {"lora_alpha", lora_alpha},
            {"dropout", dropout},
            {"max_source_length", max_source_length},
            {"max_target_length", max_target_length},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"quantisation", quantisation}};
  }
};

struct SftExportConfig {
  TemplateId template_id = TemplateId::track_a;
  SftHyperparameters hyperparameters = SftHyperparameters::for_track(Track::A);
  // Overrides the display name looked up from each instance's language code.
  std::optional<std::string> language_name;

  static SftExportConfig for_track(Track track) {
    return {template_for(track), SftHyperparameters::for_track(track), std::nullopt};
  }
};

struct ExportSummary {
  std::filesystem::path data_path;
  std::filesystem::path metadata_path;
  std::size_t instance_count = 0;
};

namespace detail {

inline std::string dump_json(const nlohmann::ordered_json& j, int indent = -1) {
  return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::io, "write to '" + path.string() + "' failed");
}

inline std::filesystem::path metadata_path_for(const std::filesystem::path& data_path) {
  auto p = data_path;
  p.replace_extension(".meta.json");
  return p;
}

}  // namespace detail

// Writes {"instruction", "output"} JSONL plus a `.meta.json` sidecar holding
// the hyperparameter block and instance counts.
inline ExportSummary export_sft_dataset(std::span<const TaskInstance> instances,
                                        const SftExportConfig& config,
                                        const std::filesystem::path& out) {
  const Track expected = config.template_id == TemplateId::track_a ? Track::A : Track::B;
  std::map<std::string, std::string> names;
  auto name_for = [&](const std::string& code) -> const std::string& {
    auto it = names.find(code);
    if (it != names.end()) return it->second;
    return names[code] = config.language_name ? *config.language_name
                                              : require_language_name(code);
  };

  std::string body;
  std::map<std::string, std::size_t> per_emotion;
  std::map<std::string, std::size_t> per_gold;
  std::set<std::string> languages;
  for (const auto& inst : instances) {
    if (inst.track != expected) {
      throw Error(ErrorKind::config, "template " + std::string(to_string(config.template_id)) +
                                         " cannot export a Track " +
                                         std::string(to_string(inst.track)) + " instance");
    }
    nlohmann::ordered_json line = {
        {"instruction",
         render_zero_shot(config.template_id, inst.text, name_for(inst.language), inst.emotion)},
        {"output", std::to_string(inst.gold)}};
    body += detail::dump_json(line);
    body += '\n';
    ++per_emotion[std::string(to_string(inst.emotion))];
    ++per_gold[std::to_string(inst.gold)];
    languages.insert(inst.language);
  }

  ExportSummary summary{out, detail::metadata_path_for(out), instances.size()};
  detail::write_file(summary.data_path, body);

  nlohmann::ordered_json meta = {
      {"data_file", out.filename().string()},
      {"template_id", to_string(config.template_id)},
      {"hyperparameters", config.hyperparameters.to_json()},
      {"instance_count", instances.size()},
      {"per_emotion", per_emotion},
      {"per_gold", per_gold},
      {"languages", languages}};
  detail::write_file(summary.metadata_path, detail::dump_json(meta, 2) + "\n");
  return summary;
}

struct SftRecord {
  std::string instruction;
  std::string output;
};

inline std::vector<SftRecord> read_sft_dataset(const std::filesystem::path& path) {
  std::vector<SftRecord> out;
  std::istringstream in(detail::read_file(path.string()));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("instruction").get<std::string>(), j.at("output").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::protocol,
                  path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

struct EbridgePlan {
  ExportSummary english_stage;
  ExportSummary target_stage;
  std::filesystem::path manifest_path;
  std::string target_language;
};

namespace detail {

inline std::string single_language(std::span<const TaskInstance> instances,
                                   std::string_view stage) {
  if (instances.empty()) {
    throw Error(ErrorKind::validation, std::string(stage) + " has no instances");
  }
  const std::string& lang = instances.front().language;
  for (const auto& inst : instances) {
    if (inst.language != lang) {
      throw Error(ErrorKind::validation, std::string(stage) + " mixes languages '" + lang +
                                             "' and '" + inst.language + "'");
    }
  }
  return lang;
}

}  // namespace detail

// Two-stage fine-tuning export: stage 1 on English instances, stage 2
// (continual) on one target language. Writes both datasets and plan.json.
inline EbridgePlan export_ebridge_plan(std::span<const TaskInstance> english,
                                       std::span<const TaskInstance> target,
                                       const SftExportConfig& config,
                                       const std::filesystem::path& out_dir) {
  if (detail::single_language(english, "stage 1") != "eng") {
    throw Error(ErrorKind::validation, "stage 1 must contain English ('eng') instances only");
  }
  const std::string target_lang = detail::single_language(target, "stage 2");
  if (target_lang == "eng") {
    throw Error(ErrorKind::validation, "stage 2 must be a non-English language");
  }

  std::filesystem::create_directories(out_dir);
  // The display-name override belongs to the target language only.
  SftExportConfig english_config = config;
  english_config.language_name.reset();

  EbridgePlan plan;
  plan.target_language = target_lang;
  plan.english_stage = export_sft_dataset(english, english_config, out_dir / "stage1_eng.jsonl");
  plan.target_stage =
      export_sft_dataset(target, config, out_dir / ("stage2_" + target_lang + ".jsonl"));
  plan.manifest_path = out_dir / "plan.json";

  auto stage = [](int n, const std::string& lang, const ExportSummary& s, const char* mode) {
    return nlohmann::ordered_json{{"stage", n},
                                  {"language", lang},
                                  {"mode", mode},
                                  {"data_file", s.data_path.filename().string()},
                                  {"metadata_file", s.metadata_path.filename().string()},
                                  {"instance_count", s.instance_count}};
  };
  nlohmann::ordered_json manifest = {
      {"plan", "ebridge"},
      {"template_id", to_string(config.template_id)},
      {"stages",
       {stage(1, "eng", plan.english_stage, "sft"),
        stage(2, target_lang, plan.target_stage, "continual_sft")}}};
  detail::write_file(plan.manifest_path, detail::dump_json(manifest, 2) + "\n");
  return plan;
}

}  // namespace emo
