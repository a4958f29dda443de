#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emoharness/emotion.hpp"
#include "emoharness/error.hpp"

namespace emo {

enum class TemplateId { track_a, track_b };

inline std::string_view to_string(TemplateId id) {
  return id == TemplateId::track_a ? "track_a" : "track_b";
}

inline TemplateId parse_template_id(std::string_view s) {
  if (s == "track_a") return TemplateId::track_a;
  if (s == "track_b") return TemplateId::track_b;
  throw Error(ErrorKind::argument, "unknown template id '" + std::string(s) + "'");
}

inline TemplateId template_for(Track track) {
  return track == Track::A ? TemplateId::track_a : TemplateId::track_b;
}

namespace templates {

inline constexpr std::string_view kTrackA =
    "You are detecting emotions on a statement written in {language}. "
    "Statement: {text}. Does this statement express {emotion}? "
    "Answer 1 for yes and 0 for no.";

// "E" is literal in the instruction; only the trailing slot is filled.
inline constexpr std::string_view kTrackB =
    "Task: Categorize the tweet into an intensity level of the specified emotion E, "
    "representing the mental state of the tweeter. "
    "0: no E can be inferred. "
    "1: low amount of E can be inferred. "
    "2: moderate amount of E can be inferred. "
    "3: high amount of E can be inferred. "
    "Tweet: {text} Emotion {emotion} Intensity class:";

inline std::string_view body(TemplateId id) {
  return id == TemplateId::track_a ? kTrackA : kTrackB;
}

}  // namespace templates

// English display names for the shared-task language codes. The name is what
// appears in the "{language}" slot of the Track A instruction.
inline std::optional<std::string> language_display_name(std::string_view code) {
  static const std::map<std::string, std::string, std::less<>> names = {
      {"afr", "Afrikaans"},       {"amh", "Amharic"},
      {"arq", "Algerian Arabic"}, {"ary", "Moroccan Arabic"},
      {"chn", "Chinese"},         {"deu", "German"},
      {"eng", "English"},         {"esp", "Spanish"},
      {"hau", "Hausa"},           {"hin", "Hindi"},
      {"ibo", "Igbo"},            {"ind", "Indonesian"},
      {"jav", "Javanese"},        {"kin", "Kinyarwanda"},
      {"mar", "Marathi"},         {"orm", "Oromo"},
      {"pcm", "Nigerian Pidgin"}, {"ptbr", "Brazilian Portuguese"},
      {"ptmz", "Mozambican Portuguese"},
      {"ron", "Romanian"},        {"rus", "Russian"},
      {"som", "Somali"},          {"sun", "Sundanese"},
      {"swa", "Swahili"},         {"swe", "Swedish"},
      {"tat", "Tatar"},           {"tir", "Tigrinya"},
      {"ukr", "Ukrainian"},       {"vmw", "Emakhuwa"},
      {"yor", "Yoruba"},          {"zul", "Zulu"},
  };
  auto it = names.find(code);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

inline std::string require_language_name(std::string_view code) {
  if (auto name = language_display_name(code)) return *name;
  throw Error(ErrorKind::config, "no display name known for language code '" +
                                     std::string(code) + "'; set language_name explicitly");
}

// Single left-to-right pass over the template body. Substituted values are
// never rescanned, so braces inside the text survive verbatim.
inline std::string render_zero_shot(TemplateId id, std::string_view text,
                                    std::string_view language, Emotion emotion) {
  const std::string_view body = templates::body(id);
  const std::string_view emotion_name = to_string(emotion);
  std::string out;
  out.reserve(body.size() + text.size() + language.size() + emotion_name.size());

  for (std::size_t i = 0; i < body.size();) {
    if (body[i] == '{') {
      auto close = body.find('}', i);
      std::string_view key = body.substr(i + 1, close - i - 1);
      if (key == "text") {
        out.append(text);
      } else if (key == "language") {
        out.append(language);
      } else if (key == "emotion") {
        out.append(emotion_name);
      } else {
        throw Error(ErrorKind::argument, "template placeholder {" + std::string(key) + "}");
      }
      i = close + 1;
    } else {
      out.push_back(body[i++]);
    }
  }
  return out;
}

inline std::string render_zero_shot(TemplateId id, std::string_view text,
                                    std::string_view language, Emotion emotion,
                                    const EmotionSet& active) {
  if (!active.contains(emotion)) {
    throw Error(ErrorKind::validation, "emotion '" + std::string(to_string(emotion)) +
                                           "' is not annotated for language '" +
                                           active.language() + "'");
  }
  return render_zero_shot(id, text, language, emotion);
}

inline std::string render_zero_shot(TemplateId id, std::string_view text,
                                    std::string_view language, std::string_view emotion,
                                    const EmotionSet& active) {
  return render_zero_shot(id, text, language, parse_emotion(emotion), active);
}

// One retrieved demonstration. `gold` is absent when the source snippet has no
// label for the emotion under query.
struct FewShotExample {
  std::string text;
  Emotion emotion;
  std::optional<int> gold;
};

// k demonstration blocks (template + "Answer: <gold>") followed by the query
// prompt; blocks are separated by one blank line. k = 0 is the zero-shot prompt.
inline std::string render_few_shot(std::span<const FewShotExample> examples,
                                   std::string_view query_text, std::string_view language,
                                   Emotion emotion, std::size_t k,
                                   TemplateId id = TemplateId::track_a) {
  if (examples.size() != k) {
    throw Error(ErrorKind::argument, "few-shot prompt wants " + std::to_string(k) +
                                         " examples, got " + std::to_string(examples.size()));
  }
  std::string out;
  for (const auto& ex : examples) {
    if (ex.emotion != emotion || !ex.gold) {
      throw Error(ErrorKind::validation,
                  "few-shot example lacks a gold label for '" +
                      std::string(to_string(emotion)) + "'");
    }
    out += render_zero_shot(id, ex.text, language, emotion);
    out += "\nAnswer: ";
    out += std::to_string(*ex.gold);
    out += "\n\n";
  }
  out += render_zero_shot(id, query_text, language, emotion);
  return out;
}

}  // namespace emo
