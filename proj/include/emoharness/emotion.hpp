#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emoharness/error.hpp"

namespace emo {

enum class Track { A, B };

inline std::string_view to_string(Track track) {
  return track == Track::A ? "A" : "B";
}

inline Track parse_track(std::string_view s) {
  if (s == "A" || s == "a") return Track::A;
  if (s == "B" || s == "b") return Track::B;
  throw Error(ErrorKind::argument, "unknown track '" + std::string(s) + "' (expected A or B)");
}

// Inclusive upper bound of a gold/predicted label on the given track.
constexpr int max_label(Track track) { return track == Track::A ? 1 : 3; }

constexpr bool label_in_range(int value, Track track) {
  return value >= 0 && value <= max_label(track);
}

// Declaration order is the canonical instance order.
enum class Emotion { anger, disgust, fear, joy, sadness, surprise };

inline constexpr std::array<Emotion, 6> kAllEmotions = {
    Emotion::anger, Emotion::disgust, Emotion::fear,
    Emotion::joy,   Emotion::sadness, Emotion::surprise};

inline std::string_view to_string(Emotion e) {
  switch (e) {
    case Emotion::anger: return "anger";
    case Emotion::disgust: return "disgust";
    case Emotion::fear: return "fear";
    case Emotion::joy: return "joy";
    case Emotion::sadness: return "sadness";
    case Emotion::surprise: return "surprise";
  }
  return "?";
}

inline std::optional<Emotion> try_parse_emotion(std::string_view s) {
  for (Emotion e : kAllEmotions) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

inline Emotion parse_emotion(std::string_view s) {
  if (auto e = try_parse_emotion(s)) return *e;
  throw Error(ErrorKind::validation, "unknown emotion '" + std::string(s) + "'");
}

// The emotions annotated for one language, in a fixed order.
class EmotionSet {
 public:
  EmotionSet(std::string language_code, std::vector<Emotion> emotions)
      : language_(std::move(language_code)), emotions_(std::move(emotions)) {
    if (emotions_.empty()) {
      throw Error(ErrorKind::validation, "emotion set for '" + language_ + "' is empty");
    }
    for (std::size_t i = 0; i < emotions_.size(); ++i) {
      for (std::size_t j = i + 1; j < emotions_.size(); ++j) {
        if (emotions_[i] == emotions_[j]) {
          throw Error(ErrorKind::validation, "emotion set for '" + language_ +
                                                 "' repeats '" +
                                                 std::string(to_string(emotions_[i])) + "'");
        }
      }
    }
  }

  // All six emotions, minus the per-language exceptions of the shared task:
  // English has no disgust annotation, Afrikaans no surprise.
  static EmotionSet for_language(const std::string& code) {
    std::vector<Emotion> emotions(kAllEmotions.begin(), kAllEmotions.end());
    auto drop = [&](Emotion e) { std::erase(emotions, e); };
    if (code == "eng") drop(Emotion::disgust);
    if (code == "afr") drop(Emotion::surprise);
    return EmotionSet(code, std::move(emotions));
  }

  static EmotionSet all(std::string code) {
    return EmotionSet(std::move(code), {kAllEmotions.begin(), kAllEmotions.end()});
  }

  const std::string& language() const noexcept { return language_; }
  const std::vector<Emotion>& emotions() const noexcept { return emotions_; }
  std::size_t size() const noexcept { return emotions_.size(); }
  auto begin() const noexcept { return emotions_.begin(); }
  auto end() const noexcept { return emotions_.end(); }

  bool contains(Emotion e) const {
    return std::find(emotions_.begin(), emotions_.end(), e) != emotions_.end();
  }

  bool operator==(const EmotionSet&) const = default;

 private:
  std::string language_;
  std::vector<Emotion> emotions_;
};

}  // namespace emo
