#pragma once

// Deterministic synthetic datasets for tests.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "emoharness/corpus.hpp"
#include "emoharness/evaluation.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "emoharness") {
    std::random_device rd;
    path_ = fs::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  return out + "\"";
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> w = {
      "the", "a", "today", "my", "friend", "work", "home", "weather", "dinner", "city",
      "train", "phone", "morning", "night", "news", "music", "game", "school", "dog", "coffee"};
  return w;
}

inline const std::vector<std::string>& cue_words(emo::Emotion e) {
  static const std::map<emo::Emotion, std::vector<std::string>> cues = {
      {emo::Emotion::anger, {"angry", "furious", "hate"}},
      {emo::Emotion::disgust, {"gross", "nasty", "disgusting"}},
      {emo::Emotion::fear, {"scared", "afraid", "nervous"}},
      {emo::Emotion::joy, {"happy", "great", "love"}},
      {emo::Emotion::sadness, {"sad", "lonely", "tired"}},
      {emo::Emotion::surprise, {"wow", "unexpected", "shocked"}},
  };
  return cues.at(e);
}

// Snippets whose text contains cue words for (most of) their positive
// emotions, so keyword-style mocks score above chance but not perfectly.
// Track B carries intensities 0..3; track A labels are presence bits.
inline std::vector<emo::Snippet> make_snippets(std::size_t n, const emo::EmotionSet& set,
                                               emo::Track track, std::uint64_t seed,
                                               const std::string& id_prefix = "s") {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> intensity(0, 3);
  std::bernoulli_distribution present(0.35), cue_drop(0.2), noise(0.1);
  std::uniform_int_distribution<std::size_t> filler(0, filler_words().size() - 1);
  std::uniform_int_distribution<int> len(3, 9);

  std::vector<emo::Snippet> out;
  for (std::size_t i = 0; i < n; ++i) {
    emo::Snippet s;
    s.id = id_prefix + std::to_string(i);
    s.language = set.language();
    std::vector<std::string> words;
    for (int w = len(rng); w > 0; --w) words.push_back(filler_words()[filler(rng)]);
    for (auto e : set) {
      int v = 0;
      if (present(rng)) v = track == emo::Track::A ? 1 : 1 + intensity(rng) % 3;
      s.labels[e] = v;
      const auto& cues = cue_words(e);
      if ((v > 0 && !cue_drop(rng)) || noise(rng)) {
        for (int c = 0; c < std::max(1, v); ++c) words.push_back(cues[static_cast<std::size_t>(c) % cues.size()]);
      }
    }
    std::shuffle(words.begin(), words.end(), rng);
    for (std::size_t w = 0; w < words.size(); ++w) s.text += (w ? " " : "") + words[w];
    s.text += i % 3 == 0 ? "!" : ".";
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string to_csv(const std::vector<emo::Snippet>& snippets, const emo::EmotionSet& set) {
  std::string out = "id,text";
  for (auto e : set) out += "," + std::string(emo::to_string(e));
  out += "\n";
  for (const auto& s : snippets) {
    out += s.id + "," + csv_quote(s.text);
    for (auto e : set) out += "," + std::to_string(s.labels.at(e));
    out += "\n";
  }
  return out;
}

inline void write_dataset(const fs::path& p, const std::vector<emo::Snippet>& snippets,
                          const emo::EmotionSet& set) {
  write_text(p, to_csv(snippets, set));
}

// Track A view of a Track B dataset (presence = intensity >= 1).
inline std::vector<emo::Snippet> presence_of(std::vector<emo::Snippet> snippets) {
  for (auto& s : snippets) {
    for (auto& [e, v] : s.labels) v = v >= 1 ? 1 : 0;
  }
  return snippets;
}

}  // namespace fixtures
