#pragma once

// Generators and independent reference implementations shared by the unit
// tests and the acceptance runner. Nothing here calls into the library's
// own tokenizer or counters.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "factcloze/factors.hpp"

namespace factcloze::testutil {

inline const std::string kObituaryDoc =
    "Temperton died in London last week at the age of 66 after \"a brief aggressive battle "
    "with cancer\", Jon Platt of Warner/Chappell music publishing said.";
inline const std::string kObituaryHyp =
    "Templeton Templeton, one of the UK's most famous 66, has died at the age of 74.";

// ---------------------------------------------------------------------------
// Random sentences with hand-placed factor spans.

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> pool = {
      "the",   "a",     "of",     "said",  "river", "Paris", "42",    "3.5",   "Zürich",
      "café",  "北京",  "naïve",  "über",  "x",     "Mr",    "(big)", "\"q\"", "it's",
      "one,",  "end.",  "déjà",   "vu",    "2019",  "May",   "«»",    "ok",    "ÅB"};
  return pool;
}

struct RandomCase {
  std::string sentence;
  std::vector<FactualFactor> factors;
  std::vector<std::size_t> selection;
};

/// Builds a sentence from random words and separators, marks random
/// contiguous word runs as factors and picks a random subset of them.
inline RandomCase random_case(std::mt19937_64& rng) {
  const auto& pool = word_pool();
  std::uniform_int_distribution<std::size_t> nwords(1, 14);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> coin(0, 3);
  static const std::vector<std::string> seps = {" ", "  ", ", ", " - ", "\t", "/"};
  std::uniform_int_distribution<std::size_t> sep_pick(0, seps.size() - 1);

  std::size_t n = nwords(rng);
  std::vector<std::pair<std::size_t, std::size_t>> words;
  RandomCase c;
  if (coin(rng) == 0) c.sentence += " ";
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) c.sentence += seps[sep_pick(rng)];
    std::size_t b = c.sentence.size();
    c.sentence += pool[pick(rng)];
    words.push_back({b, c.sentence.size()});
  }
  if (coin(rng) == 0) c.sentence += ".";

  std::size_t i = 0;
  while (i < words.size()) {
    if (coin(rng) == 0) {
      std::size_t len = 1 + static_cast<std::size_t>(coin(rng) % 2);
      std::size_t j = std::min(words.size(), i + len);
      FactualFactor f;
      f.start = words[i].first;
      f.end = words[j - 1].second;
      f.surface = c.sentence.substr(f.start, f.end - f.start);
      f.type = kAllFactorTypes[static_cast<std::size_t>(rng() % kAllFactorTypes.size())];
      f.index = c.factors.size();
      c.factors.push_back(f);
      i = j;
    } else {
      ++i;
    }
  }
  for (std::size_t k = 0; k < c.factors.size(); ++k) {
    if (coin(rng) != 0) c.selection.push_back(k);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Brute-force ROUGE-2 precision: every candidate bigram is matched against
// an unused identical reference bigram by linear scan.

inline std::vector<std::string> naive_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string piece;
  while (in >> piece) {
    std::string cleaned;
    std::size_t b = 0, e = piece.size();
    auto punct = [](char ch) { return std::ispunct(static_cast<unsigned char>(ch)) != 0; };
    while (b < e && punct(piece[b])) ++b;
    while (e > b && punct(piece[e - 1])) --e;
    for (std::size_t i = b; i < e; ++i) {
      char ch = piece[i];
      cleaned += (ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : ch;
    }
    if (!cleaned.empty()) out.push_back(cleaned);
  }
  return out;
}

inline double brute_rouge2_precision(const std::string& candidate, const std::string& reference) {
  auto c = naive_tokens(candidate);
  auto r = naive_tokens(reference);
  if (c.size() < 2) return 0.0;
  std::vector<bool> used(r.size() < 2 ? 0 : r.size() - 1, false);
  std::size_t matched = 0;
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    for (std::size_t j = 0; j + 1 < r.size(); ++j) {
      if (!used[j] && c[i] == r[j] && c[i + 1] == r[j + 1]) {
        used[j] = true;
        ++matched;
        break;
      }
    }
  }
  return static_cast<double>(matched) / static_cast<double>(c.size() - 1);
}

inline std::string random_token_text(std::mt19937_64& rng, std::size_t max_tokens) {
  static const std::vector<std::string> vocab = {"a", "b", "c", "d", "A", "B.", "(c)", "e,", "f"};
  std::uniform_int_distribution<std::size_t> len(0, max_tokens);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::string s;
  std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) s += (rng() % 5 == 0) ? "  " : " ";
    s += vocab[pick(rng)];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Files

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("factcloze-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace factcloze::testutil
