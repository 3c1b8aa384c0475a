#pragma once

// Training pairs for an external cloze model: random-mask examples from the
// base set and all-"<unk>" examples from the alert set.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "factcloze/errors.hpp"
#include "factcloze/factors.hpp"
#include "factcloze/mask.hpp"

namespace factcloze {

struct TrainingExample {
  std::string id;
  std::string input;
  std::string target;
  CorrectionMode mode = CorrectionMode::kSlotFill;
  std::vector<std::size_t> mask_indices;
  bool is_alert = false;

  bool operator==(const TrainingExample&) const = default;
};

struct TrainingOptions {
  double mask_rate = 0.5;
  std::uint64_t seed = 0;
  CorrectionMode mode = CorrectionMode::kSlotFill;
  std::size_t max_doc_chars = 4000;
};

/// FNV-1a, 64 bit. Stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Per-record seed derived from the corpus seed and the record id.
inline std::uint64_t record_seed(std::uint64_t seed, std::string_view record_id) {
  std::uint64_t z = seed ^ fnv1a64(record_id);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// max(1, round(rate * k)) distinct indices in [0, k), ascending. Uses
/// mt19937_64 with plain modulo reduction so the choice is identical on
/// every standard library.
inline std::vector<std::size_t> select_mask_subset(std::size_t k, double mask_rate,
                                                   std::uint64_t seed) {
  if (!(mask_rate > 0.0 && mask_rate <= 1.0))
    throw InvalidArgument("mask_rate must lie in (0, 1]");
  if (k == 0) return {};
  auto m = static_cast<std::size_t>(std::llround(mask_rate * static_cast<double>(k)));
  m = std::clamp<std::size_t>(m, 1, k);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pool(k);
  for (std::size_t i = 0; i < k; ++i) pool[i] = i;
  for (std::size_t i = 0; i < m; ++i) {
    auto j = i + static_cast<std::size_t>(rng() % (k - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// "⟨M0⟩ fill0 ⟨M1⟩ fill1 ..."
inline std::string slot_target(const std::vector<std::string>& fills) {
  std::string out;
  for (std::size_t i = 0; i < fills.size(); ++i) {
    if (i > 0) out += ' ';
    out += placeholder(i);
    out += ' ';
    out += fills[i];
  }
  return out;
}

/// nullopt means SKIP (no factors to mask).
inline std::optional<TrainingExample> make_training_example(
    const SourceDocument& document, std::string_view summary_sentence,
    const std::vector<FactualFactor>& factors, const TrainingOptions& options) {
  if (!(options.mask_rate > 0.0 && options.mask_rate <= 1.0))
    throw InvalidArgument("mask_rate must lie in (0, 1]");
  if (factors.empty()) return std::nullopt;

  auto selection = select_mask_subset(factors.size(), options.mask_rate, options.seed);
  auto masked = build_masked(summary_sentence, factors, selection, options.mode);

  TrainingExample ex;
  ex.input = render_input(document, masked, options.max_doc_chars);
  ex.mode = options.mode;
  ex.mask_indices = selection;
  if (options.mode == CorrectionMode::kFullSequence) {
    ex.target = std::string(summary_sentence);
  } else {
    std::vector<std::string> fills;
    for (const auto& f : masked.factors) fills.push_back(f.surface);
    ex.target = slot_target(fills);
  }
  return ex;
}

/// Every factor masked; the answer for each is "<unk>". nullopt means SKIP.
inline std::optional<TrainingExample> make_alert_example(const SourceDocument& document,
                                                         std::string_view summary_sentence,
                                                         const std::vector<FactualFactor>& factors,
                                                         const TrainingOptions& options) {
  if (factors.empty()) return std::nullopt;

  std::vector<std::size_t> all(factors.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto masked = build_masked(summary_sentence, factors, all, options.mode);

  TrainingExample ex;
  ex.input = render_input(document, masked, options.max_doc_chars);
  ex.mode = options.mode;
  ex.mask_indices = all;
  ex.is_alert = true;
  std::vector<std::string> unks(factors.size(), std::string(kUnk));
  ex.target = options.mode == CorrectionMode::kFullSequence
                  ? fill_template(masked.template_text, unks)
                  : slot_target(unks);
  return ex;
}

}  // namespace factcloze
