#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factcloze/errors.hpp"
#include "factcloze/factors.hpp"
#include "factcloze/text.hpp"

namespace factcloze {

enum class CorrectionMode { kFullSequence, kSlotFill };

inline std::string_view to_string(CorrectionMode m) {
  return m == CorrectionMode::kFullSequence ? "FULL_SEQUENCE" : "SLOT_FILL";
}

inline std::optional<CorrectionMode> parse_mode(std::string_view s) {
  if (s == "FULL_SEQUENCE" || s == "full") return CorrectionMode::kFullSequence;
  if (s == "SLOT_FILL" || s == "slot") return CorrectionMode::kSlotFill;
  return std::nullopt;
}

// Wire-level reserved strings. Matched byte-exactly by every adapter.
inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kPlaceholderOpen = "⟨M";   // ⟨M
inline constexpr std::string_view kPlaceholderClose = "⟩";   // ⟩
inline constexpr std::string_view kSeparator = "\n⟨SEP⟩\n";

inline std::string placeholder(std::size_t k) {
  std::string out(kPlaceholderOpen);
  out += std::to_string(k);
  out += kPlaceholderClose;
  return out;
}

struct MaskedHypothesis {
  std::string original;
  std::vector<FactualFactor> factors;  // masked factors, slot order
  std::string template_text;
  CorrectionMode mode_hint = CorrectionMode::kSlotFill;
};

struct FillResult {
  std::vector<std::string> fills;
  std::string raw_output;  // regenerated sentence, or slot fills joined by '\n'
  CorrectionMode mode = CorrectionMode::kSlotFill;
  bool alignment_ok = true;
};

struct FactorChange {
  std::size_t index = 0;  // factor ordinal within the hypothesis
  std::string old_surface;
  std::string new_surface;
  bool changed = false;

  bool operator==(const FactorChange&) const = default;
};

struct MergeResult {
  std::string corrected;
  std::vector<FactorChange> changes;
};

/// Template cut at its placeholders: segments.size() == slot count + 1.
struct TemplateParts {
  std::vector<std::string_view> segments;

  std::size_t slot_count() const { return segments.empty() ? 0 : segments.size() - 1; }
};

namespace detail {

// Length of a placeholder starting at `pos`, or 0 if none; `k` receives its index.
inline std::size_t match_placeholder(std::string_view s, std::size_t pos, std::size_t& k) {
  if (s.substr(pos, kPlaceholderOpen.size()) != kPlaceholderOpen) return 0;
  std::size_t i = pos + kPlaceholderOpen.size();
  std::size_t digits_start = i;
  while (i < s.size() && text::is_digit(s[i])) ++i;
  if (i == digits_start) return 0;
  // No zero padding: "⟨M01⟩" is not a placeholder.
  if (s[digits_start] == '0' && i - digits_start > 1) return 0;
  if (s.substr(i, kPlaceholderClose.size()) != kPlaceholderClose) return 0;
  k = std::stoul(std::string(s.substr(digits_start, i - digits_start)));
  return i + kPlaceholderClose.size() - pos;
}

inline bool has_reserved_markup(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t k = 0;
    if (match_placeholder(s, i, k) > 0) return true;
  }
  return s.find(text::trim(kSeparator)) != std::string_view::npos;
}

}  // namespace detail

/// Throws ProtocolError if placeholders are not exactly ⟨M0⟩..⟨M(n-1)⟩ in order.
inline TemplateParts split_template(std::string_view tmpl) {
  TemplateParts parts;
  std::size_t seg_start = 0;
  std::size_t expected = 0;
  for (std::size_t i = 0; i < tmpl.size();) {
    std::size_t k = 0;
    std::size_t len = detail::match_placeholder(tmpl, i, k);
    if (len == 0) {
      ++i;
      continue;
    }
    if (k != expected)
      throw ProtocolError("placeholder " + placeholder(k) + " out of order, expected " +
                          placeholder(expected));
    parts.segments.push_back(tmpl.substr(seg_start, i - seg_start));
    ++expected;
    i += len;
    seg_start = i;
  }
  parts.segments.push_back(tmpl.substr(seg_start));
  return parts;
}

/// Replaces the selected factors with ⟨M0⟩.. in left-to-right order.
/// Unselected factors stay as literal text.
inline MaskedHypothesis build_masked(std::string_view sentence,
                                     const std::vector<FactualFactor>& factors,
                                     std::span<const std::size_t> selection,
                                     CorrectionMode mode = CorrectionMode::kSlotFill) {
  check_factors(sentence, factors);
  if (detail::has_reserved_markup(sentence))
    throw InvalidArgument("sentence contains reserved placeholder markup");

  std::vector<std::size_t> chosen(selection.begin(), selection.end());
  std::sort(chosen.begin(), chosen.end());
  chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
  if (!chosen.empty() && chosen.back() >= factors.size())
    throw InvalidArgument("selection index " + std::to_string(chosen.back()) +
                          " out of range for " + std::to_string(factors.size()) + " factors");

  MaskedHypothesis masked;
  masked.original = std::string(sentence);
  masked.mode_hint = mode;
  std::size_t cursor = 0;
  for (auto idx : chosen) {
    const auto& f = factors[idx];
    masked.template_text.append(sentence.substr(cursor, f.start - cursor));
    masked.template_text += placeholder(masked.factors.size());
    masked.factors.push_back(f);
    cursor = f.end;
  }
  masked.template_text.append(sentence.substr(cursor));
  return masked;
}

inline MaskedHypothesis build_masked(const Hypothesis& hypothesis,
                                     const std::vector<FactualFactor>& factors,
                                     std::span<const std::size_t> selection,
                                     CorrectionMode mode = CorrectionMode::kSlotFill) {
  return build_masked(hypothesis.text, factors, selection, mode);
}

/// Substitutes fills[i] for ⟨Mi⟩. `fills` must match the slot count.
inline std::string fill_template(std::string_view tmpl, std::span<const std::string> fills) {
  auto parts = split_template(tmpl);
  if (parts.slot_count() != fills.size()) throw MergeError(parts.slot_count(), fills.size());
  std::string out(parts.segments[0]);
  for (std::size_t i = 0; i < fills.size(); ++i) {
    out += fills[i];
    out += parts.segments[i + 1];
  }
  return out;
}

/// Cuts `doc_text` to at most `max_chars` bytes at a word boundary, then
/// drops trailing whitespace. A single oversized word is cut hard (on a
/// UTF-8 boundary).
inline std::string truncate_words(std::string_view doc_text, std::size_t max_chars) {
  if (doc_text.size() <= max_chars) return std::string(doc_text);
  std::size_t cut = max_chars;
  if (!text::is_space(doc_text[cut])) {
    std::size_t p = cut;
    while (p > 0 && !text::is_space(doc_text[p - 1])) --p;
    cut = p > 0 ? p : text::floor_char_boundary(doc_text, max_chars);
  }
  while (cut > 0 && text::is_space(doc_text[cut - 1])) --cut;
  if (cut == 0) cut = text::floor_char_boundary(doc_text, max_chars);
  return std::string(doc_text.substr(0, cut));
}

/// Document (possibly truncated) + separator line + template. The template
/// is never truncated.
inline std::string render_input(const SourceDocument& document, const MaskedHypothesis& masked,
                                std::size_t max_doc_chars) {
  if (max_doc_chars == 0) throw InvalidArgument("max_doc_chars must be positive");
  std::string out = truncate_words(document.text, max_doc_chars);
  out += kSeparator;
  out += masked.template_text;
  return out;
}

/// The template portion of a rendered input (everything after the separator).
inline std::string_view template_of(std::string_view rendered_input) {
  auto pos = rendered_input.rfind(kSeparator);
  if (pos == std::string_view::npos) throw ProtocolError("rendered input has no separator line");
  return rendered_input.substr(pos + kSeparator.size());
}

/// The document portion of a rendered input.
inline std::string_view document_of(std::string_view rendered_input) {
  auto pos = rendered_input.rfind(kSeparator);
  if (pos == std::string_view::npos) throw ProtocolError("rendered input has no separator line");
  return rendered_input.substr(0, pos);
}

inline MergeResult merge_fills(const MaskedHypothesis& masked, const FillResult& fills) {
  if (!fills.alignment_ok)
    throw InvalidArgument("merge_fills: fill result failed alignment");
  if (fills.fills.size() != masked.factors.size())
    throw MergeError(masked.factors.size(), fills.fills.size());

  MergeResult result;
  result.corrected = fill_template(masked.template_text, fills.fills);
  for (std::size_t i = 0; i < masked.factors.size(); ++i) {
    const auto& f = masked.factors[i];
    result.changes.push_back(
        {f.index, f.surface, fills.fills[i], !text::same_surface(f.surface, fills.fills[i])});
  }
  return result;
}

namespace detail {

// Normalized view of a string (lowercase, whitespace runs -> one space,
// trimmed) with a map from normalized positions back to source offsets.
struct NormalizedText {
  std::string chars;
  std::vector<std::size_t> origin;  // origin[i] = source offset of chars[i]; origin.back() = end
};

inline NormalizedText normalize_with_map(std::string_view s) {
  NormalizedText out;
  bool pending_space = false;
  std::size_t space_at = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (text::is_space(s[i])) {
      if (!pending_space) space_at = i;
      pending_space = !out.chars.empty();
      continue;
    }
    if (pending_space) {
      out.chars.push_back(' ');
      out.origin.push_back(space_at);
      pending_space = false;
    }
    out.chars.push_back(text::to_lower(s[i]));
    out.origin.push_back(i);
  }
  std::size_t end = s.size();
  while (end > 0 && text::is_space(s[end - 1])) --end;
  out.origin.push_back(end);
  return out;
}

inline FillResult failed_alignment(std::string_view regenerated) {
  FillResult r;
  r.raw_output = std::string(regenerated);
  r.mode = CorrectionMode::kFullSequence;
  r.alignment_ok = false;
  return r;
}

}  // namespace detail

/// Recovers per-slot fills from a fully regenerated sentence.
///
/// The template's K+1 literal segments are matched in order against the
/// regenerated text, case-insensitively and with whitespace collapsed. The
/// first segment is anchored at the start, the last at the end, and middle
/// segments take their leftmost match after the cursor. Text between two
/// matches (trimmed) is a fill. Two slots separated by nothing or only by
/// whitespace cannot be split unambiguously, so they fail alignment, as does
/// any segment that is not found.
inline FillResult align_full_sequence(std::string_view tmpl, std::string_view regenerated) {
  auto parts = split_template(tmpl);
  const std::size_t k = parts.slot_count();
  auto hay = detail::normalize_with_map(regenerated);
  std::string_view h = hay.chars;

  std::vector<std::string> segs;
  segs.reserve(parts.segments.size());
  for (auto seg : parts.segments) segs.push_back(text::normalize(seg));
  for (std::size_t i = 1; i + 1 < segs.size(); ++i) {
    if (segs[i].empty()) return detail::failed_alignment(regenerated);
  }

  // Matched ranges [begin, end) in normalized coordinates.
  std::vector<std::pair<std::size_t, std::size_t>> spans(segs.size());
  if (h.substr(0, segs[0].size()) != segs[0]) return detail::failed_alignment(regenerated);
  spans[0] = {0, segs[0].size()};
  std::size_t cursor = segs[0].size();

  const std::string& last = segs.back();
  if (k > 0) {
    if (last.size() > h.size() || h.substr(h.size() - last.size()) != last)
      return detail::failed_alignment(regenerated);
    spans.back() = {h.size() - last.size(), h.size()};
  }
  std::size_t limit = k > 0 ? spans.back().first : h.size();
  if (k > 0 && limit < cursor) return detail::failed_alignment(regenerated);

  for (std::size_t i = 1; i + 1 < segs.size(); ++i) {
    auto pos = h.substr(0, limit).find(segs[i], cursor);
    if (pos == std::string_view::npos) return detail::failed_alignment(regenerated);
    spans[i] = {pos, pos + segs[i].size()};
    cursor = pos + segs[i].size();
  }
  if (k == 0 && cursor != h.size()) return detail::failed_alignment(regenerated);

  FillResult result;
  result.mode = CorrectionMode::kFullSequence;
  result.raw_output = std::string(regenerated);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t b = hay.origin[spans[i].second];
    std::size_t e = hay.origin[spans[i + 1].first];
    if (spans[i].second == h.size()) b = hay.origin.back();
    if (spans[i + 1].first == h.size()) e = hay.origin.back();
    if (e < b) e = b;
    result.fills.emplace_back(text::trim(regenerated.substr(b, e - b)));
  }
  return result;
}

inline FillResult align_full_sequence(const MaskedHypothesis& masked, std::string_view regenerated) {
  return align_full_sequence(masked.template_text, regenerated);
}

}  // namespace factcloze
