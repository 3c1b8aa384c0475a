#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factcloze/errors.hpp"
#include "factcloze/text.hpp"

namespace factcloze {

/// Kind of a factual factor. Entity subtypes and noun phrases share one flat
/// enum so a factor's category is a single value.
enum class FactorType { kPerson, kOrg, kLoc, kDate, kNumber, kOther, kNounPhrase };

inline constexpr std::array<FactorType, 7> kAllFactorTypes = {
    FactorType::kPerson, FactorType::kOrg,   FactorType::kLoc,       FactorType::kDate,
    FactorType::kNumber, FactorType::kOther, FactorType::kNounPhrase};

constexpr bool is_entity(FactorType t) { return t != FactorType::kNounPhrase; }

inline std::string_view to_string(FactorType t) {
  switch (t) {
    case FactorType::kPerson: return "ENTITY-PERSON";
    case FactorType::kOrg: return "ENTITY-ORG";
    case FactorType::kLoc: return "ENTITY-LOC";
    case FactorType::kDate: return "ENTITY-DATE";
    case FactorType::kNumber: return "ENTITY-NUMBER";
    case FactorType::kOther: return "ENTITY-OTHER";
    case FactorType::kNounPhrase: return "NOUN_PHRASE";
  }
  return "?";
}

inline std::optional<FactorType> parse_factor_type(std::string_view s) {
  for (auto t : kAllFactorTypes) {
    if (to_string(t) == s) return t;
  }
  // Short aliases for command lines.
  if (s == "PERSON") return FactorType::kPerson;
  if (s == "ORG") return FactorType::kOrg;
  if (s == "LOC") return FactorType::kLoc;
  if (s == "DATE") return FactorType::kDate;
  if (s == "NUMBER") return FactorType::kNumber;
  if (s == "OTHER") return FactorType::kOther;
  if (s == "NP") return FactorType::kNounPhrase;
  return std::nullopt;
}

/// A typed span of one sentence. Offsets are UTF-8 byte offsets, [start, end).
struct FactualFactor {
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;
  FactorType type = FactorType::kOther;
  std::size_t index = 0;

  bool operator==(const FactualFactor&) const = default;
};

struct SentenceSpan {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
};

struct SourceDocument {
  std::string id;
  std::string text;
  std::vector<SentenceSpan> sentences;
};

struct Hypothesis {
  std::string id;
  std::string doc_id;
  std::string text;
};

/// Splits on '.', '!' or '?' (plus trailing closing quotes/brackets) followed
/// by whitespace. Each sentence is trimmed; offsets point into `text`.
inline std::vector<SentenceSpan> split_sentences(std::string_view text) {
  std::vector<SentenceSpan> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && text::is_space(text[b])) ++b;
    while (e > b && text::is_space(text[e - 1])) --e;
    if (e > b) out.push_back({std::string(text.substr(b, e - b)), b, e});
  };
  std::size_t begin = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    while (j < text.size() && (text[j] == '"' || text[j] == '\'' || text[j] == ')' || text[j] == ']'))
      ++j;
    if (j == text.size() || text::is_space(text[j])) {
      emit(begin, j);
      begin = j;
      i = j == 0 ? 0 : j - 1;
    }
  }
  emit(begin, text.size());
  return out;
}

inline SourceDocument make_document(std::string id, std::string text) {
  SourceDocument doc{std::move(id), std::move(text), {}};
  doc.sentences = split_sentences(doc.text);
  return doc;
}

inline void validate(const SourceDocument& doc) {
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    const auto& s = doc.sentences[i];
    std::string where = "document " + doc.id + " sentence " + std::to_string(i);
    if (s.start > s.end || s.end > doc.text.size())
      throw InvalidArgument(where + ": offsets out of bounds");
    if (s.start < cursor) throw InvalidArgument(where + ": offsets overlap or are not ascending");
    if (std::string_view(doc.text).substr(s.start, s.end - s.start) != s.text)
      throw InvalidArgument(where + ": text does not match its offsets");
    cursor = s.end;
  }
}

/// One span emitted by a tagger: the factor-tagger contract's output triple.
struct TaggedSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  FactorType type = FactorType::kOther;

  bool operator==(const TaggedSpan&) const = default;
};

/// Sentence in, typed spans out. Must be deterministic per configuration.
using FactorTagger = std::function<std::vector<TaggedSpan>(std::string_view)>;

namespace detail {

struct WordToken {
  std::size_t start;
  std::size_t end;
};

inline bool is_word_byte(char c) {
  auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || text::is_digit(c) || (c >= 'a' && c <= 'z') || text::is_upper(c);
}

// Word tokens: runs of letters/digits (and non-ASCII bytes). '-' joins two
// word bytes; '.' and ',' join two digits so "3.5" and "1,200" stay whole.
inline std::vector<WordToken> word_tokens(std::string_view s) {
  std::vector<WordToken> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_byte(s[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < s.size()) {
      if (is_word_byte(s[i])) {
        ++i;
        continue;
      }
      bool joiner = i + 1 < s.size() && i > start &&
                    ((s[i] == '-' && is_word_byte(s[i - 1]) && is_word_byte(s[i + 1])) ||
                     ((s[i] == '.' || s[i] == ',') && text::is_digit(s[i - 1]) &&
                      text::is_digit(s[i + 1])));
      if (!joiner) break;
      ++i;
    }
    out.push_back({start, i});
  }
  return out;
}

inline bool is_number_token(std::string_view tok) {
  if (tok.empty() || !text::is_digit(tok.front())) return false;
  return std::all_of(tok.begin(), tok.end(),
                     [](char c) { return text::is_digit(c) || c == '.' || c == ','; });
}

inline bool is_year_token(std::string_view tok) {
  return tok.size() == 4 && std::all_of(tok.begin(), tok.end(), text::is_digit) &&
         (tok[0] == '1' || tok[0] == '2');
}

inline bool is_month_token(std::string_view tok) {
  static constexpr std::array<std::string_view, 12> kMonths = {
      "January", "February", "March",     "April",   "May",      "June",
      "July",    "August",   "September", "October", "November", "December"};
  return std::find(kMonths.begin(), kMonths.end(), tok) != kMonths.end();
}

inline bool only_whitespace(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), text::is_space);
}

}  // namespace detail

/// Deterministic fallback tagger.
///   - maximal runs of capitalized tokens separated only by whitespace; a
///     run starting at the first token needs at least two tokens. Runs of
///     two or more are PERSON, single tokens OTHER.
///   - number tokens (digits with internal '.' or ',') are NUMBER.
///   - month names and four-digit years (1xxx, 2xxx) are DATE.
inline std::vector<TaggedSpan> rule_based_tag(std::string_view sentence) {
  std::vector<TaggedSpan> out;
  auto tokens = detail::word_tokens(sentence);
  auto tok_text = [&](const detail::WordToken& t) {
    return sentence.substr(t.start, t.end - t.start);
  };

  std::size_t run_first = 0;
  std::size_t run_len = 0;
  auto flush_run = [&] {
    if (run_len == 0) return;
    if (run_first != 0 || run_len >= 2) {
      out.push_back({tokens[run_first].start, tokens[run_first + run_len - 1].end,
                     run_len >= 2 ? FactorType::kPerson : FactorType::kOther});
    }
    run_len = 0;
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto tok = tok_text(tokens[i]);
    if (detail::is_month_token(tok) || detail::is_year_token(tok)) {
      flush_run();
      out.push_back({tokens[i].start, tokens[i].end, FactorType::kDate});
      continue;
    }
    if (detail::is_number_token(tok)) {
      flush_run();
      out.push_back({tokens[i].start, tokens[i].end, FactorType::kNumber});
      continue;
    }
    if (text::is_upper(tok.front())) {
      bool joins = run_len > 0 && run_first + run_len == i &&
                   detail::only_whitespace(sentence.substr(
                       tokens[i - 1].end, tokens[i].start - tokens[i - 1].end));
      if (!joins) {
        flush_run();
        run_first = i;
      }
      ++run_len;
      continue;
    }
    flush_run();
  }
  flush_run();

  std::sort(out.begin(), out.end(),
            [](const TaggedSpan& a, const TaggedSpan& b) { return a.start < b.start; });
  return out;
}

/// Runs `tagger` on `sentence` and turns its spans into indexed factors sorted
/// by (start, end). Spans may still overlap; see resolve_overlaps.
inline std::vector<FactualFactor> extract_factors(std::string_view sentence,
                                                  const FactorTagger& tagger) {
  if (sentence.empty()) throw InvalidArgument("extract_factors: empty sentence");

  std::vector<TaggedSpan> spans;
  try {
    spans = tagger(sentence);
  } catch (const std::exception& e) {
    throw ExtractionError("tagger failed", e.what());
  }

  std::vector<FactualFactor> factors;
  factors.reserve(spans.size());
  for (const auto& span : spans) {
    std::string diag = "span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                       ") on sentence of length " + std::to_string(sentence.size());
    if (span.start >= span.end || span.end > sentence.size())
      throw ExtractionError("tagger returned an invalid span", diag);
    if (!text::is_char_boundary(sentence, span.start) ||
        !text::is_char_boundary(sentence, span.end))
      throw ExtractionError("tagger span splits a UTF-8 sequence", diag);
    auto surface = sentence.substr(span.start, span.end - span.start);
    if (surface == "<unk>") throw ExtractionError("tagger returned the reserved <unk> surface", diag);
    factors.push_back({std::string(surface), span.start, span.end, span.type, 0});
  }
  std::sort(factors.begin(), factors.end(), [](const auto& a, const auto& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  for (std::size_t i = 0; i < factors.size(); ++i) factors[i].index = i;
  return factors;
}

inline std::vector<FactualFactor> extract_factors(std::string_view sentence) {
  return extract_factors(sentence, rule_based_tag);
}

/// Drops overlapping spans. Priority: ENTITY over NOUN_PHRASE, then the
/// longer span, then the smaller start. Survivors are re-indexed 0..K-1.
inline std::vector<FactualFactor> resolve_overlaps(std::vector<FactualFactor> factors) {
  std::vector<std::size_t> order(factors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = factors[a];
    const auto& y = factors[b];
    if (is_entity(x.type) != is_entity(y.type)) return is_entity(x.type);
    auto lx = x.end - x.start;
    auto ly = y.end - y.start;
    if (lx != ly) return lx > ly;
    return x.start < y.start;
  });

  std::vector<FactualFactor> kept;
  for (auto i : order) {
    const auto& f = factors[i];
    bool clash = std::any_of(kept.begin(), kept.end(), [&](const FactualFactor& k) {
      return f.start < k.end && k.start < f.end;
    });
    if (!clash) kept.push_back(f);
  }
  std::sort(kept.begin(), kept.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].index = i;
  return kept;
}

/// Overlap-free factors of a single sentence.
inline std::vector<FactualFactor> sentence_factors(std::string_view sentence,
                                                   const FactorTagger& tagger = rule_based_tag) {
  if (sentence.empty()) return {};
  return resolve_overlaps(extract_factors(sentence, tagger));
}

/// Factors of every sentence of `doc`, with offsets into doc.text and a
/// document-wide index.
inline std::vector<FactualFactor> document_factors(const SourceDocument& doc,
                                                   const FactorTagger& tagger = rule_based_tag) {
  std::vector<FactualFactor> out;
  for (const auto& sentence : doc.sentences) {
    for (auto f : sentence_factors(sentence.text, tagger)) {
      f.start += sentence.start;
      f.end += sentence.start;
      f.index = out.size();
      out.push_back(std::move(f));
    }
  }
  return out;
}

/// Throws InvalidArgument unless `factors` are sorted, disjoint and slice-exact.
inline void check_factors(std::string_view sentence, const std::vector<FactualFactor>& factors) {
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const auto& f = factors[i];
    std::string where = "factor " + std::to_string(i);
    if (f.start >= f.end || f.end > sentence.size())
      throw InvalidArgument(where + ": span out of bounds");
    if (i > 0 && f.start < cursor) throw InvalidArgument(where + ": overlaps previous factor");
    if (sentence.substr(f.start, f.end - f.start) != f.surface)
      throw InvalidArgument(where + ": surface does not match sentence slice");
    cursor = f.end;
  }
}

}  // namespace factcloze
