#pragma once

// Byte-level text helpers shared by the tagger, the mask engine, the oracle
// backend and ROUGE scoring. All offsets are byte offsets into UTF-8 strings;
// only ASCII bytes are ever classified, so multi-byte sequences pass through
// untouched.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace factcloze::text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) ||
         (u >= 123 && u <= 126);
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }

inline char to_lower(char c) { return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

// True for the second..fourth byte of a multi-byte UTF-8 sequence.
inline bool is_continuation_byte(char c) {
  return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

inline bool is_char_boundary(std::string_view s, std::size_t pos) {
  return pos == 0 || pos >= s.size() || !is_continuation_byte(s[pos]);
}

// Largest position <= pos that does not split a UTF-8 sequence.
inline std::size_t floor_char_boundary(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return s.size();
  while (pos > 0 && is_continuation_byte(s[pos])) --pos;
  return pos;
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

// Lowercase ASCII, collapse whitespace runs to one space, trim both ends.
inline std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(to_lower(c));
  }
  return out;
}

inline bool same_surface(std::string_view a, std::string_view b) {
  return normalize(a) == normalize(b);
}

// Lowercased piece with leading/trailing ASCII punctuation removed; may be empty.
inline std::string clean_piece(std::string_view piece) {
  std::size_t b = 0;
  std::size_t e = piece.size();
  while (b < e && is_ascii_punct(piece[b])) ++b;
  while (e > b && is_ascii_punct(piece[e - 1])) --e;
  std::string out(piece.substr(b, e - b));
  for (char& c : out) c = to_lower(c);
  return out;
}

// Whitespace tokenization, lowercased, punctuation-stripped, empties dropped.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) {
      auto tok = clean_piece(s.substr(start, i - start));
      if (!tok.empty()) tokens.push_back(std::move(tok));
    }
  }
  return tokens;
}

// The last `n` tokens of `s`, in reading order.
inline std::vector<std::string> last_tokens(std::string_view s, std::size_t n) {
  std::vector<std::string> rev;
  std::size_t i = s.size();
  while (i > 0 && rev.size() < n) {
    while (i > 0 && is_space(s[i - 1])) --i;
    std::size_t end = i;
    while (i > 0 && !is_space(s[i - 1])) --i;
    if (end > i) {
      auto tok = clean_piece(s.substr(i, end - i));
      if (!tok.empty()) rev.push_back(std::move(tok));
    }
  }
  return {rev.rbegin(), rev.rend()};
}

// The first `n` tokens of `s`.
inline std::vector<std::string> first_tokens(std::string_view s, std::size_t n) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size() && out.size() < n) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) {
      auto tok = clean_piece(s.substr(start, i - start));
      if (!tok.empty()) out.push_back(std::move(tok));
    }
  }
  return out;
}

inline bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

}  // namespace factcloze::text
