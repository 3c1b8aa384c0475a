#pragma once

// JSON-lines schemas and CSV helpers.
//
//   documents   {id, text, sentences?: [{text, start, end}]}
//   hypotheses  {id, doc_id, text}
//   pairs       {id, doc_id, summary_sentence}
//   scores      {id, metric, value}
//   labels      {id, label}

#include <charconv>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "factcloze/distill.hpp"
#include "factcloze/errors.hpp"
#include "factcloze/factors.hpp"
#include "factcloze/mask.hpp"
#include "factcloze/pipeline.hpp"
#include "factcloze/training.hpp"

namespace factcloze::io {

using nlohmann::json;

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string id;        // record id when it could be read
  std::string message;
};

template <typename T>
struct Parsed {
  std::vector<T> records;
  std::vector<std::size_t> lines;  // source line of each record
  std::vector<LineError> errors;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path);
}

/// Parses every non-blank line with `parse`. Malformed lines become
/// LineErrors; the rest of the file is still processed.
template <typename T>
Parsed<T> parse_jsonl(std::string_view content, const std::function<T(const json&)>& parse) {
  Parsed<T> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    auto nl = content.find('\n', pos);
    auto line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++lineno;
    if (!text::trim(line).empty()) {
      std::string id;
      try {
        auto j = json::parse(line);
        if (j.is_object() && j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
        out.records.push_back(parse(j));
        out.lines.push_back(lineno);
      } catch (const std::exception& e) {
        out.errors.push_back({lineno, id, e.what()});
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

template <typename T>
Parsed<T> read_jsonl(const std::string& path, const std::function<T(const json&)>& parse) {
  return parse_jsonl<T>(read_file(path), parse);
}

namespace detail {

inline std::string str_field(const json& j, const char* key) {
  if (!j.is_object()) throw InvalidArgument("record is not a JSON object");
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw InvalidArgument(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

}  // namespace detail

inline SourceDocument parse_document(const json& j) {
  SourceDocument doc;
  doc.id = detail::str_field(j, "id");
  doc.text = detail::str_field(j, "text");
  if (j.contains("sentences")) {
    for (const auto& s : j.at("sentences")) {
      doc.sentences.push_back({s.at("text").get<std::string>(), s.at("start").get<std::size_t>(),
                               s.at("end").get<std::size_t>()});
    }
    validate(doc);
  } else {
    doc.sentences = split_sentences(doc.text);
  }
  return doc;
}

inline json to_json(const SourceDocument& doc) {
  json sentences = json::array();
  for (const auto& s : doc.sentences)
    sentences.push_back({{"text", s.text}, {"start", s.start}, {"end", s.end}});
  return {{"id", doc.id}, {"text", doc.text}, {"sentences", sentences}};
}

inline Hypothesis parse_hypothesis(const json& j) {
  return {detail::str_field(j, "id"), detail::str_field(j, "doc_id"), detail::str_field(j, "text")};
}

inline json to_json(const Hypothesis& h) {
  return {{"id", h.id}, {"doc_id", h.doc_id}, {"text", h.text}};
}

/// A pair line. Extra fields written by `distill` (scores, factors, ...)
/// are accepted and the scores, if present, are kept.
inline ScoredPair parse_pair(const json& j) {
  ScoredPair p{detail::str_field(j, "id"), detail::str_field(j, "doc_id"),
               detail::str_field(j, "summary_sentence"), {}};
  if (j.contains("scores")) {
    for (const auto& [k, v] : j.at("scores").items()) p.scores[k] = v.get<double>();
  }
  return p;
}

struct ScoreLine {
  std::string id;
  std::string metric;
  double value = 0.0;
};

inline ScoreLine parse_score_line(const json& j) {
  auto v = j.at("value");
  if (!v.is_number()) throw InvalidArgument("score value is not a number");
  return {detail::str_field(j, "id"), detail::str_field(j, "metric"), v.get<double>()};
}

struct LabelLine {
  std::string id;
  std::string label;
};

inline LabelLine parse_label_line(const json& j) {
  return {detail::str_field(j, "id"), detail::str_field(j, "label")};
}

inline json to_json(const FactualFactor& f) {
  return {{"surface", f.surface}, {"start", f.start}, {"end", f.end},
          {"category", to_string(f.type)}, {"index", f.index}};
}

inline FactualFactor parse_factor(const json& j) {
  auto type = parse_factor_type(j.at("category").get<std::string>());
  if (!type) throw InvalidArgument("unknown factor category");
  return {j.at("surface").get<std::string>(), j.at("start").get<std::size_t>(),
          j.at("end").get<std::size_t>(), *type, j.at("index").get<std::size_t>()};
}

inline json to_json(const FactorChange& c) {
  return {{"index", c.index}, {"old", c.old_surface}, {"new", c.new_surface}, {"changed", c.changed}};
}

inline json to_json(const Hypothesis& h, const CorrectionResult& r) {
  json changes = json::array();
  for (const auto& c : r.changes) changes.push_back(to_json(c));
  json kept = r.diagnosis_kept ? json(*r.diagnosis_kept) : json("ALL");
  return {{"id", h.id},
          {"doc_id", h.doc_id},
          {"original", h.text},
          {"corrected", r.corrected},
          {"changes", changes},
          {"alert", r.alert},
          {"alert_reason", to_string(r.alert_reason)},
          {"diagnosis_kept", kept}};
}

inline json to_json(const DistillationRecord& r) {
  json factors = json::array();
  for (const auto& f : r.factors) factors.push_back(to_json(f));
  json scores = json::object();
  for (const auto& [k, v] : r.scores) scores[k] = v;
  return {{"id", r.id},
          {"doc_id", r.doc_id},
          {"summary_sentence", r.summary_sentence},
          {"scores", scores},
          {"decision", to_string(r.decision)},
          {"factors", factors}};
}

inline json to_json(const DistillationStats& s) {
  return {{"total", s.total},       {"kept", s.kept},
          {"discarded", s.discarded}, {"alert", s.alert},
          {"retention", s.retention}, {"rejections", s.rejections}};
}

inline json to_json(const TrainingExample& ex) {
  return {{"id", ex.id},
          {"input", ex.input},
          {"target", ex.target},
          {"mode", to_string(ex.mode)},
          {"mask_indices", ex.mask_indices},
          {"is_alert", ex.is_alert}};
}

inline json to_json(const LineError& e) {
  return {{"line", e.line}, {"id", e.id}, {"error", e.message}};
}

/// Appends records as JSON lines; throws IoError on failure.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path) : path_(path), out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot write " + path);
  }

  void write(const json& record) {
    out_ << record.dump() << '\n';
    if (!out_) throw IoError("write failed: " + path_);
    ++count_;
  }

  std::size_t count() const { return count_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// CSV

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, end);
}

inline std::string csv_field(std::string_view f) {
  if (f.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(f);
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

using CsvRow = std::vector<std::string>;

inline std::string write_csv(const std::vector<CsvRow>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_field(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<CsvRow> parse_csv(std::string_view content) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool quoted = false;
  bool row_open = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    row_open = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      row_open = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw InvalidArgument("unterminated quoted CSV field");
  if (row_open) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace factcloze::io
