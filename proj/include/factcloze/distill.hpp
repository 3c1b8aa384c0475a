#pragma once

// Multi-dimensional filtering of (document, summary sentence) pairs into a
// faithful base set and a low-overlap alert set.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unistd.h>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "factcloze/errors.hpp"
#include "factcloze/factors.hpp"
#include "factcloze/text.hpp"

namespace factcloze {

inline constexpr std::string_view kMetricDae = "dae";
inline constexpr std::string_view kMetricSummac = "summac";
inline constexpr std::string_view kMetricCloze = "cloze";
inline constexpr std::string_view kMetricRouge2p = "rouge2p";

using ScoreMap = std::map<std::string, double, std::less<>>;

struct Thresholds {
  double alpha_dae = 0.0;
  double alpha_summac = 0.0;
  double alpha_cloze = 0.0;
  double alpha_rouge = 0.0;
  std::string dataset_label;
};

inline Thresholds cnn_dm_thresholds() { return {0.70, 0.45, 0.70, 0.30, "cnn_dm"}; }
inline Thresholds xsum_thresholds() { return {0.50, 0.02, 0.60, 0.15, "xsum"}; }

inline void validate(const Thresholds& t) {
  if (t.alpha_rouge < 0.0 || t.alpha_rouge > 1.0)
    throw ConfigError("alpha_rouge must lie in [0, 1]");
}

/// Flat `key = value` (or `key: value`) file; '#' starts a comment. All four
/// alphas are required.
inline Thresholds parse_thresholds(std::string_view content) {
  Thresholds t;
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(content)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto body = text::trim(line);
    if (body.empty()) continue;
    auto sep = body.find_first_of("=:");
    if (sep == std::string_view::npos)
      throw ConfigError("thresholds line " + std::to_string(lineno) + ": expected key = value");
    kv[std::string(text::trim(body.substr(0, sep)))] = std::string(text::trim(body.substr(sep + 1)));
  }
  auto number = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(std::string("thresholds: missing ") + key);
    try {
      std::size_t used = 0;
      double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(std::string("thresholds: ") + key + " is not a number");
    }
  };
  t.alpha_dae = number("alpha_dae");
  t.alpha_summac = number("alpha_summac");
  t.alpha_cloze = number("alpha_cloze");
  t.alpha_rouge = number("alpha_rouge");
  if (auto it = kv.find("dataset_label"); it != kv.end()) t.dataset_label = it->second;
  validate(t);
  return t;
}

inline Thresholds load_thresholds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open thresholds file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_thresholds(ss.str());
}

/// ROUGE-2 precision of `candidate` against `reference`.
///
/// Tokens: lowercase, whitespace split, leading/trailing ASCII punctuation
/// stripped, empties dropped. Value = clipped bigram matches / candidate
/// bigrams; a candidate with fewer than two tokens scores 0.
inline double rouge2_precision(std::string_view candidate, std::string_view reference) {
  auto cand = text::tokenize(candidate);
  if (cand.size() < 2) return 0.0;
  auto ref = text::tokenize(reference);
  std::map<std::pair<std::string_view, std::string_view>, long> ref_counts;
  for (std::size_t i = 0; i + 1 < ref.size(); ++i) ++ref_counts[{ref[i], ref[i + 1]}];
  std::map<std::pair<std::string_view, std::string_view>, long> cand_counts;
  for (std::size_t i = 0; i + 1 < cand.size(); ++i) ++cand_counts[{cand[i], cand[i + 1]}];
  long matched = 0;
  for (const auto& [bigram, count] : cand_counts) {
    auto it = ref_counts.find(bigram);
    if (it != ref_counts.end()) matched += std::min(count, it->second);
  }
  return static_cast<double>(matched) / static_cast<double>(cand.size() - 1);
}

enum class Decision { kKept, kDiscarded, kAlert };

inline std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::kKept: return "KEPT";
    case Decision::kDiscarded: return "DISCARDED";
    case Decision::kAlert: return "ALERT";
  }
  return "?";
}

namespace detail {

inline double require_metric(const ScoreMap& scores, std::string_view name) {
  auto it = scores.find(name);
  if (it == scores.end()) throw ConfigError("missing metric score: " + std::string(name));
  return it->second;
}

}  // namespace detail

/// KEPT iff every factual score reaches its threshold (equality keeps).
inline Decision filter_record(const ScoreMap& scores, const Thresholds& t) {
  double dae = detail::require_metric(scores, kMetricDae);
  double summac = detail::require_metric(scores, kMetricSummac);
  double cloze = detail::require_metric(scores, kMetricCloze);
  return dae >= t.alpha_dae && summac >= t.alpha_summac && cloze >= t.alpha_cloze
             ? Decision::kKept
             : Decision::kDiscarded;
}

struct ScoredPair {
  std::string id;
  std::string doc_id;
  std::string summary_sentence;
  ScoreMap scores;
};

struct DistillationRecord {
  std::string id;
  std::string doc_id;
  std::string summary_sentence;
  ScoreMap scores;
  Decision decision = Decision::kDiscarded;
  std::vector<FactualFactor> factors;  // populated for ALERT records
};

struct DistillationStats {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t discarded = 0;  // includes alert records
  std::size_t alert = 0;
  double retention = 0.0;
  std::map<std::string, std::size_t> rejections;  // factual metric -> records below its threshold
};

struct SummDsc {
  std::vector<DistillationRecord> base;
  std::vector<DistillationRecord> alert;
  std::vector<DistillationRecord> discarded;  // every non-KEPT record, alerts included
  DistillationStats stats;
};

/// Partitions scored pairs. Outputs are ordered by record id. A record
/// missing a required metric raises ConfigError naming the record.
inline SummDsc build_summdsc(std::vector<ScoredPair> pairs, const Thresholds& thresholds,
                             const FactorTagger& tagger = rule_based_tag) {
  validate(thresholds);
  std::sort(pairs.begin(), pairs.end(),
            [](const ScoredPair& a, const ScoredPair& b) { return a.id < b.id; });

  SummDsc out;
  out.stats.total = pairs.size();
  for (auto name : {kMetricDae, kMetricSummac, kMetricCloze})
    out.stats.rejections[std::string(name)] = 0;

  for (auto& p : pairs) {
    DistillationRecord rec{p.id, p.doc_id, p.summary_sentence, p.scores, Decision::kDiscarded, {}};
    double rouge = 0.0;
    try {
      rec.decision = filter_record(p.scores, thresholds);
      rouge = detail::require_metric(p.scores, kMetricRouge2p);
    } catch (const ConfigError& e) {
      throw ConfigError("record " + p.id + ": " + e.what());
    }
    if (p.scores.at(std::string(kMetricDae)) < thresholds.alpha_dae) ++out.stats.rejections["dae"];
    if (p.scores.at(std::string(kMetricSummac)) < thresholds.alpha_summac)
      ++out.stats.rejections["summac"];
    if (p.scores.at(std::string(kMetricCloze)) < thresholds.alpha_cloze)
      ++out.stats.rejections["cloze"];

    if (rec.decision == Decision::kKept) {
      out.base.push_back(std::move(rec));
      continue;
    }
    if (rouge < thresholds.alpha_rouge) {
      rec.decision = Decision::kAlert;
      rec.factors = sentence_factors(rec.summary_sentence, tagger);
      out.alert.push_back(rec);
    }
    out.discarded.push_back(std::move(rec));
  }
  out.stats.kept = out.base.size();
  out.stats.discarded = out.discarded.size();
  out.stats.alert = out.alert.size();
  out.stats.retention =
      out.stats.total == 0 ? 0.0 : static_cast<double>(out.stats.kept) / out.stats.total;
  return out;
}

// ---------------------------------------------------------------------------
// Metric adapters

struct ScoreRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// One record in, one score out.
class MetricAdapter {
 public:
  virtual ~MetricAdapter() = default;

  virtual std::string name() const = 0;
  virtual ScoreRange range() const = 0;
  virtual double score(std::string_view record_id, std::string_view document,
                       std::string_view summary_sentence) = 0;
};

class ConstantAdapter final : public MetricAdapter {
 public:
  ConstantAdapter(std::string name, double value, ScoreRange range = {})
      : name_(std::move(name)), value_(value), range_(range) {}

  std::string name() const override { return name_; }
  ScoreRange range() const override { return range_; }
  double score(std::string_view, std::string_view, std::string_view) override { return value_; }

 private:
  std::string name_;
  double value_;
  ScoreRange range_;
};

/// External scorer. Request: one JSON line {"id","document","summary_sentence"}
/// on stdin. Response: one JSON line {"metric","value"} on stdout.
class ProcessMetricAdapter final : public MetricAdapter {
 public:
  ProcessMetricAdapter(std::string name, std::string command, ScoreRange range = {})
      : name_(std::move(name)), command_(std::move(command)), range_(range) {}

  std::string name() const override { return name_; }
  ScoreRange range() const override { return range_; }

  double score(std::string_view record_id, std::string_view document,
               std::string_view summary_sentence) override {
    nlohmann::json req = {{"id", record_id},
                          {"document", document},
                          {"summary_sentence", summary_sentence}};
    auto response = run(req.dump() + "\n");
    nlohmann::json resp;
    try {
      resp = nlohmann::json::parse(response);
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError("adapter " + name_ + ": unparsable response: " + e.what());
    }
    if (!resp.is_object() || !resp.contains("value") || !resp["value"].is_number())
      throw ProtocolError("adapter " + name_ + ": response lacks numeric value");
    if (resp.contains("metric") && resp["metric"] != name_)
      throw ProtocolError("adapter " + name_ + ": response names metric " +
                          resp["metric"].dump());
    return resp["value"].get<double>();
  }

 private:
  std::string run(const std::string& input) const {
    char path[] = "/tmp/factcloze-metric-XXXXXX";
    int fd = ::mkstemp(path);
    if (fd < 0) throw BackendError("cannot create adapter request file", true);
    struct Unlink {
      const char* p;
      ~Unlink() { ::unlink(p); }
    } cleanup{path};
    bool ok = ::write(fd, input.data(), input.size()) == static_cast<ssize_t>(input.size());
    ::close(fd);
    if (!ok) throw BackendError("cannot write adapter request file", true);
    std::string cmd = command_ + " < '" + path + "'";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) throw BackendError("cannot start adapter " + name_, true);
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    if (::pclose(pipe) != 0) throw BackendError("adapter " + name_ + " failed", true);
    return out;
  }

  std::string name_;
  std::string command_;
  ScoreRange range_;
};

struct ScoringOutcome {
  ScoreMap scores;
  bool scored = true;  // false: UNSCORED
  std::string error;
};

/// Runs every adapter on one record and always adds the in-core rouge2p.
/// Adapter failures (including out-of-range values) leave the record
/// UNSCORED with the adapter named in `error`; they never throw.
inline ScoringOutcome score_record(std::string_view record_id, std::string_view document,
                                   std::string_view summary_sentence,
                                   std::span<MetricAdapter* const> adapters) {
  ScoringOutcome out;
  for (auto* adapter : adapters) {
    auto name = adapter->name();
    try {
      double v = adapter->score(record_id, document, summary_sentence);
      auto r = adapter->range();
      if (!(v >= r.lo && v <= r.hi))
        throw ProtocolError("value " + std::to_string(v) + " outside declared range");
      out.scores[name] = v;
    } catch (const std::exception& e) {
      out.scored = false;
      out.error = "adapter " + name + ": " + e.what();
      return out;
    }
  }
  out.scores[std::string(kMetricRouge2p)] = rouge2_precision(summary_sentence, document);
  return out;
}

}  // namespace factcloze
