#pragma once

// Batch drivers behind the command-line tool. Each reads JSON-lines inputs,
// fans records out to a bounded worker pool and writes outputs in a
// deterministic order. Record-level problems go to an errors file; only
// I/O and configuration failures throw.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "factcloze/backend.hpp"
#include "factcloze/distill.hpp"
#include "factcloze/errors.hpp"
#include "factcloze/factors.hpp"
#include "factcloze/io.hpp"
#include "factcloze/parallel.hpp"
#include "factcloze/pipeline.hpp"
#include "factcloze/reports.hpp"
#include "factcloze/training.hpp"

namespace factcloze {

enum class BackendKind { kIdentity, kOracle, kProcess };
enum class AlertDisposition { kFlag, kDrop, kSeparateFile };

inline std::optional<BackendKind> parse_backend_kind(std::string_view s) {
  if (s == "identity") return BackendKind::kIdentity;
  if (s == "oracle") return BackendKind::kOracle;
  if (s == "process") return BackendKind::kProcess;
  return std::nullopt;
}

inline std::optional<AlertDisposition> parse_disposition(std::string_view s) {
  if (s == "flag") return AlertDisposition::kFlag;
  if (s == "drop") return AlertDisposition::kDrop;
  if (s == "separate-file") return AlertDisposition::kSeparateFile;
  return std::nullopt;
}

/// Builds (or hands out) the backend used for one document.
using BackendFactory = std::function<std::shared_ptr<ClozeBackend>(const SourceDocument&)>;

namespace detail {

inline std::string sibling(const std::string& path, const std::string& name) {
  auto dir = std::filesystem::path(path).parent_path();
  return (dir / name).string();
}

inline std::map<std::string, SourceDocument> index_documents(
    const io::Parsed<SourceDocument>& docs) {
  std::map<std::string, SourceDocument> out;
  for (const auto& d : docs.records) out.emplace(d.id, d);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// correct

struct CorrectConfig {
  std::string docs_path;
  std::string hypotheses_path;
  std::string output_path;
  std::string alerts_path;  // separate-file disposition; default: alerts.jsonl next to output
  std::string errors_path;  // default: errors.jsonl next to output
  BackendKind backend = BackendKind::kIdentity;
  std::string backend_command;  // kProcess
  BackendCapabilities process_capabilities;
  CorrectionOptions options;
  std::size_t workers = 1;
  AlertDisposition disposition = AlertDisposition::kFlag;
};

struct CorrectSummary {
  std::size_t records = 0;
  std::size_t corrected = 0;
  std::size_t unchanged = 0;
  std::size_t alerts = 0;
  std::size_t errors = 0;
  std::size_t written = 0;  // main output
  std::size_t alerts_written = 0;
  std::size_t errors_written = 0;

  nlohmann::json to_json() const {
    return {{"records", records}, {"corrected", corrected}, {"unchanged", unchanged},
            {"alerts", alerts},   {"errors", errors}};
  }
};

inline BackendFactory default_backend_factory(const CorrectConfig& config) {
  switch (config.backend) {
    case BackendKind::kIdentity: {
      auto shared = std::make_shared<IdentityBackend>();
      return [shared](const SourceDocument&) { return shared; };
    }
    case BackendKind::kOracle: {
      auto tagger = config.options.tagger;
      return [tagger](const SourceDocument& doc) {
        return std::make_shared<OracleBackend>(doc, tagger);
      };
    }
    case BackendKind::kProcess: {
      if (config.backend_command.empty())
        throw ConfigError("process backend needs a command (--backend-cmd or FACTCLOZE_BACKEND_CMD)");
      std::shared_ptr<ClozeBackend> shared =
          std::make_shared<ProcessBackend>(config.backend_command, config.process_capabilities);
      if (!config.process_capabilities.supports_concurrent_calls) {
        auto serialized = std::shared_ptr<ClozeBackend>(
            new SerializedBackend(*shared), [keep = shared](ClozeBackend* p) { delete p; });
        shared = serialized;
      }
      return [shared](const SourceDocument&) { return shared; };
    }
  }
  throw ConfigError("unknown backend");
}

inline CorrectSummary cmd_correct(const CorrectConfig& config, BackendFactory factory = {}) {
  validate(config.options);
  if (!factory) factory = default_backend_factory(config);

  auto docs = io::read_jsonl<SourceDocument>(config.docs_path, io::parse_document);
  auto hyps = io::read_jsonl<Hypothesis>(config.hypotheses_path, io::parse_hypothesis);
  auto doc_index = detail::index_documents(docs);

  struct Outcome {
    std::optional<CorrectionResult> result;
    std::string error;
  };
  auto outcomes = parallel_map(hyps.records.size(), config.workers, [&](std::size_t i) {
    const auto& hyp = hyps.records[i];
    Outcome out;
    auto it = doc_index.find(hyp.doc_id);
    if (it == doc_index.end()) {
      out.error = "unresolvable doc_id " + hyp.doc_id;
      return out;
    }
    try {
      auto backend = factory(it->second);
      out.result = correct(it->second, hyp, *backend, config.options);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    return out;
  });

  std::string errors_path =
      config.errors_path.empty() ? detail::sibling(config.output_path, "errors.jsonl") : config.errors_path;
  io::JsonlWriter main_out(config.output_path);
  io::JsonlWriter errors_out(errors_path);
  std::optional<io::JsonlWriter> alerts_out;
  if (config.disposition == AlertDisposition::kSeparateFile) {
    alerts_out.emplace(config.alerts_path.empty() ? detail::sibling(config.output_path, "alerts.jsonl")
                                                  : config.alerts_path);
  }

  CorrectSummary summary;
  summary.records = hyps.records.size() + hyps.errors.size();

  // Malformed lines and failed records are merged by source line so the
  // errors file follows input order too.
  std::vector<std::pair<std::size_t, nlohmann::json>> error_records;
  for (const auto& e : hyps.errors) error_records.emplace_back(e.line, io::to_json(e));

  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& hyp = hyps.records[i];
    const auto& o = outcomes[i];
    if (!o.result) {
      error_records.emplace_back(hyps.lines[i], io::to_json(io::LineError{hyps.lines[i], hyp.id, o.error}));
      continue;
    }
    const auto& r = *o.result;
    auto record = io::to_json(hyp, r);
    if (r.alert) {
      ++summary.alerts;
      if (config.disposition == AlertDisposition::kFlag) {
        main_out.write(record);
      } else if (config.disposition == AlertDisposition::kSeparateFile) {
        alerts_out->write(record);
      }
      continue;
    }
    if (r.corrected != hyp.text) ++summary.corrected;
    else ++summary.unchanged;
    main_out.write(record);
  }
  std::stable_sort(error_records.begin(), error_records.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [line, rec] : error_records) errors_out.write(rec);

  summary.errors = error_records.size();
  summary.written = main_out.count();
  summary.alerts_written = alerts_out ? alerts_out->count() : 0;
  summary.errors_written = errors_out.count();
  return summary;
}

// ---------------------------------------------------------------------------
// distill

struct AdapterSpec {
  std::string name;
  std::string command;
  ScoreRange range;
};

struct DistillConfig {
  std::string docs_path;
  std::string pairs_path;
  std::optional<std::string> scores_path;  // precomputed {id, metric, value} lines
  std::vector<AdapterSpec> adapters;
  Thresholds thresholds = cnn_dm_thresholds();
  std::string out_dir;
  std::size_t workers = 1;
  FactorTagger tagger = rule_based_tag;
};

struct DistillSummary {
  DistillationStats stats;
  std::size_t errors = 0;
  std::size_t unscored = 0;

  nlohmann::json to_json() const {
    auto j = io::to_json(stats);
    j["errors"] = errors;
    j["unscored"] = unscored;
    return j;
  }
};

/// Scores (or looks up scores for) every pair and partitions the scored
/// ones. With a scores file the adapters are never invoked. Writes
/// base.jsonl, alert.jsonl, discarded.jsonl (non-alert discards),
/// errors.jsonl and stats.json into out_dir.
inline DistillSummary cmd_distill(const DistillConfig& config,
                                  std::span<MetricAdapter* const> extra_adapters = {}) {
  validate(config.thresholds);
  if (!config.scores_path && config.adapters.empty() && extra_adapters.empty())
    throw ConfigError("distill needs a scores file or at least one metric adapter");

  std::vector<std::unique_ptr<MetricAdapter>> owned;
  std::vector<MetricAdapter*> adapters(extra_adapters.begin(), extra_adapters.end());
  for (const auto& spec : config.adapters) {
    owned.push_back(std::make_unique<ProcessMetricAdapter>(spec.name, spec.command, spec.range));
    adapters.push_back(owned.back().get());
  }

  auto docs = io::read_jsonl<SourceDocument>(config.docs_path, io::parse_document);
  auto pairs = io::read_jsonl<ScoredPair>(config.pairs_path, io::parse_pair);
  auto doc_index = detail::index_documents(docs);

  std::optional<std::map<std::string, ScoreMap>> precomputed;
  std::vector<io::LineError> errors = pairs.errors;
  if (config.scores_path) {
    auto lines = io::read_jsonl<io::ScoreLine>(*config.scores_path, io::parse_score_line);
    precomputed.emplace();
    for (const auto& s : lines.records) (*precomputed)[s.id][s.metric] = s.value;
    for (auto e : lines.errors) {
      e.message = "scores file: " + e.message;
      errors.push_back(std::move(e));
    }
  }

  struct Scored {
    std::optional<ScoredPair> pair;
    std::string error;
    bool unscored = false;
  };
  auto scored = parallel_map(pairs.records.size(), config.workers, [&](std::size_t i) {
    const auto& p = pairs.records[i];
    Scored out;
    auto doc = doc_index.find(p.doc_id);
    if (doc == doc_index.end()) {
      out.error = "unresolvable doc_id " + p.doc_id;
      return out;
    }
    ScoredPair sp = p;
    if (precomputed) {
      auto it = precomputed->find(p.id);
      if (it != precomputed->end()) {
        for (const auto& [k, v] : it->second) sp.scores[k] = v;
      }
      sp.scores[std::string(kMetricRouge2p)] = rouge2_precision(p.summary_sentence, doc->second.text);
    } else {
      auto outcome = score_record(p.id, doc->second.text, p.summary_sentence, adapters);
      if (!outcome.scored) {
        out.unscored = true;
        out.error = "UNSCORED: " + outcome.error;
        return out;
      }
      for (const auto& [k, v] : outcome.scores) sp.scores[k] = v;
    }
    try {
      filter_record(sp.scores, config.thresholds);
    } catch (const ConfigError& e) {
      out.error = e.what();
      return out;
    }
    out.pair = std::move(sp);
    return out;
  });

  DistillSummary summary;
  std::vector<ScoredPair> valid;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].pair) {
      valid.push_back(std::move(*scored[i].pair));
    } else {
      summary.unscored += scored[i].unscored ? 1 : 0;
      errors.push_back({pairs.lines[i], pairs.records[i].id, scored[i].error});
    }
  }
  auto result = build_summdsc(std::move(valid), config.thresholds, config.tagger);
  summary.stats = result.stats;
  summary.errors = errors.size();

  std::filesystem::create_directories(config.out_dir);
  auto path = [&](const char* name) { return (std::filesystem::path(config.out_dir) / name).string(); };
  io::JsonlWriter base(path("base.jsonl"));
  for (const auto& r : result.base) base.write(io::to_json(r));
  io::JsonlWriter alert(path("alert.jsonl"));
  for (const auto& r : result.alert) alert.write(io::to_json(r));
  io::JsonlWriter discarded(path("discarded.jsonl"));
  for (const auto& r : result.discarded) {
    if (r.decision != Decision::kAlert) discarded.write(io::to_json(r));
  }
  std::sort(errors.begin(), errors.end(),
            [](const io::LineError& a, const io::LineError& b) { return a.line < b.line; });
  io::JsonlWriter err(path("errors.jsonl"));
  for (const auto& e : errors) err.write(io::to_json(e));

  auto stats = summary.to_json();
  stats["thresholds"] = {{"dataset_label", config.thresholds.dataset_label},
                         {"alpha_dae", config.thresholds.alpha_dae},
                         {"alpha_summac", config.thresholds.alpha_summac},
                         {"alpha_cloze", config.thresholds.alpha_cloze},
                         {"alpha_rouge", config.thresholds.alpha_rouge}};
  io::write_file(path("stats.json"), stats.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// build-train

struct BuildTrainConfig {
  std::string docs_path;
  std::string base_path;                  // distill base.jsonl (or plain pairs)
  std::optional<std::string> alert_path;  // distill alert.jsonl
  std::string output_path;
  TrainingOptions options;
  double alert_ratio = 1.0;  // fraction of alert records turned into examples
  std::size_t workers = 1;
  FactorTagger tagger = rule_based_tag;
};

struct BuildTrainSummary {
  std::size_t examples = 0;
  std::size_t alert_examples = 0;
  std::size_t skipped = 0;
  std::size_t errors = 0;

  nlohmann::json to_json() const {
    return {{"examples", examples}, {"alert_examples", alert_examples}, {"skipped", skipped},
            {"errors", errors}};
  }
};

/// Output lines are sorted by record id (base before alert on equal ids).
/// Each record's mask draw is seeded from the corpus seed and its id, so
/// the corpus is byte-identical for identical inputs regardless of workers.
inline BuildTrainSummary cmd_build_train(const BuildTrainConfig& config) {
  if (!(config.alert_ratio >= 0.0 && config.alert_ratio <= 1.0))
    throw ConfigError("alert ratio must lie in [0, 1]");
  if (!(config.options.mask_rate > 0.0 && config.options.mask_rate <= 1.0))
    throw ConfigError("mask rate must lie in (0, 1]");

  auto docs = io::read_jsonl<SourceDocument>(config.docs_path, io::parse_document);
  auto doc_index = detail::index_documents(docs);

  struct Job {
    ScoredPair pair;
    bool alert;
  };
  std::vector<Job> jobs;
  BuildTrainSummary summary;
  auto base = io::read_jsonl<ScoredPair>(config.base_path, io::parse_pair);
  summary.errors += base.errors.size();
  for (auto& p : base.records) jobs.push_back({std::move(p), false});
  if (config.alert_path) {
    auto alert = io::read_jsonl<ScoredPair>(*config.alert_path, io::parse_pair);
    summary.errors += alert.errors.size();
    for (auto& p : alert.records) {
      // Deterministic subsample: keep iff the record's uniform draw < ratio.
      double u = static_cast<double>(record_seed(config.options.seed ^ 0xa1e27ULL, p.id) >> 11) *
                 0x1.0p-53;
      if (u < config.alert_ratio) jobs.push_back({std::move(p), true});
    }
  }
  std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return a.pair.id != b.pair.id ? a.pair.id < b.pair.id : (!a.alert && b.alert);
  });

  struct Made {
    std::optional<TrainingExample> example;
    bool error = false;
  };
  auto made = parallel_map(jobs.size(), config.workers, [&](std::size_t i) {
    const auto& job = jobs[i];
    Made out;
    auto doc = doc_index.find(job.pair.doc_id);
    if (doc == doc_index.end() || job.pair.summary_sentence.empty()) {
      out.error = true;
      return out;
    }
    try {
      auto factors = sentence_factors(job.pair.summary_sentence, config.tagger);
      auto opts = config.options;
      opts.seed = record_seed(config.options.seed, job.pair.id);
      out.example = job.alert ? make_alert_example(doc->second, job.pair.summary_sentence, factors, opts)
                              : make_training_example(doc->second, job.pair.summary_sentence,
                                                      factors, opts);
      if (out.example) out.example->id = job.pair.id;
    } catch (const std::exception&) {
      out.error = true;
    }
    return out;
  });

  io::JsonlWriter writer(config.output_path);
  for (const auto& m : made) {
    if (m.error) {
      ++summary.errors;
    } else if (!m.example) {
      ++summary.skipped;
    } else {
      writer.write(io::to_json(*m.example));
      ++summary.examples;
      if (m.example->is_alert) ++summary.alert_examples;
    }
  }
  return summary;
}

// ---------------------------------------------------------------------------
// report

inline std::vector<ScoredSample> load_samples(const std::string& scores_path,
                                              const std::optional<std::string>& labels_path) {
  auto scores = io::read_jsonl<io::ScoreLine>(scores_path, io::parse_score_line);
  if (!scores.errors.empty())
    throw ConfigError("scores file line " + std::to_string(scores.errors.front().line) + ": " +
                      scores.errors.front().message);
  std::vector<io::LabelLine> labels;
  if (labels_path) {
    auto parsed = io::read_jsonl<io::LabelLine>(*labels_path, io::parse_label_line);
    if (!parsed.errors.empty())
      throw ConfigError("labels file line " + std::to_string(parsed.errors.front().line) + ": " +
                        parsed.errors.front().message);
    labels = std::move(parsed.records);
  }
  return assemble_samples(scores.records, labels);
}

}  // namespace factcloze
