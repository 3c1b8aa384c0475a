#pragma once

// Tabulations over externally scored samples: per-error-type averages and
// equal-population percentile bins with box statistics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "factcloze/errors.hpp"
#include "factcloze/io.hpp"

namespace factcloze {

inline constexpr std::array<std::string_view, 9> kErrorTypes = {
    "PredE", "EntE", "CircE", "OutE", "GramE", "LinkE", "CorefE", "OtherE", "NE"};

inline bool is_error_type(std::string_view label) {
  return std::find(kErrorTypes.begin(), kErrorTypes.end(), label) != kErrorTypes.end();
}

struct ScoredSample {
  std::string id;
  std::map<std::string, double> scores;
  std::optional<std::string> label;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> ids)
      : Error(what + ": " + join(ids)), ids_(std::move(ids)) {}

  const std::vector<std::string>& ids() const { return ids_; }

 private:
  static std::string join(const std::vector<std::string>& ids) {
    std::string s;
    for (const auto& id : ids) {
      if (!s.empty()) s += ", ";
      s += id;
    }
    return s;
  }

  std::vector<std::string> ids_;
};

/// Groups long-format score lines by sample id and attaches labels.
inline std::vector<ScoredSample> assemble_samples(const std::vector<io::ScoreLine>& scores,
                                                  const std::vector<io::LabelLine>& labels = {}) {
  std::map<std::string, ScoredSample> by_id;
  for (const auto& s : scores) {
    auto& sample = by_id[s.id];
    sample.id = s.id;
    sample.scores[s.metric] = s.value;
  }
  for (const auto& l : labels) {
    auto it = by_id.find(l.id);
    if (it != by_id.end()) it->second.label = l.label;
  }
  std::vector<ScoredSample> out;
  for (auto& [id, sample] : by_id) out.push_back(std::move(sample));
  return out;
}

struct ErrorTypeTable {
  std::vector<std::string> metrics;                               // sorted
  std::map<std::string, std::map<std::string, double>> mean;      // metric -> label -> mean
  std::map<std::string, std::map<std::string, std::size_t>> count;

  std::optional<double> cell(const std::string& metric, std::string_view label) const {
    auto m = mean.find(metric);
    if (m == mean.end()) return std::nullopt;
    auto c = m->second.find(std::string(label));
    if (c == m->second.end()) return std::nullopt;
    return c->second;
  }
};

/// Arithmetic mean of each metric over the samples carrying each label.
/// Labels with no samples have no cell. Throws ValidationError if any
/// sample is unlabeled or uses a label outside the fixed vocabulary.
inline ErrorTypeTable report_error_type_averages(const std::vector<ScoredSample>& samples) {
  std::vector<std::string> unlabeled;
  std::vector<std::string> unknown;
  for (const auto& s : samples) {
    if (!s.label) unlabeled.push_back(s.id);
    else if (!is_error_type(*s.label)) unknown.push_back(s.id);
  }
  if (!unlabeled.empty()) throw ValidationError("unlabeled samples", unlabeled);
  if (!unknown.empty()) throw ValidationError("samples with unknown error type", unknown);

  ErrorTypeTable table;
  std::map<std::string, std::map<std::string, double>> sum;
  std::set<std::string> metrics;
  for (const auto& s : samples) {
    for (const auto& [metric, value] : s.scores) {
      metrics.insert(metric);
      sum[metric][*s.label] += value;
      ++table.count[metric][*s.label];
    }
  }
  table.metrics.assign(metrics.begin(), metrics.end());
  for (const auto& [metric, by_label] : sum) {
    for (const auto& [label, total] : by_label)
      table.mean[metric][label] = total / static_cast<double>(table.count[metric][label]);
  }
  return table;
}

/// Header "metric,PredE,...,NE"; absent cells are empty fields.
inline std::string error_type_csv(const ErrorTypeTable& table) {
  std::vector<io::CsvRow> rows;
  io::CsvRow header{"metric"};
  for (auto label : kErrorTypes) header.emplace_back(label);
  rows.push_back(std::move(header));
  for (const auto& metric : table.metrics) {
    io::CsvRow row{metric};
    for (auto label : kErrorTypes) {
      auto v = table.cell(metric, label);
      row.push_back(v ? io::format_double(*v) : std::string());
    }
    rows.push_back(std::move(row));
  }
  return io::write_csv(rows);
}

struct BoxStats {
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Linear interpolation between closest ranks: position (n - 1) * p of the
/// sorted values.
inline double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("quantile of empty set");
  double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline BoxStats box_stats(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  BoxStats b;
  b.count = values.size();
  b.min = values.front();
  b.q1 = quantile(values, 0.25);
  b.median = quantile(values, 0.5);
  b.q3 = quantile(values, 0.75);
  b.max = values.back();
  return b;
}

struct PercentileBin {
  std::size_t bin = 0;
  std::vector<std::string> sample_ids;
  double anchor_min = 0;
  double anchor_max = 0;
  std::map<std::string, BoxStats> boxes;  // non-anchor metric -> stats
};

/// Sorts samples by (anchor score, id) and cuts them into `n_bins`
/// equal-population bins (sizes differ by at most one). Box statistics are
/// computed per bin for every other metric present in the bin.
inline std::vector<PercentileBin> report_percentile_bins(const std::vector<ScoredSample>& samples,
                                                         const std::string& anchor,
                                                         std::size_t n_bins) {
  if (n_bins < 2) throw ConfigError("need at least 2 bins");
  if (samples.size() < n_bins)
    throw ConfigError("need at least " + std::to_string(n_bins) + " samples, got " +
                      std::to_string(samples.size()));
  std::vector<std::string> missing;
  for (const auto& s : samples) {
    if (!s.scores.count(anchor)) missing.push_back(s.id);
  }
  if (!missing.empty()) throw ValidationError("samples without anchor metric " + anchor, missing);

  std::vector<const ScoredSample*> order;
  for (const auto& s : samples) order.push_back(&s);
  std::sort(order.begin(), order.end(), [&](const ScoredSample* a, const ScoredSample* b) {
    double x = a->scores.at(anchor);
    double y = b->scores.at(anchor);
    return x != y ? x < y : a->id < b->id;
  });

  std::vector<PercentileBin> bins(n_bins);
  const std::size_t n = order.size();
  for (std::size_t b = 0; b < n_bins; ++b) {
    std::size_t from = b * n / n_bins;
    std::size_t to = (b + 1) * n / n_bins;
    auto& bin = bins[b];
    bin.bin = b;
    bin.anchor_min = order[from]->scores.at(anchor);
    bin.anchor_max = order[to - 1]->scores.at(anchor);
    std::map<std::string, std::vector<double>> values;
    for (std::size_t i = from; i < to; ++i) {
      bin.sample_ids.push_back(order[i]->id);
      for (const auto& [metric, v] : order[i]->scores) {
        if (metric != anchor) values[metric].push_back(v);
      }
    }
    for (auto& [metric, vs] : values) bin.boxes[metric] = box_stats(std::move(vs));
  }
  return bins;
}

inline std::string percentile_bins_csv(const std::vector<PercentileBin>& bins) {
  std::vector<io::CsvRow> rows{{"bin", "anchor_min", "anchor_max", "metric", "count", "min", "q1",
                                "median", "q3", "max"}};
  for (const auto& bin : bins) {
    for (const auto& [metric, b] : bin.boxes) {
      rows.push_back({std::to_string(bin.bin), io::format_double(bin.anchor_min),
                      io::format_double(bin.anchor_max), metric, std::to_string(b.count),
                      io::format_double(b.min), io::format_double(b.q1),
                      io::format_double(b.median), io::format_double(b.q3),
                      io::format_double(b.max)});
    }
  }
  return io::write_csv(rows);
}

}  // namespace factcloze
