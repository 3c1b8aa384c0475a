#pragma once

#include <algorithm>
#include <cstddef>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "factcloze/backend.hpp"
#include "factcloze/errors.hpp"
#include "factcloze/factors.hpp"
#include "factcloze/mask.hpp"
#include "factcloze/text.hpp"

namespace factcloze {

struct CorrectionOptions {
  CorrectionMode mode = CorrectionMode::kSlotFill;
  bool self_diagnosis = true;
  bool alert_on_alignment_failure = false;
  std::size_t max_doc_chars = 4000;
  std::set<FactorType> factor_categories{kAllFactorTypes.begin(), kAllFactorTypes.end()};
  // Forced fills for the joint pass, by slot (disturbed-decoding experiments).
  std::vector<Prefill> prefilled;
  FactorTagger tagger = rule_based_tag;
};

inline void validate(const CorrectionOptions& options) {
  if (options.max_doc_chars == 0) throw InvalidArgument("max_doc_chars must be positive");
  if (options.factor_categories.empty())
    throw InvalidArgument("factor_categories must not be empty");
  if (!options.tagger) throw InvalidArgument("no factor tagger configured");
}

enum class AlertReason { kNone, kUnkFill, kAlignmentFailure };

inline std::string_view to_string(AlertReason r) {
  switch (r) {
    case AlertReason::kNone: return "NONE";
    case AlertReason::kUnkFill: return "UNK_FILL";
    case AlertReason::kAlignmentFailure: return "ALIGNMENT_FAILURE";
  }
  return "?";
}

struct AlertDecision {
  bool alert = false;
  AlertReason reason = AlertReason::kNone;

  bool operator==(const AlertDecision&) const = default;
};

struct CorrectionResult {
  std::string corrected;
  std::vector<FactorChange> changes;
  // Factor indices kept by self-diagnosis; nullopt means diagnosis was off
  // and every factor was masked.
  std::optional<std::vector<std::size_t>> diagnosis_kept;
  bool alert = false;
  AlertReason alert_reason = AlertReason::kNone;
  std::string raw_backend_output;
  std::size_t backend_calls = 0;
};

/// Alert iff a fill is "<unk>", the merged text contains "<unk>", or
/// alignment failed and the options ask to flag that.
inline AlertDecision detect_alert(const FillResult& fills, std::string_view merged,
                                  const CorrectionOptions& options) {
  bool unk = text::contains(merged, kUnk) ||
             std::any_of(fills.fills.begin(), fills.fills.end(),
                         [](const std::string& f) { return text::trim(f) == kUnk; });
  if (!fills.alignment_ok && text::contains(fills.raw_output, kUnk)) unk = true;
  if (unk) return {true, AlertReason::kUnkFill};
  if (!fills.alignment_ok && options.alert_on_alignment_failure)
    return {true, AlertReason::kAlignmentFailure};
  return {};
}

inline AlertDecision detect_alert(const FillResult& fills, const CorrectionOptions& options) {
  return detect_alert(fills, {}, options);
}

inline AlertDecision detect_alert(std::string_view merged, const CorrectionOptions& options) {
  return detect_alert(FillResult{}, merged, options);
}

namespace detail {

inline std::string context_of(const SourceDocument& doc, const Hypothesis& hyp) {
  return "doc " + doc.id + ", hypothesis " + hyp.id;
}

// Re-throws backend failures with record context, keeping the error kind.
template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const BackendError& e) {
    throw BackendError(context + ": " + e.what(), e.retryable());
  } catch (const ProtocolError& e) {
    throw ProtocolError(context + ": " + e.what());
  } catch (const MergeError& e) {
    throw ProtocolError(context + ": " + e.what());
  }
}

inline BackendRequest make_request(const SourceDocument& document, const MaskedHypothesis& masked,
                                   const ClozeBackend& backend, const CorrectionOptions& options) {
  auto caps = backend.capabilities();
  std::size_t overhead = kSeparator.size() + masked.template_text.size();
  if (overhead >= caps.max_input_chars)
    throw InvalidArgument("masked hypothesis alone exceeds backend max_input_chars");
  std::size_t doc_budget = std::min(options.max_doc_chars, caps.max_input_chars - overhead);

  BackendRequest request;
  request.rendered_input = render_input(document, masked, std::max<std::size_t>(doc_budget, 1));
  if (request.rendered_input.size() > caps.max_input_chars) {
    // A one-byte budget can still emit a whole leading character.
    request.rendered_input = std::string(kSeparator) + masked.template_text;
  }
  request.slot_count = masked.factors.size();
  request.mode = options.mode;
  for (const auto& f : masked.factors) request.hints.push_back({f.surface, f.type});
  return request;
}

inline std::vector<FactualFactor> correctable_factors(const Hypothesis& hyp,
                                                      const CorrectionOptions& options) {
  auto all = sentence_factors(hyp.text, options.tagger);
  std::vector<FactualFactor> out;
  for (auto& f : all) {
    if (options.factor_categories.count(f.type)) out.push_back(std::move(f));
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].index = i;
  return out;
}

}  // namespace detail

/// Probes each factor on its own: mask only factor i, ask the backend, and
/// keep i iff the answer differs from the original surface (lowercase,
/// whitespace-collapsed comparison). A probe whose regenerated sentence
/// cannot be aligned gives no evidence and does not keep the factor.
/// Probes run concurrently when the backend allows it; the result is in
/// factor order either way.
inline std::vector<std::size_t> self_diagnose(const SourceDocument& document,
                                              const Hypothesis& hypothesis,
                                              const std::vector<FactualFactor>& factors,
                                              ClozeBackend& backend,
                                              const CorrectionOptions& options) {
  validate(options);
  check_factors(hypothesis.text, factors);

  auto probe = [&](std::size_t i) -> bool {
    auto context = detail::context_of(document, hypothesis) + ", factor " + std::to_string(i);
    return detail::with_context(context, [&] {
      std::size_t sel[] = {i};
      auto masked = build_masked(hypothesis, factors, sel, options.mode);
      auto result = backend.fill(detail::make_request(document, masked, backend, options));
      if (!result.alignment_ok) return false;
      if (result.fills.size() != 1) throw ProtocolError("probe expected 1 fill");
      return !text::same_surface(result.fills[0], factors[i].surface);
    });
  };

  std::vector<char> differs(factors.size(), 0);
  if (backend.capabilities().supports_concurrent_calls && factors.size() > 1) {
    std::vector<std::future<bool>> jobs;
    jobs.reserve(factors.size());
    for (std::size_t i = 0; i < factors.size(); ++i)
      jobs.push_back(std::async(std::launch::async, probe, i));
    for (std::size_t i = 0; i < jobs.size(); ++i) differs[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < factors.size(); ++i) differs[i] = probe(i);
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < differs.size(); ++i) {
    if (differs[i]) kept.push_back(i);
  }
  return kept;
}

/// Extract, (optionally) diagnose, mask, fill jointly, merge, and flag.
///
/// K == 0 or an empty diagnosis set returns the hypothesis unchanged without
/// a joint backend call. When a regenerated sentence cannot be aligned, the
/// regenerated sentence itself is reported as the correction.
inline CorrectionResult correct(const SourceDocument& document, const Hypothesis& hypothesis,
                                ClozeBackend& backend, const CorrectionOptions& options) {
  validate(options);
  if (hypothesis.doc_id != document.id)
    throw InvalidArgument("hypothesis " + hypothesis.id + " refers to doc " + hypothesis.doc_id +
                          ", got " + document.id);

  CorrectionResult result;
  result.corrected = hypothesis.text;
  auto factors = detail::correctable_factors(hypothesis, options);
  if (factors.empty()) {
    if (options.self_diagnosis) result.diagnosis_kept.emplace();
    return result;
  }

  std::vector<std::size_t> selection;
  if (options.self_diagnosis) {
    selection = self_diagnose(document, hypothesis, factors, backend, options);
    result.backend_calls += factors.size();
    result.diagnosis_kept = selection;
    if (selection.empty()) return result;
  } else {
    for (std::size_t i = 0; i < factors.size(); ++i) selection.push_back(i);
  }

  auto context = detail::context_of(document, hypothesis);
  detail::with_context(context, [&] {
    auto masked = build_masked(hypothesis, factors, selection, options.mode);
    auto request = detail::make_request(document, masked, backend, options);
    request.prefilled = options.prefilled;
    validate(request);
    auto fills = backend.fill(request);
    ++result.backend_calls;
    result.raw_backend_output = fills.raw_output;

    if (fills.alignment_ok) {
      if (fills.fills.size() != masked.factors.size())
        throw MergeError(masked.factors.size(), fills.fills.size());
      auto merged = merge_fills(masked, fills);
      result.corrected = std::move(merged.corrected);
      result.changes = std::move(merged.changes);
    } else {
      result.corrected = fills.raw_output;
    }
    auto alert = detect_alert(fills, result.corrected, options);
    result.alert = alert.alert;
    result.alert_reason = alert.reason;
    return 0;
  });
  return result;
}

}  // namespace factcloze
