#pragma once

// Cloze-model contract and the in-process backends.
//
// A backend receives the rendered input (document + separator + masked
// template) and produces one fill per placeholder, jointly and in ascending
// slot order: the fill for slot k may look at slots < k (including
// prefilled ones) and never at slots > k.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unistd.h>
#include <utility>
#include <vector>

#include "factcloze/errors.hpp"
#include "factcloze/factors.hpp"
#include "factcloze/mask.hpp"
#include "factcloze/text.hpp"

namespace factcloze {

struct Prefill {
  std::size_t slot = 0;
  std::string text;

  bool operator==(const Prefill&) const = default;
};

/// In-process side information about a slot. Never serialized on the wire;
/// backends that cannot rely on it (real models) simply ignore it.
struct SlotHint {
  std::string original;
  FactorType type = FactorType::kNounPhrase;
};

struct BackendRequest {
  std::string rendered_input;
  std::size_t slot_count = 0;
  CorrectionMode mode = CorrectionMode::kSlotFill;
  std::vector<Prefill> prefilled;  // strictly ascending slots, each < slot_count
  std::vector<SlotHint> hints;     // empty, or one per slot
};

inline void validate(const BackendRequest& request) {
  for (std::size_t i = 0; i < request.prefilled.size(); ++i) {
    if (request.prefilled[i].slot >= request.slot_count)
      throw InvalidArgument("prefilled slot " + std::to_string(request.prefilled[i].slot) +
                            " out of range");
    if (i > 0 && request.prefilled[i].slot <= request.prefilled[i - 1].slot)
      throw InvalidArgument("prefilled slots must be strictly ascending");
  }
  if (!request.hints.empty() && request.hints.size() != request.slot_count)
    throw InvalidArgument("slot hints must be empty or one per slot");
}

struct BackendCapabilities {
  bool supports_concurrent_calls = true;
  bool supports_prefill = true;
  std::size_t max_input_chars = 1 << 20;
};

class ClozeBackend {
 public:
  virtual ~ClozeBackend() = default;

  virtual BackendCapabilities capabilities() const = 0;
  virtual FillResult fill(const BackendRequest& request) = 0;
};

/// Packages slot fills as the backend's answer in the request's mode. In
/// FULL_SEQUENCE mode the fills are rendered into the template and the
/// resulting sentence goes through align_full_sequence, like a real
/// regenerating model's output would.
inline FillResult make_fill_result(const BackendRequest& request, std::vector<std::string> fills) {
  if (fills.size() != request.slot_count) throw ProtocolError("backend produced wrong fill count");
  if (request.mode == CorrectionMode::kFullSequence) {
    auto tmpl = template_of(request.rendered_input);
    return align_full_sequence(tmpl, fill_template(tmpl, fills));
  }
  FillResult r;
  r.mode = CorrectionMode::kSlotFill;
  for (std::size_t i = 0; i < fills.size(); ++i) {
    if (i > 0) r.raw_output += '\n';
    r.raw_output += fills[i];
  }
  r.fills = std::move(fills);
  return r;
}

namespace detail {

inline const std::string* prefill_for(const BackendRequest& request, std::size_t slot) {
  for (const auto& p : request.prefilled) {
    if (p.slot == slot) return &p.text;
  }
  return nullptr;
}

// Drives a per-slot generator in ascending order, honouring prefills.
template <typename SlotFn>
std::vector<std::string> fill_in_order(const BackendRequest& request, SlotFn&& next,
                                       std::vector<std::size_t>* order = nullptr) {
  std::vector<std::string> fills;
  fills.reserve(request.slot_count);
  for (std::size_t k = 0; k < request.slot_count; ++k) {
    if (order) order->push_back(k);
    if (const auto* pre = prefill_for(request, k)) {
      fills.push_back(*pre);
    } else {
      fills.push_back(next(k, std::span<const std::string>(fills.data(), fills.size())));
    }
  }
  return fills;
}

inline void check_request(const BackendRequest& request, const BackendCapabilities& caps) {
  validate(request);
  if (request.rendered_input.size() > caps.max_input_chars)
    throw InvalidArgument("rendered input exceeds backend max_input_chars");
  if (!request.prefilled.empty() && !caps.supports_prefill)
    throw InvalidArgument("backend does not support prefilled slots");
}

}  // namespace detail

/// Answers every slot with the factor it replaced (from the slot hints).
class IdentityBackend final : public ClozeBackend {
 public:
  BackendCapabilities capabilities() const override { return {}; }

  FillResult fill(const BackendRequest& request) override {
    detail::check_request(request, capabilities());
    if (request.hints.size() != request.slot_count)
      throw BackendError("identity backend needs one slot hint per slot", false);
    return make_fill_result(request, detail::fill_in_order(request, [&](std::size_t k, auto) {
                              return request.hints[k].original;
                            }));
  }
};

/// One backend call as seen by a ScriptedBackend.
struct CallRecord {
  BackendRequest request;
  std::vector<std::size_t> slot_order;
  std::vector<std::string> fills;
};

/// Test double with a call log. A slot rule computes each fill from the
/// request, the slot index and the fills already produced for earlier slots;
/// a rewrite rule instead returns a whole regenerated sentence (FULL_SEQUENCE
/// requests only).
class ScriptedBackend final : public ClozeBackend {
 public:
  using SlotRule =
      std::function<std::string(const BackendRequest&, std::size_t, std::span<const std::string>)>;
  using RewriteRule = std::function<std::string(const BackendRequest&)>;

  explicit ScriptedBackend(SlotRule rule, BackendCapabilities caps = {})
      : slot_rule_(std::move(rule)), caps_(caps) {}

  static std::unique_ptr<ScriptedBackend> fixed(std::vector<std::string> fills,
                                                BackendCapabilities caps = {}) {
    return std::make_unique<ScriptedBackend>(
        [fills = std::move(fills)](const BackendRequest&, std::size_t k, auto) -> std::string {
          if (k >= fills.size()) throw ProtocolError("script has no fill for slot " + std::to_string(k));
          return fills[k];
        },
        caps);
  }

  static std::unique_ptr<ScriptedBackend> rewriting(RewriteRule rule, BackendCapabilities caps = {}) {
    auto b = std::make_unique<ScriptedBackend>(SlotRule{}, caps);
    b->rewrite_rule_ = std::move(rule);
    return b;
  }

  BackendCapabilities capabilities() const override { return caps_; }

  FillResult fill(const BackendRequest& request) override {
    detail::check_request(request, caps_);
    CallRecord record{request, {}, {}};
    FillResult result;
    if (rewrite_rule_ && request.mode == CorrectionMode::kFullSequence) {
      result = align_full_sequence(template_of(request.rendered_input), rewrite_rule_(request));
    } else {
      if (!slot_rule_) throw BackendError("scripted backend has no slot rule", false);
      auto fills = detail::fill_in_order(
          request, [&](std::size_t k, std::span<const std::string> earlier) {
            return slot_rule_(request, k, earlier);
          },
          &record.slot_order);
      record.fills = fills;
      result = make_fill_result(request, std::move(fills));
    }
    std::lock_guard lock(mu_);
    log_.push_back(std::move(record));
    return result;
  }

  std::vector<CallRecord> call_log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  std::size_t call_count() const {
    std::lock_guard lock(mu_);
    return log_.size();
  }

 private:
  SlotRule slot_rule_;
  RewriteRule rewrite_rule_;
  BackendCapabilities caps_;
  mutable std::mutex mu_;
  std::vector<CallRecord> log_;
};

namespace detail {

inline constexpr std::size_t kOracleWindow = 6;
inline constexpr std::string_view kOtherSlotMarker = " \x1f ";

inline bool compatible(FactorType slot, FactorType candidate) {
  if (!is_entity(slot) || !is_entity(candidate)) return true;
  return slot == candidate || slot == FactorType::kOther || candidate == FactorType::kOther;
}

inline std::map<std::pair<std::string, std::string>, int> bigram_bag(
    const std::vector<std::string>& tokens) {
  std::map<std::pair<std::string, std::string>, int> bag;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i] == text::trim(kOtherSlotMarker) || tokens[i + 1] == text::trim(kOtherSlotMarker))
      continue;
    ++bag[{tokens[i], tokens[i + 1]}];
  }
  return bag;
}

inline int bigram_overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  auto ba = bigram_bag(a);
  auto bb = bigram_bag(b);
  int n = 0;
  for (const auto& [bigram, count] : ba) {
    auto it = bb.find(bigram);
    if (it != bb.end()) n += std::min(count, it->second);
  }
  return n;
}

}  // namespace detail

/// Retrieval stand-in for a trained cloze model.
///
/// For each slot, every compatible document factor is scored by bigram
/// overlap between the slot's template context and the candidate's document
/// context (6 tokens each side, left compared with left and right with
/// right). A candidate whose surface was already used by an earlier slot has
/// its score halved. The best score wins, ties go to the earliest document
/// position, and an all-zero slot gets "<unk>". Slots without hints accept
/// any candidate type.
inline FillResult oracle_fill(const BackendRequest& request, const SourceDocument& document,
                              const std::vector<FactualFactor>& doc_factors) {
  validate(request);
  auto parts = split_template(template_of(request.rendered_input));
  if (parts.slot_count() != request.slot_count)
    throw ProtocolError("template has " + std::to_string(parts.slot_count()) +
                        " placeholders but request says " + std::to_string(request.slot_count));

  struct CandidateContext {
    std::vector<std::string> left;
    std::vector<std::string> right;
  };
  std::string_view doc = document.text;
  std::vector<CandidateContext> contexts;
  contexts.reserve(doc_factors.size());
  for (const auto& f : doc_factors) {
    contexts.push_back({text::last_tokens(doc.substr(0, f.start), detail::kOracleWindow),
                        text::first_tokens(doc.substr(f.end), detail::kOracleWindow)});
  }

  auto slot_side = [&](std::size_t from, std::size_t to) {
    std::string s;
    for (std::size_t i = from; i < to; ++i) {
      if (i > from) s += detail::kOtherSlotMarker;
      s += parts.segments[i];
    }
    return s;
  };

  auto fills = detail::fill_in_order(request, [&](std::size_t k,
                                                  std::span<const std::string> earlier) {
    auto left = text::last_tokens(slot_side(0, k + 1), detail::kOracleWindow);
    auto right = text::first_tokens(slot_side(k + 1, parts.segments.size()), detail::kOracleWindow);
    FactorType slot_type =
        request.hints.empty() ? FactorType::kNounPhrase : request.hints[k].type;

    double best = 0.0;
    const FactualFactor* pick = nullptr;
    for (std::size_t c = 0; c < doc_factors.size(); ++c) {
      const auto& cand = doc_factors[c];
      if (!detail::compatible(slot_type, cand.type)) continue;
      double score = detail::bigram_overlap(left, contexts[c].left) +
                     detail::bigram_overlap(right, contexts[c].right);
      bool used = std::any_of(earlier.begin(), earlier.end(), [&](const std::string& e) {
        return text::same_surface(e, cand.surface);
      });
      if (used) score *= 0.5;
      if (score > best || (score == best && pick && score > 0 && cand.start < pick->start)) {
        best = score;
        pick = &cand;
      }
    }
    return best > 0 && pick ? pick->surface : std::string(kUnk);
  });
  return make_fill_result(request, std::move(fills));
}

class OracleBackend final : public ClozeBackend {
 public:
  explicit OracleBackend(SourceDocument document, const FactorTagger& tagger = rule_based_tag)
      : document_(std::move(document)), factors_(document_factors(document_, tagger)) {}

  BackendCapabilities capabilities() const override { return {}; }

  FillResult fill(const BackendRequest& request) override {
    detail::check_request(request, capabilities());
    return oracle_fill(request, document_, factors_);
  }

  const std::vector<FactualFactor>& factors() const { return factors_; }

 private:
  SourceDocument document_;
  std::vector<FactualFactor> factors_;
};

/// Serializes calls into a backend that does not declare concurrent support.
class SerializedBackend final : public ClozeBackend {
 public:
  explicit SerializedBackend(ClozeBackend& inner) : inner_(inner) {}

  BackendCapabilities capabilities() const override {
    auto caps = inner_.capabilities();
    caps.supports_concurrent_calls = true;
    return caps;
  }

  FillResult fill(const BackendRequest& request) override {
    std::lock_guard lock(mu_);
    return inner_.fill(request);
  }

 private:
  ClozeBackend& inner_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Wire format
//
//   request:  "SLOTS=<K> MODE=<FULL_SEQUENCE|SLOT_FILL>\n"
//             zero or more "PREFILL=<k> <text>\n" lines
//             <rendered input>
//   response: "FULL:" <regenerated sentence>
//           | "SLOTS:\n" followed by exactly K lines, one fill per line
// ---------------------------------------------------------------------------

inline std::string encode_request(const BackendRequest& request) {
  validate(request);
  std::string out = "SLOTS=" + std::to_string(request.slot_count) + " MODE=";
  out += to_string(request.mode);
  out += '\n';
  for (const auto& p : request.prefilled) {
    out += "PREFILL=" + std::to_string(p.slot) + " " + p.text + "\n";
  }
  out += request.rendered_input;
  return out;
}

inline BackendRequest decode_request(std::string_view wire) {
  auto line_end = [&](std::size_t from) {
    auto p = wire.find('\n', from);
    if (p == std::string_view::npos) throw ProtocolError("truncated request header");
    return p;
  };
  std::size_t eol = line_end(0);
  std::string_view header = wire.substr(0, eol);
  BackendRequest req;
  auto mode_pos = header.find(" MODE=");
  if (header.substr(0, 6) != "SLOTS=" || mode_pos == std::string_view::npos)
    throw ProtocolError("malformed request header");
  auto slots = header.substr(6, mode_pos - 6);
  if (slots.empty() || !std::all_of(slots.begin(), slots.end(), text::is_digit))
    throw ProtocolError("malformed slot count");
  req.slot_count = std::stoul(std::string(slots));
  auto mode = parse_mode(header.substr(mode_pos + 6));
  if (!mode) throw ProtocolError("unknown mode in request header");
  req.mode = *mode;
  std::size_t pos = eol + 1;
  while (wire.substr(pos, 8) == "PREFILL=") {
    std::size_t e = line_end(pos);
    auto line = wire.substr(pos + 8, e - pos - 8);
    auto sp = line.find(' ');
    if (sp == std::string_view::npos) throw ProtocolError("malformed PREFILL line");
    req.prefilled.push_back({std::stoul(std::string(line.substr(0, sp))),
                             std::string(line.substr(sp + 1))});
    pos = e + 1;
  }
  req.rendered_input = std::string(wire.substr(pos));
  validate(req);
  return req;
}

inline FillResult decode_response(const BackendRequest& request, std::string_view response) {
  while (!response.empty() && (response.back() == '\n' || response.back() == '\r'))
    response.remove_suffix(1);
  if (response.substr(0, 5) == "FULL:") {
    return align_full_sequence(template_of(request.rendered_input),
                               text::trim(response.substr(5)));
  }
  if (response.substr(0, 6) == "SLOTS:") {
    std::vector<std::string> fills;
    auto body = response.substr(6);
    if (!body.empty() && body.front() == '\n') {
      body.remove_prefix(1);
      std::size_t start = 0;
      while (true) {
        auto nl = body.find('\n', start);
        auto line = body.substr(start, nl == std::string_view::npos ? std::string_view::npos
                                                                   : nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        fills.emplace_back(line);
        if (nl == std::string_view::npos) break;
        start = nl + 1;
      }
    } else if (!text::trim(body).empty()) {
      throw ProtocolError("SLOTS: response must put fills on their own lines");
    }
    if (fills.size() != request.slot_count)
      throw ProtocolError("backend returned " + std::to_string(fills.size()) + " fills for " +
                          std::to_string(request.slot_count) + " slots");
    FillResult r;
    r.mode = CorrectionMode::kSlotFill;
    r.raw_output = std::string(body);
    r.fills = std::move(fills);
    return r;
  }
  throw ProtocolError("response must start with FULL: or SLOTS:");
}

/// Runs an external command per request: the encoded request arrives on the
/// command's stdin and the response is read from its stdout.
class ProcessBackend final : public ClozeBackend {
 public:
  explicit ProcessBackend(std::string command, BackendCapabilities caps = {})
      : command_(std::move(command)), caps_(caps) {}

  BackendCapabilities capabilities() const override { return caps_; }

  FillResult fill(const BackendRequest& request) override {
    detail::check_request(request, caps_);
    return decode_response(request, run(encode_request(request)));
  }

 private:
  std::string run(const std::string& input) const {
    char path[] = "/tmp/factcloze-req-XXXXXX";
    int fd = ::mkstemp(path);
    if (fd < 0) throw BackendError("cannot create request file", true);
    struct Unlink {
      const char* p;
      ~Unlink() { ::unlink(p); }
    } cleanup{path};
    std::size_t written = 0;
    while (written < input.size()) {
      auto n = ::write(fd, input.data() + written, input.size() - written);
      if (n <= 0) {
        ::close(fd);
        throw BackendError("cannot write request file", true);
      }
      written += static_cast<std::size_t>(n);
    }
    ::close(fd);

    std::string cmd = command_ + " < '" + path + "'";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) throw BackendError("cannot start backend command: " + command_, true);
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    int status = ::pclose(pipe);
    if (status != 0)
      throw BackendError("backend command exited with status " + std::to_string(status), true);
    return out;
  }

  std::string command_;
  BackendCapabilities caps_;
};

}  // namespace factcloze
