#include <gtest/gtest.h>

#include <random>

#include "factcloze/mask.hpp"
#include "support.hpp"

using namespace factcloze;

namespace {

std::vector<std::size_t> all_of(std::size_t k) {
  std::vector<std::size_t> v(k);
  for (std::size_t i = 0; i < k; ++i) v[i] = i;
  return v;
}

FillResult slot_fills(std::vector<std::string> fills) {
  FillResult r;
  r.fills = std::move(fills);
  return r;
}

std::size_t count_placeholders(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t pos = s.find(kPlaceholderOpen); pos != std::string_view::npos;
       pos = s.find(kPlaceholderOpen, pos + 1))
    ++n;
  return n;
}

}  // namespace

TEST(Placeholder, Grammar) {
  EXPECT_EQ(placeholder(0), "⟨M0⟩");
  EXPECT_EQ(placeholder(12), "⟨M12⟩");
}

TEST(BuildMasked, ObituaryHypothesisAllFactors) {
  auto factors = sentence_factors(testutil::kObituaryHyp);
  ASSERT_EQ(factors.size(), 4u);
  auto sel = all_of(4);
  auto m = build_masked(testutil::kObituaryHyp, factors, sel);
  EXPECT_EQ(m.template_text,
            "⟨M0⟩, one of the ⟨M1⟩'s most famous ⟨M2⟩, has died at the age of ⟨M3⟩.");
  EXPECT_EQ(m.factors.size(), 4u);
  EXPECT_EQ(m.original, testutil::kObituaryHyp);
}

TEST(BuildMasked, EmptySelectionKeepsOriginal) {
  auto factors = sentence_factors(testutil::kObituaryHyp);
  auto m = build_masked(testutil::kObituaryHyp, factors, {});
  EXPECT_EQ(m.template_text, testutil::kObituaryHyp);
  EXPECT_TRUE(m.factors.empty());
}

TEST(BuildMasked, FactorAtSentenceStart) {
  std::string s = "66 people died.";
  auto factors = sentence_factors(s);
  ASSERT_EQ(factors.size(), 1u);
  std::size_t sel[] = {0};
  EXPECT_EQ(build_masked(s, factors, sel).template_text, "⟨M0⟩ people died.");
}

TEST(BuildMasked, PartialSelectionRenumbersFromZero) {
  auto factors = sentence_factors(testutil::kObituaryHyp);
  std::size_t sel[] = {3, 1};
  auto m = build_masked(testutil::kObituaryHyp, factors, sel);
  EXPECT_EQ(m.template_text,
            "Templeton Templeton, one of the ⟨M0⟩'s most famous 66, has died at the age of ⟨M1⟩.");
  EXPECT_EQ(m.factors[0].surface, "UK");
  EXPECT_EQ(m.factors[1].surface, "74");
  EXPECT_EQ(m.factors[1].index, 3u);
}

TEST(BuildMasked, RejectsBadInput) {
  auto factors = sentence_factors("Rod Temperton has died.");
  std::size_t bad[] = {5};
  EXPECT_THROW(build_masked("Rod Temperton has died.", factors, bad), InvalidArgument);
  EXPECT_THROW(build_masked("a ⟨M0⟩ b", {}, {}), InvalidArgument);
  std::vector<FactualFactor> wrong = {{"Rod", 1, 4, FactorType::kOther, 0}};
  std::size_t sel[] = {0};
  EXPECT_THROW(build_masked("Rod Temperton", wrong, sel), InvalidArgument);
}

TEST(SplitTemplate, RejectsOutOfOrderPlaceholders) {
  EXPECT_THROW(split_template("⟨M1⟩ a ⟨M0⟩"), ProtocolError);
  EXPECT_THROW(split_template("⟨M0⟩ ⟨M0⟩"), ProtocolError);
  // Zero padding is not placeholder syntax, so this is literal text.
  EXPECT_EQ(split_template("⟨M01⟩").slot_count(), 0u);
  EXPECT_EQ(split_template("a ⟨M0⟩ b ⟨M1⟩").slot_count(), 2u);
}

TEST(RenderInput, TruncatesDocumentAtWordBoundary) {
  SourceDocument doc{"d", "A B C", {}};
  MaskedHypothesis m;
  m.template_text = "⟨M0⟩ sat";
  EXPECT_EQ(render_input(doc, m, 3), "A B\n⟨SEP⟩\n⟨M0⟩ sat");
}

TEST(RenderInput, ShortDocumentUntouched) {
  SourceDocument doc{"d", "A B C", {}};
  MaskedHypothesis m;
  m.template_text = "t";
  EXPECT_EQ(render_input(doc, m, 100), "A B C\n⟨SEP⟩\nt");
}

TEST(RenderInput, EmptyDocumentIsLegal) {
  SourceDocument doc{"d", "", {}};
  MaskedHypothesis m;
  m.template_text = "⟨M0⟩ sat";
  EXPECT_EQ(render_input(doc, m, 10), "\n⟨SEP⟩\n⟨M0⟩ sat");
}

TEST(RenderInput, TemplateAndDocumentRecoverable) {
  SourceDocument doc{"d", "some text", {}};
  MaskedHypothesis m;
  m.template_text = "⟨M0⟩ x";
  auto r = render_input(doc, m, 100);
  EXPECT_EQ(template_of(r), "⟨M0⟩ x");
  EXPECT_EQ(document_of(r), "some text");
  EXPECT_THROW(template_of("no separator"), ProtocolError);
}

TEST(TruncateWords, NeverSplitsUtf8AndStaysWithinBudget) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> pieces = {"ab", "é", "北京", " ", "  ", "x", "\n", "日本語"};
  for (int iter = 0; iter < 3000; ++iter) {
    std::string s;
    std::size_t n = rng() % 10;
    for (std::size_t i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
    std::size_t max = 1 + rng() % 16;
    auto t = truncate_words(s, max);
    EXPECT_LE(t.size(), max);
    EXPECT_EQ(s.compare(0, t.size(), t), 0);
    EXPECT_TRUE(text::is_char_boundary(s, t.size()));
  }
}

TEST(MergeFills, SubstitutesInOrder) {
  std::string s = "Rod Temperton has died at the age of 66.";
  auto factors = sentence_factors(s);
  auto m = build_masked(s, factors, all_of(2));
  EXPECT_EQ(m.template_text, "⟨M0⟩ has died at the age of ⟨M1⟩.");
  auto merged = merge_fills(m, slot_fills({"Rod Temperton", "66"}));
  EXPECT_EQ(merged.corrected, s);
  for (const auto& c : merged.changes) EXPECT_FALSE(c.changed);
}

TEST(MergeFills, UnkIsSubstitutedAndMarkedChanged) {
  std::string s = "Rod Temperton has died at the age of 66.";
  auto m = build_masked(s, sentence_factors(s), all_of(2));
  auto merged = merge_fills(m, slot_fills({"<unk>", "66"}));
  EXPECT_EQ(merged.corrected, "<unk> has died at the age of 66.");
  ASSERT_EQ(merged.changes.size(), 2u);
  EXPECT_TRUE(merged.changes[0].changed);
  EXPECT_EQ(merged.changes[0].old_surface, "Rod Temperton");
  EXPECT_FALSE(merged.changes[1].changed);
}

TEST(MergeFills, CountMismatchIsMergeError) {
  std::string s = "Rod Temperton has died at the age of 66.";
  auto m = build_masked(s, sentence_factors(s), all_of(2));
  try {
    merge_fills(m, slot_fills({"x"}));
    FAIL();
  } catch (const MergeError& e) {
    EXPECT_EQ(e.expected(), 2u);
    EXPECT_EQ(e.actual(), 1u);
  }
}

TEST(MergeFills, ChangeComparisonIgnoresCase) {
  std::string s = "It rained in Paris";
  auto m = build_masked(s, sentence_factors(s), all_of(1));
  EXPECT_FALSE(merge_fills(m, slot_fills({"PARIS"})).changes[0].changed);
}

TEST(AlignFullSequence, RecoversRegeneratedFills) {
  auto r = align_full_sequence(
      "⟨M0⟩, one of the ⟨M1⟩'s most famous ⟨M2⟩, has died at the age of ⟨M3⟩ .",
      "Rod Temperton, one of the UK's most famous songwriters, has died at the age of 66 .");
  ASSERT_TRUE(r.alignment_ok);
  std::vector<std::string> want = {"Rod Temperton", "UK", "songwriters", "66"};
  EXPECT_EQ(r.fills, want);
  EXPECT_EQ(r.mode, CorrectionMode::kFullSequence);
}

TEST(AlignFullSequence, ToleratesCaseAndSpacingDrift) {
  auto r = align_full_sequence("⟨M0⟩ has died at the age of ⟨M1⟩.",
                               "Rod  Temperton HAS died at  the age of 66.");
  ASSERT_TRUE(r.alignment_ok);
  std::vector<std::string> want = {"Rod  Temperton", "66"};
  EXPECT_EQ(r.fills, want);
}

TEST(AlignFullSequence, IdentityRegeneration) {
  auto factors = sentence_factors(testutil::kObituaryHyp);
  auto m = build_masked(testutil::kObituaryHyp, factors, all_of(4));
  auto r = align_full_sequence(m, testutil::kObituaryHyp);
  ASSERT_TRUE(r.alignment_ok);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r.fills[i], factors[i].surface);
}

TEST(AlignFullSequence, UnrelatedSentenceFails) {
  auto r = align_full_sequence("⟨M0⟩ has died at the age of ⟨M1⟩.",
                               "The video was released on a video of her firing.");
  EXPECT_FALSE(r.alignment_ok);
  EXPECT_EQ(r.raw_output, "The video was released on a video of her firing.");
}

TEST(AlignFullSequence, AdjacentSlotsCannotBeSplit) {
  EXPECT_FALSE(align_full_sequence("a ⟨M0⟩ ⟨M1⟩ b", "a x y b").alignment_ok);
  EXPECT_FALSE(align_full_sequence("⟨M0⟩⟨M1⟩", "xy").alignment_ok);
}

TEST(AlignFullSequence, NoSlotsRequiresExactMatch) {
  EXPECT_TRUE(align_full_sequence("same text", "Same  text").alignment_ok);
  EXPECT_FALSE(align_full_sequence("same text", "same text plus").alignment_ok);
}

TEST(AlignFullSequence, EmptyFillAtEdges) {
  auto r = align_full_sequence("⟨M0⟩ died.", " died.");
  ASSERT_TRUE(r.alignment_ok);
  EXPECT_EQ(r.fills[0], "");
}

// Acceptance-style property: masking then merging the original surfaces
// reproduces the sentence byte for byte, placeholders count and order hold.
TEST(MaskProperties, RoundTripOnRandomCases) {
  std::mt19937_64 rng(20240601);
  for (int iter = 0; iter < 1000; ++iter) {
    auto c = testutil::random_case(rng);
    auto m = build_masked(c.sentence, c.factors, c.selection);
    EXPECT_EQ(count_placeholders(m.template_text), m.factors.size());
    EXPECT_EQ(split_template(m.template_text).slot_count(), m.factors.size());
    std::vector<std::string> fills;
    for (const auto& f : m.factors) fills.push_back(f.surface);
    EXPECT_EQ(merge_fills(m, slot_fills(fills)).corrected, c.sentence);
  }
}

// With fills drawn from a vocabulary disjoint from the template text, the
// regenerated sentence aligns back to exactly those fills.
TEST(MaskProperties, AlignmentRecoversDisjointFills) {
  std::mt19937_64 rng(99);
  const std::vector<std::string> literal = {"alpha", "beta,", "gamma", "(delta)", "ep."};
  const std::vector<std::string> fills_pool = {"Qx", "Zorro Vil", "77", "Ünal", "jj kk"};
  for (int iter = 0; iter < 1000; ++iter) {
    std::size_t k = rng() % 5;
    std::string tmpl;
    std::vector<std::string> fills;
    auto words = [&](std::size_t n) {
      std::string s;
      for (std::size_t i = 0; i < n; ++i) s += " " + literal[rng() % literal.size()];
      return s;
    };
    tmpl += words(rng() % 3);
    for (std::size_t i = 0; i < k; ++i) {
      if (i > 0) tmpl += words(1 + rng() % 3);
      tmpl += " " + placeholder(i);
      fills.push_back(fills_pool[rng() % fills_pool.size()]);
    }
    tmpl += words(rng() % 3);
    auto r = align_full_sequence(tmpl, fill_template(tmpl, fills));
    ASSERT_TRUE(r.alignment_ok) << tmpl;
    EXPECT_EQ(r.fills, fills) << tmpl;
  }
}
