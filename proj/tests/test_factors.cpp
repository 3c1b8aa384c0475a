#include <gtest/gtest.h>

#include <random>

#include "factcloze/factors.hpp"
#include "support.hpp"

using namespace factcloze;

namespace {

std::vector<std::pair<std::string, FactorType>> surfaces(const std::vector<FactualFactor>& fs) {
  std::vector<std::pair<std::string, FactorType>> out;
  for (const auto& f : fs) out.emplace_back(f.surface, f.type);
  return out;
}

FactualFactor factor(std::string surface, std::size_t start, FactorType type) {
  auto end = start + surface.size();
  return {std::move(surface), start, end, type, 0};
}

}  // namespace

TEST(RuleTagger, PersonAndNumber) {
  auto fs = extract_factors("Rod Temperton has died at the age of 66.");
  std::vector<std::pair<std::string, FactorType>> want = {{"Rod Temperton", FactorType::kPerson},
                                                          {"66", FactorType::kNumber}};
  EXPECT_EQ(surfaces(fs), want);
  EXPECT_EQ(fs[0].start, 0u);
  EXPECT_EQ(fs[0].end, 13u);
  EXPECT_EQ(fs[1].index, 1u);
}

TEST(RuleTagger, CapitalizedRunMidSentence) {
  auto fs = extract_factors("John Carver said before the game");
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].surface, "John Carver");
  EXPECT_EQ(fs[0].type, FactorType::kPerson);
}

TEST(RuleTagger, NumberOnly) {
  auto fs = extract_factors("died at the age of 66 after");
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].surface, "66");
  EXPECT_EQ(fs[0].type, FactorType::kNumber);
}

TEST(RuleTagger, LowercaseSentenceHasNoFactors) {
  EXPECT_TRUE(extract_factors("the cat sat on the mat").empty());
}

TEST(RuleTagger, SingleCapitalAtSentenceStartIsSkipped) {
  EXPECT_TRUE(extract_factors("Yesterday it rained").empty());
  auto fs = extract_factors("It rained in Paris");
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].surface, "Paris");
  EXPECT_EQ(fs[0].type, FactorType::kOther);
}

TEST(RuleTagger, DatesBreakCapitalizedRuns) {
  auto fs = extract_factors("it was signed in May 2019 by Ann Lee");
  std::vector<std::pair<std::string, FactorType>> want = {{"May", FactorType::kDate},
                                                          {"2019", FactorType::kDate},
                                                          {"Ann Lee", FactorType::kPerson}};
  EXPECT_EQ(surfaces(fs), want);
}

TEST(RuleTagger, DecimalAndGroupedNumbers) {
  auto fs = extract_factors("costs rose 3.5 percent to 1,200 units");
  std::vector<std::pair<std::string, FactorType>> want = {{"3.5", FactorType::kNumber},
                                                          {"1,200", FactorType::kNumber}};
  EXPECT_EQ(surfaces(fs), want);
}

TEST(RuleTagger, PunctuationSplitsRuns) {
  auto fs = extract_factors("a deal with Warner/Chappell music");
  std::vector<std::pair<std::string, FactorType>> want = {{"Warner", FactorType::kOther},
                                                          {"Chappell", FactorType::kOther}};
  EXPECT_EQ(surfaces(fs), want);
}

TEST(RuleTagger, MultiByteWordsKeepOffsetsOnBoundaries) {
  std::string s = "the café in Zürich Straße opened";
  auto fs = extract_factors(s);
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].surface, "Zürich Straße");
  EXPECT_EQ(s.substr(fs[0].start, fs[0].end - fs[0].start), fs[0].surface);
}

TEST(ExtractFactors, EmptySentenceRejected) {
  EXPECT_THROW(extract_factors(""), InvalidArgument);
}

TEST(ExtractFactors, TaggerReturningNothing) {
  FactorTagger none = [](std::string_view) { return std::vector<TaggedSpan>{}; };
  EXPECT_TRUE(extract_factors("it rained yesterday and today and before", none).empty());
}

TEST(ExtractFactors, TaggerFailureBecomesExtractionError) {
  FactorTagger boom = [](std::string_view) -> std::vector<TaggedSpan> {
    throw std::runtime_error("model unavailable");
  };
  try {
    extract_factors("x y", boom);
    FAIL() << "expected ExtractionError";
  } catch (const ExtractionError& e) {
    EXPECT_EQ(e.diagnostics(), "model unavailable");
  }
}

TEST(ExtractFactors, InvalidSpansRejected) {
  auto tagger_of = [](TaggedSpan s) {
    return FactorTagger([s](std::string_view) { return std::vector<TaggedSpan>{s}; });
  };
  EXPECT_THROW(extract_factors("abc", tagger_of({2, 2, FactorType::kOther})), ExtractionError);
  EXPECT_THROW(extract_factors("abc", tagger_of({1, 9, FactorType::kOther})), ExtractionError);
  // "é" occupies bytes 1..3; a span ending at 2 splits it.
  EXPECT_THROW(extract_factors("aéb", tagger_of({0, 2, FactorType::kOther})), ExtractionError);
  EXPECT_THROW(extract_factors("x <unk> y", tagger_of({2, 7, FactorType::kOther})),
               ExtractionError);
}

TEST(ExtractFactors, OutputSortedAndIndexed) {
  FactorTagger shuffled = [](std::string_view) {
    return std::vector<TaggedSpan>{{6, 9, FactorType::kNumber}, {0, 3, FactorType::kPerson},
                                   {0, 5, FactorType::kNounPhrase}};
  };
  auto fs = extract_factors("abc de fgh", shuffled);
  ASSERT_EQ(fs.size(), 3u);
  EXPECT_EQ(fs[0].end, 3u);
  EXPECT_EQ(fs[1].end, 5u);
  EXPECT_EQ(fs[2].start, 6u);
  for (std::size_t i = 0; i < fs.size(); ++i) EXPECT_EQ(fs[i].index, i);
}

TEST(ResolveOverlaps, EntityBeatsNounPhrase) {
  std::vector<FactualFactor> in = {factor("the UK", 10, FactorType::kNounPhrase),
                                   factor("UK", 14, FactorType::kOther)};
  auto out = resolve_overlaps(in);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].surface, "UK");
  EXPECT_EQ(out[0].index, 0u);
}

TEST(ResolveOverlaps, LongerSpanWins) {
  std::vector<FactualFactor> in = {factor("Rod Temperton", 0, FactorType::kPerson),
                                   factor("Temperton", 4, FactorType::kPerson)};
  auto out = resolve_overlaps(in);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].surface, "Rod Temperton");
}

TEST(ResolveOverlaps, EqualLengthSmallerStartWins) {
  std::vector<FactualFactor> in = {factor("bc", 1, FactorType::kOther),
                                   factor("ab", 0, FactorType::kOther)};
  auto out = resolve_overlaps(in);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].start, 0u);
}

TEST(ResolveOverlaps, DisjointInputUnchanged) {
  std::vector<FactualFactor> in = {factor("ab", 0, FactorType::kOther),
                                   factor("cd", 3, FactorType::kNounPhrase)};
  in[1].index = 1;
  EXPECT_EQ(resolve_overlaps(in), in);
}

TEST(ResolveOverlaps, RandomOutputIsDisjointSortedAndIndexed) {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<FactualFactor> in;
    std::size_t n = rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t s = rng() % 20;
      std::size_t len = 1 + rng() % 6;
      in.push_back({"", s, s + len, kAllFactorTypes[rng() % kAllFactorTypes.size()], i});
    }
    auto out = resolve_overlaps(in);
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(out[i].index, i);
      if (i > 0) { EXPECT_LE(out[i - 1].end, out[i].start); }
    }
    // Every dropped span overlaps a kept span.
    for (const auto& f : in) {
      bool covered = std::any_of(out.begin(), out.end(), [&](const FactualFactor& k) {
        return f.start < k.end && k.start < f.end;
      });
      EXPECT_TRUE(covered);
    }
  }
}

TEST(SentenceSplit, OffsetsReconstructText) {
  std::string text = "First one. Second \"quoted.\" Third?  Last without stop";
  auto sentences = split_sentences(text);
  ASSERT_EQ(sentences.size(), 4u);
  EXPECT_EQ(sentences[1].text, "Second \"quoted.\"");
  std::size_t cursor = 0;
  for (const auto& s : sentences) {
    EXPECT_GE(s.start, cursor);
    EXPECT_EQ(text.substr(s.start, s.end - s.start), s.text);
    for (std::size_t i = cursor; i < s.start; ++i) EXPECT_TRUE(text::is_space(text[i]));
    cursor = s.end;
  }
  EXPECT_EQ(cursor, text.size());
}

TEST(SentenceSplit, DecimalPointIsNotABoundary) {
  EXPECT_EQ(split_sentences("It rose 3.5 points. Then fell.").size(), 2u);
}

TEST(SourceDocumentValidation, RejectsBadOffsets) {
  SourceDocument doc{"d", "abc def", {{"abc", 0, 3}, {"def", 4, 7}}};
  EXPECT_NO_THROW(validate(doc));
  doc.sentences[1] = {"def", 2, 5};
  EXPECT_THROW(validate(doc), InvalidArgument);
  doc.sentences[1] = {"xyz", 4, 7};
  EXPECT_THROW(validate(doc), InvalidArgument);
}

TEST(DocumentFactors, OffsetsPointIntoDocument) {
  auto doc = make_document("d", testutil::kObituaryDoc);
  auto fs = document_factors(doc);
  std::vector<std::pair<std::string, FactorType>> want = {
      {"London", FactorType::kOther},   {"66", FactorType::kNumber},
      {"Jon Platt", FactorType::kPerson}, {"Warner", FactorType::kOther},
      {"Chappell", FactorType::kOther}};
  EXPECT_EQ(surfaces(fs), want);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    EXPECT_EQ(doc.text.substr(fs[i].start, fs[i].end - fs[i].start), fs[i].surface);
    EXPECT_EQ(fs[i].index, i);
  }
}

TEST(FactorType, NamesRoundTrip) {
  for (auto t : kAllFactorTypes) EXPECT_EQ(parse_factor_type(to_string(t)), t);
  EXPECT_EQ(parse_factor_type("NP"), FactorType::kNounPhrase);
  EXPECT_EQ(parse_factor_type("person"), std::nullopt);
}

// Property: on arbitrary byte strings the rule tagger's factors slice the
// sentence exactly and never split a UTF-8 sequence.
TEST(RuleTagger, FuzzedSentencesYieldValidFactors) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> pieces = {"A", "b", "Zé", "9", ".", ",", " ", "  ", "-", "北",
                                           "1999", "May", "X-Ray", "3,4", "'", "\t"};
  for (int iter = 0; iter < 2000; ++iter) {
    std::string s;
    std::size_t n = 1 + rng() % 12;
    for (std::size_t i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
    auto fs = sentence_factors(s);
    EXPECT_NO_THROW(check_factors(s, fs)) << s;
    for (const auto& f : fs) {
      EXPECT_TRUE(text::is_char_boundary(s, f.start));
      EXPECT_TRUE(text::is_char_boundary(s, f.end));
    }
  }
}
