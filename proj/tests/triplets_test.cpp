#include <gtest/gtest.h>

#include <sstream>

#include "kgv/error.hpp"
#include "kgv/normalize.hpp"
#include "kgv/triplets.hpp"
#include "support.hpp"

namespace kgv {
namespace {

std::vector<std::string> texts(const std::vector<Sentence>& ss) {
  std::vector<std::string> out;
  for (const auto& s : ss) out.push_back(s.text);
  return out;
}

TEST(SplitSentences, BasicBoundaries) {
  auto ss = split_sentences("One fact. Two facts! Three? 4 more.");
  EXPECT_EQ(texts(ss), (std::vector<std::string>{"One fact.", "Two facts!", "Three?", "4 more."}));
  for (const auto& s : ss) {
    EXPECT_EQ(std::string("One fact. Two facts! Three? 4 more.").substr(s.span.begin, s.span.size()), s.text);
  }
}

TEST(SplitSentences, AbbreviationsAndDecimalsDoNotSplit) {
  auto ss = split_sentences("Plans, e.g. Basic, cost $7.2 per month. Dr. Smith agrees.");
  EXPECT_EQ(texts(ss), (std::vector<std::string>{"Plans, e.g. Basic, cost $7.2 per month.", "Dr. Smith agrees."}));
}

TEST(SplitSentences, LowercaseContinuationDoesNotSplit) {
  EXPECT_EQ(split_sentences("It is east.net. and more").size(), 1u);
}

TEST(SplitSentences, NewlineIsHardBoundary) {
  auto ss = split_sentences("first line\nsecond line");
  EXPECT_EQ(texts(ss), (std::vector<std::string>{"first line", "second line"}));
}

TEST(SplitSentences, EmptyAndWhitespace) {
  EXPECT_TRUE(split_sentences("").empty());
  EXPECT_TRUE(split_sentences("  \n\t ").empty());
}

TEST(SplitSentences, ClosingQuoteStaysWithSentence) {
  auto ss = split_sentences("He said \"yes.\" Then left.");
  EXPECT_EQ(texts(ss), (std::vector<std::string>{"He said \"yes.\"", "Then left."}));
}

TEST(NormalizeEntity, Canonicalizes) {
  EXPECT_EQ(normalize_entity("  The   Microsoft 365  "), "microsoft 365");
  EXPECT_EQ(normalize_entity("\"BIZCN\","), "bizcn");
  EXPECT_EQ(normalize_entity("$7.2"), "$7.2");
  EXPECT_EQ(normalize_entity("50%"), "50%");
  EXPECT_EQ(normalize_entity("the a an"), "an");
}

TEST(NormalizeEntity, Idempotent) {
  for (const char* s : {"The  Oray.", "an  HiChina ,", "“Ünïcode” café", "$6 dollars per user per month"}) {
    std::string once = normalize_entity(s);
    EXPECT_EQ(normalize_entity(once), once) << s;
  }
}

TEST(NormalizeEntity, ComposesUnicode) {
  // "e" + combining acute vs precomposed
  EXPECT_EQ(normalize_entity("Cafe\xCC\x81"), normalize_entity("CAF\xC3\x89"));
}

TEST(ExtractTriplets, CopulaSentence) {
  auto ts = extract_document("Microsoft 365 Business Basic is $7.2 dollars per user per month.");
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].subject.surface, "Microsoft 365 Business Basic");
  EXPECT_EQ(ts[0].relation, "is");
  EXPECT_EQ(ts[0].object.surface, "$7.2 dollars per user per month");
  EXPECT_EQ(ts[0].rule, ExtractionRule::copula);
  EXPECT_DOUBLE_EQ(ts[0].confidence, 1.0);
  EXPECT_EQ(ts[0].sentence_index, 0u);
}

TEST(ExtractTriplets, RegistrarListExpandsToStar) {
  auto ts = extract_document(testing::read_fixture("registrar_context.txt"));
  ASSERT_EQ(ts.size(), 4u);
  std::vector<std::string> objects;
  for (const auto& t : ts) {
    objects.push_back(t.object.surface);
    EXPECT_EQ(t.subject.surface, "Domain registrars that support all DNS records required for Microsoft 365");
    EXPECT_EQ(t.relation, "are");
    EXPECT_EQ(t.rule, ExtractionRule::list_expansion);
    EXPECT_EQ(t.list_group, std::optional<std::uint32_t>(0));
    EXPECT_EQ(t.object_phrase, "Oray , HiChina , east.net, and BIZCN");
  }
  EXPECT_EQ(objects, (std::vector<std::string>{"Oray", "HiChina", "east.net", "BIZCN"}));
}

TEST(ExtractTriplets, SpansPointIntoSentence) {
  const std::string text = "Intro here. Contoso supports chat and email.";
  auto ss = split_sentences(text);
  auto ts = extract_triplets(ss);
  ASSERT_EQ(ts.size(), 2u);
  for (const auto& t : ts) {
    const auto& s = ss[t.sentence_index].text;
    EXPECT_EQ(s.substr(t.subject.span.begin, t.subject.span.size()), t.subject.surface);
    EXPECT_EQ(s.substr(t.object.span.begin, t.object.span.size()), t.object.surface);
    EXPECT_EQ(s.substr(t.relation_span.begin, t.relation_span.size()), t.relation);
    EXPECT_EQ(s.substr(t.object_phrase_span.begin, t.object_phrase_span.size()), t.object_phrase);
  }
}

TEST(ExtractTriplets, ClauseOpenerStripped) {
  auto ts = extract_document("However, if you choose to commit to a yearly plan, the price decreases to $6 dollars.");
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].subject.surface, "the price");
  EXPECT_EQ(ts[0].relation, "decreases");
  EXPECT_EQ(ts[0].rule, ExtractionRule::generic_svo);
  EXPECT_DOUBLE_EQ(ts[0].confidence, 0.8);
}

TEST(ExtractTriplets, ModalVerbPhrase) {
  auto ts = extract_document("Admins can configure custom domains.");
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].subject.surface, "Admins");
  EXPECT_EQ(ts[0].object.surface, "custom domains");
}

TEST(ExtractTriplets, NoVerbNoTriplet) {
  EXPECT_TRUE(extract_document("Thanks for asking.").empty());
  EXPECT_TRUE(extract_document("").empty());
}

TEST(ExtractTriplets, TwoItemListNeedsConjunction) {
  auto ts = extract_document("Fabrikam offers chat, email.");
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_FALSE(ts[0].list_group.has_value());
}

TEST(TripletRecords, RoundTrip) {
  auto ts = extract_document("Oray is a registrar. Contoso supports chat and email.");
  auto back = ingest_triplets(serialize_triplets(ts));
  ASSERT_EQ(back.triplets.size(), ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    EXPECT_EQ(back.triplets[i].subject.canonical, ts[i].subject.canonical);
    EXPECT_EQ(back.triplets[i].relation, ts[i].relation);
    EXPECT_EQ(back.triplets[i].object.canonical, ts[i].object.canonical);
    EXPECT_EQ(back.triplets[i].sentence_index, ts[i].sentence_index);
    EXPECT_EQ(back.triplets[i].list_group, ts[i].list_group);
    EXPECT_EQ(back.triplets[i].provenance, Provenance::ingested);
  }
  EXPECT_EQ(serialize_triplets(back.triplets), serialize_triplets(ts));
}

TEST(TripletRecords, MinimalRecord) {
  auto r = ingest_triplets(R"({"subject": "Oray", "relation": "is", "object": "a registrar"})");
  ASSERT_EQ(r.triplets.size(), 1u);
  EXPECT_EQ(r.triplets[0].object.canonical, "registrar");
  EXPECT_EQ(r.triplets[0].sentence_index, kNoSentence);
  EXPECT_DOUBLE_EQ(r.triplets[0].confidence, 1.0);
}

TEST(TripletRecords, DuplicatesCounted) {
  auto r = ingest_triplets(
      "{\"subject\": \"A\", \"relation\": \"is\", \"object\": \"B\"}\n"
      "\n"
      "{\"subject\": \"A\", \"relation\": \"is\", \"object\": \"B\"}\n");
  EXPECT_EQ(r.triplets.size(), 1u);
  EXPECT_EQ(r.duplicates, 1u);
}

TEST(TripletRecords, ErrorsNameTheLine) {
  const char* bad[] = {
      "{\"subject\": \"A\", \"relation\": \"is\"}",
      "{\"subject\": \"A\", \"relation\": \"is\", \"object\": 3}",
      "{\"subject\": \"A\", \"relation\": \"is\", \"object\": \"B\", \"confidence\": 1.5}",
      "{\"subject\": \"A\", \"relation\": \"is\", \"object\": \"B\", \"sentence_index\": -1}",
      "{\"subject\": \"  \", \"relation\": \"is\", \"object\": \"B\"}",
      "not json",
  };
  for (const char* line : bad) {
    std::string doc = std::string("{\"subject\": \"X\", \"relation\": \"is\", \"object\": \"Y\"}\n") + line + "\n";
    try {
      ingest_triplets(doc);
      ADD_FAILURE() << "accepted: " << line;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2u) << line;
    }
  }
}

}  // namespace
}  // namespace kgv
