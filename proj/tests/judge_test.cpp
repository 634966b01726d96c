#include <gtest/gtest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "kgv/error.hpp"
#include "kgv/judge.hpp"
#include "support.hpp"

namespace kgv {
namespace {

using testing::read_fixture;

TEST(JudgeTemplates, MatchReferenceRendering) {
  EXPECT_EQ(groundedness_template().system, read_fixture("judge/groundedness_system.txt"));
  EXPECT_EQ(groundedness_template().user, read_fixture("judge/groundedness_user.txt"));
  EXPECT_EQ(similarity_template().system, read_fixture("judge/similarity_system.txt"));
  EXPECT_EQ(similarity_template().user, read_fixture("judge/similarity_user.txt"));
}

TEST(JudgeTemplates, GroundednessSubstitution) {
  auto p = render_groundedness_prompt("", "");
  std::string expected = read_fixture("judge/groundedness_user.txt");
  expected.replace(expected.find("{{context}}"), 11, "\"\"");
  expected.replace(expected.find("{{response}}"), 12, "\"\"");
  EXPECT_EQ(p.user, expected);
  EXPECT_EQ(p.user.find("{{"), std::string::npos);

  auto q = render_groundedness_prompt("say \"hi\"", "{{response}}");
  EXPECT_NE(q.user.find(R"({"CONTEXT": "say \"hi\"", "QUESTION": "", "ANSWER": "{{response}}"})"), std::string::npos);
}

TEST(JudgeTemplates, SimilaritySubstitution) {
  auto p = render_similarity_prompt("Q?", "Truth.", "Guess.");
  EXPECT_TRUE(p.user.ends_with("Question: Q?\nCorrect answer: Truth.\nPredicted answer: Guess.\nStars:"));
  EXPECT_EQ(p.user.find("{{"), std::string::npos);
  EXPECT_EQ(p.system, similarity_template().system);
}

TEST(JudgeTemplates, WorkedExamplesVerbatim) {
  const std::string& s = similarity_template().user;
  EXPECT_NE(s.find("Ribosomes participate in carbohydrate breakdown by removing nutrients from complex sugar "
                   "molecules.\nStars: 1"),
            std::string::npos);
  EXPECT_NE(s.find("The sinking of the Titanic was a result of a large iceberg collision."), std::string::npos);
  EXPECT_NE(s.find("insufficient rescue attempts.\nStars: 2"), std::string::npos);
  EXPECT_NE(s.find("Routine physical activity can contribute"), std::string::npos);
  EXPECT_NE(s.find("augmenting general mood.\nStars: 5"), std::string::npos);
  const std::string& g = groundedness_template().user;
  EXPECT_NE(g.find("Example Task #1 Output:\n1"), std::string::npos);
  EXPECT_NE(g.find("Example Task #2 Output:\n5"), std::string::npos);
  EXPECT_NE(g.find("Example Task #3 Output:\n5"), std::string::npos);
  EXPECT_NE(g.find("Example Task #4 Output:\n1"), std::string::npos);
}

TEST(ParseVerdict, Ladder) {
  auto clean = parse_verdict(" 5\n");
  EXPECT_EQ(clean.score, std::optional<int>(5));
  EXPECT_EQ(clean.parse_path, ParsePath::clean_integer);
  auto extracted = parse_verdict("Score: 4.");
  EXPECT_EQ(extracted.score, std::optional<int>(4));
  EXPECT_EQ(extracted.parse_path, ParsePath::extracted_integer);
  EXPECT_EQ(parse_verdict("3 stars").score, std::optional<int>(3));
  auto failed = parse_verdict("excellent");
  EXPECT_FALSE(failed.score.has_value());
  EXPECT_EQ(failed.parse_path, ParsePath::failed);
  EXPECT_EQ(failed.raw, "excellent");
  EXPECT_FALSE(parse_verdict("10").score.has_value());
  EXPECT_FALSE(parse_verdict("4.5").score.has_value());
  EXPECT_FALSE(parse_verdict("0").score.has_value());
  EXPECT_EQ(parse_verdict("between 10 and 2").score, std::optional<int>(2));
}

TEST(ParseVerdict, NeverOutOfRange) {
  std::mt19937_64 rng(3);
  const std::string alphabet = "0123456789 .:-abc";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    for (int j = 0; j < 8; ++j) s += alphabet[rng() % alphabet.size()];
    auto v = parse_verdict(s);
    if (v.score) {
      EXPECT_GE(*v.score, 1);
      EXPECT_LE(*v.score, 5);
    }
  }
}

TEST(MockJudge, FixtureLookup) {
  auto prompt = render_similarity_prompt("q", "a", "b");
  std::istringstream fixture("{\"hash\": \"" + request_hash_hex(prompt) + "\", \"reply\": \"2\"}\n" +
                             "{\"contains\": \"special\", \"reply\": \"Score: 4.\"}\n" +
                             "{\"default\": \"excellent\"}\n");
  auto mock = MockJudgeClient::load(fixture);
  EXPECT_EQ(mock.complete(prompt).text, "2");
  EvalRecord rec{"1", "q", "special context", "a", "b"};
  auto g = judge_groundedness(rec, mock);
  EXPECT_EQ(g.score, std::optional<int>(4));
  EXPECT_EQ(g.parse_path, ParsePath::extracted_integer);
  EXPECT_EQ(judge_similarity(rec, mock).score, std::optional<int>(2));
  EvalRecord other{"2", "x", "y", "z", "w"};
  EXPECT_EQ(judge_groundedness(other, mock).parse_path, ParsePath::failed);
}

TEST(MockJudge, NoMatchThrows) {
  MockJudgeClient mock;
  EXPECT_THROW(mock.complete({"s", "u"}), Error);
  std::istringstream bad("{\"reply\": \"1\"}\n");
  EXPECT_THROW(MockJudgeClient::load(bad), ParseError);
}

TEST(RequestHash, Fnv1aOverSeparatedParts) {
  // FNV-1a 64 of "a\x1f" "b", computed by hand from the offset basis.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : std::string("a\x1f" "b")) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  EXPECT_EQ(request_hash({"a", "b"}), h);
  EXPECT_NE(request_hash({"ab", ""}), request_hash({"a", "b"}));
}

// Scripted transport: fails with a timeout `failures` times, then answers.
class FlakyTransport : public Transport {
 public:
  FlakyTransport(int failures, std::string reply) : failures_(failures), reply_(std::move(reply)) {}
  std::string post_json(const std::string& path, const std::string& body, const Headers& headers) override {
    last_path = path;
    last_body = body;
    last_headers = headers;
    ++calls;
    if (failures_-- > 0) throw TransportError(0, true, "timed out");
    return reply_;
  }
  int calls = 0;
  std::string last_path, last_body;
  Headers last_headers;

 private:
  int failures_;
  std::string reply_;
};

class LiveJudgeTest : public ::testing::Test {
 protected:
  void SetUp() override { setenv("KGV_TEST_JUDGE_KEY", "secret", 1); }
  void TearDown() override { unsetenv("KGV_TEST_JUDGE_KEY"); }
  EndpointConfig config() const {
    EndpointConfig c;
    c.base_url = "http://localhost:1";
    c.model = "judge-model";
    c.api_key_env = "KGV_TEST_JUDGE_KEY";
    c.max_retries = 2;
    c.initial_backoff_seconds = 0.25;
    return c;
  }
};

TEST_F(LiveJudgeTest, RetriesThenSucceeds) {
  auto t = std::make_shared<FlakyTransport>(2, R"({"choices":[{"message":{"content":"1"}}]})");
  std::vector<std::chrono::milliseconds> slept;
  LiveJudgeClient client(config(), t, 2, [&](std::chrono::milliseconds d) { slept.push_back(d); });
  EvalRecord rec{"1", "q", "c", "a", "b"};
  auto v = judge_similarity(rec, client);
  EXPECT_EQ(v.score, std::optional<int>(1));
  EXPECT_EQ(v.retries, 2);
  EXPECT_EQ(t->calls, 3);
  EXPECT_EQ(slept, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(250), std::chrono::milliseconds(500)}));
  EXPECT_EQ(t->last_path, "/chat/completions");
  auto body = nlohmann::json::parse(t->last_body);
  EXPECT_EQ(body["temperature"], 0);
  EXPECT_EQ(body["model"], "judge-model");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], render_similarity_prompt("q", "a", "b").user);
  EXPECT_EQ(t->last_headers.at(0).second, "Bearer secret");
}

TEST_F(LiveJudgeTest, GivesUpAfterMaxRetries) {
  auto t = std::make_shared<FlakyTransport>(10, "");
  LiveJudgeClient client(config(), t, 1, [](std::chrono::milliseconds) {});
  try {
    client.complete({"s", "u"});
    FAIL();
  } catch (const EndpointError& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(t->calls, 3);
}

TEST_F(LiveJudgeTest, MissingKeyNamesVariable) {
  EndpointConfig c = config();
  c.api_key_env = "KGV_TEST_UNSET_VARIABLE";
  try {
    LiveJudgeClient client(c, std::make_shared<FlakyTransport>(0, ""));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("KGV_TEST_UNSET_VARIABLE"), std::string::npos);
  }
}

TEST(PostWithRetries, NonRetryableStopsAndDelaysNonDecreasing) {
  class Refuse : public Transport {
   public:
    std::string post_json(const std::string&, const std::string&, const Headers&) override {
      ++calls;
      throw TransportError(401, false, "unauthorized");
    }
    int calls = 0;
  } refuse;
  EndpointConfig c;
  c.max_retries = 5;
  EXPECT_THROW(post_with_retries(refuse, c, "/x", "{}", {}, [](auto) {}), EndpointError);
  EXPECT_EQ(refuse.calls, 1);

  FlakyTransport flaky(4, "ok");
  c.initial_backoff_seconds = 0.1;
  c.backoff_multiplier = 1.5;
  auto out = post_with_retries(flaky, c, "/x", "{}", {}, [](auto) {});
  EXPECT_EQ(out.attempts, 5);
  ASSERT_EQ(out.delays.size(), 4u);
  for (std::size_t i = 1; i < out.delays.size(); ++i) EXPECT_GE(out.delays[i], out.delays[i - 1]);
}

}  // namespace
}  // namespace kgv
