#include "kgv/judge.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>

#include "json.hpp"
#include "kgv/error.hpp"

namespace kgv {

namespace {

constexpr std::string_view kSystem =
    "You are an AI assistant. You will be given the definition of an evaluation metric for "
    "assessing the quality of an answer in a question-answering task. Your job is to compute an "
    "accurate evaluation score using the provided evaluation metric. You should return a single "
    "integer value between 1 to 5 representing the evaluation metric. You will include no other "
    "text or information.";

constexpr std::string_view kGroundednessUser =
    R"(You will be presented with a CONTEXT and an ANSWER about that CONTEXT. You need to decide whether the ANSWER is entailed by the CONTEXT by choosing one of the following rating:
1. 5: The ANSWER follows logically from the information contained in the CONTEXT.
2. 1: The ANSWER is logically false from the information contained in the CONTEXT.
3. An integer score between 1 and 5, and if such an integer score does not exist, use 1: It is not possible to determine whether the ANSWER is true or false without further information.

Read the passage of information thoroughly and select the correct answer from the three answer labels. Read the CONTEXT thoroughly to ensure you know what the CONTEXT entails. Note that the ANSWER is generated by a computer system, so it can contain certain symbols, which should not be a negative factor in the evaluation.

Independent Examples:
Example Task #1 Input:
{"CONTEXT": "Some are reported as not having been wanted at all.", "QUESTION": "", "ANSWER": "All are reported as being completely and fully wanted."}
Example Task #1 Output:
1

Example Task #2 Input:
{"CONTEXT": "Ten new television shows appeared during the month of September. Five of the shows were sitcoms, three were hourlong dramas, and two were news-magazine shows. By January, only seven of these new shows were still on the air. Five of the shows that remained were sitcoms.", "QUESTION": "", "ANSWER": "At least one of the shows that were cancelled was an hourlong drama."}
Example Task #2 Output:
5

Example Task #3 Input:
{"CONTEXT": "In Quebec, an allophone is a resident, usually an immigrant, whose mother tongue or home language is neither French nor English.", "QUESTION": "", "ANSWER": "In Quebec, an allophone is a resident, usually an immigrant, whose mother tongue or home language is not French."}
Example Task #3 Output:
5

Example Task #4 Input:
{"CONTEXT": "Some are reported as not having been wanted at all.", "QUESTION": "", "ANSWER": "All are reported as being completely and fully wanted."}
Example Task #4 Output:
1

Actual Task Input:
{"CONTEXT": {{context}}, "QUESTION": "", "ANSWER": {{response}}}
Reminder: The return values for each task should be correctly formatted as an integer between 1 and 5. Do not repeat the context and question.

Actual Task Output:)";

constexpr std::string_view kSimilarityUser =
    R"(Equivalence, as a metric, measures the similarity between the predicted answer and the correct answer. If the information and content in the predicted answer is similar or equivalent to the correct answer, then the value of the Equivalence metric should be high, else it should be low. Given the question, correct answer, and predicted answer, determine the value of the Equivalence metric using the following rating scale:

- One star: the predicted answer is not at all similar to the correct answer
- Two stars: the predicted answer is mostly not similar to the correct answer
- Three stars: the predicted answer is somewhat similar to the correct answer
- Four stars: the predicted answer is mostly similar to the correct answer
- Five stars: the predicted answer is completely similar to the correct answer

This rating value should always be an integer between 1 and 5. So the rating produced should be 1, 2, 3, 4, or 5. The examples below show the Equivalence score for a question, a correct answer, and a predicted answer.

Question: What is the role of ribosomes?
Correct answer: Ribosomes are cellular structures responsible for protein synthesis. They interpret the genetic information carried by messenger RNA (mRNA) and use it to assemble amino acids into proteins.
Predicted answer: Ribosomes participate in carbohydrate breakdown by removing nutrients from complex sugar molecules.
Stars: 1

Question: Why did the Titanic sink?
Correct answer: The Titanic sank after it struck an iceberg during its maiden voyage in 1912. The impact caused the ship's hull to breach, allowing water to flood into the vessel. The ship's design, lifeboat shortage, and lack of timely rescue efforts contributed to the tragic loss of life.
Predicted answer: The sinking of the Titanic was a result of a large iceberg collision. This caused the ship to take on water and eventually sink, leading to the death of many passengers due to a shortage of lifeboats and insufficient rescue attempts.
Stars: 2

Question: What are the health benefits of regular exercise?
Correct answer: Regular exercise can help maintain a healthy weight, increase muscle and bone strength, and reduce the risk of chronic diseases. It also promotes mental well-being by reducing stress and improving overall mood.
Predicted answer: Routine physical activity can contribute to maintaining ideal body weight, enhancing muscle and bone strength, and preventing chronic illnesses. In addition, it supports mental health by alleviating stress and augmenting general mood.
Stars: 5

Question: {{query}}
Correct answer: {{ground_truth}}
Predicted answer: {{response}}
Stars:)";

// Single left-to-right pass so substituted text is never rescanned.
std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string_view, std::string>>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.compare(i, 2, "{{") == 0) {
      bool hit = false;
      for (const auto& [name, value] : values) {
        std::string ph = "{{" + std::string(name) + "}}";
        if (tmpl.compare(i, ph.size(), ph) == 0) {
          out += value;
          i += ph.size();
          hit = true;
          break;
        }
      }
      if (hit) continue;
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string json_quote(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

const JudgePrompt& groundedness_template() {
  static const JudgePrompt p{std::string(kSystem), std::string(kGroundednessUser)};
  return p;
}

const JudgePrompt& similarity_template() {
  static const JudgePrompt p{std::string(kSystem), std::string(kSimilarityUser)};
  return p;
}

JudgePrompt render_groundedness_prompt(std::string_view context, std::string_view response) {
  const auto& t = groundedness_template();
  return {t.system,
          substitute(t.user, {{"context", json_quote(context)}, {"response", json_quote(response)}})};
}

JudgePrompt render_similarity_prompt(std::string_view query, std::string_view ground_truth,
                                     std::string_view response) {
  const auto& t = similarity_template();
  return {t.system, substitute(t.user, {{"query", std::string(query)},
                                        {"ground_truth", std::string(ground_truth)},
                                        {"response", std::string(response)}})};
}

std::string_view to_string(ParsePath p) {
  switch (p) {
    case ParsePath::clean_integer: return "clean-integer";
    case ParsePath::extracted_integer: return "extracted-integer";
    case ParsePath::failed: return "failed";
  }
  return "failed";
}

JudgeVerdict parse_verdict(std::string_view reply) {
  JudgeVerdict v;
  v.raw = std::string(reply);
  std::size_t b = 0, e = reply.size();
  while (b < e && is_space(reply[b])) ++b;
  while (e > b && is_space(reply[e - 1])) --e;
  std::string_view trimmed = reply.substr(b, e - b);
  if (trimmed.size() == 1 && trimmed[0] >= '1' && trimmed[0] <= '5') {
    v.score = trimmed[0] - '0';
    v.parse_path = ParsePath::clean_integer;
    return v;
  }
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  for (std::size_t i = 0; i < reply.size();) {
    if (!digit(reply[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < reply.size() && digit(reply[j])) ++j;
    // "4.5" is not a standalone integer; "4." is.
    bool decimal = j + 1 < reply.size() && reply[j] == '.' && digit(reply[j + 1]);
    bool preceded = i > 0 && (reply[i - 1] == '.' || std::isalpha(static_cast<unsigned char>(reply[i - 1])));
    bool followed = j < reply.size() && std::isalpha(static_cast<unsigned char>(reply[j]));
    if (j - i == 1 && !decimal && !preceded && !followed && reply[i] >= '1' && reply[i] <= '5') {
      v.score = reply[i] - '0';
      v.parse_path = ParsePath::extracted_integer;
      return v;
    }
    i = j;
  }
  return v;
}

std::uint64_t request_hash(const JudgePrompt& prompt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  feed(prompt.system);
  feed("\x1f");
  feed(prompt.user);
  return h;
}

std::string request_hash_hex(const JudgePrompt& prompt) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(request_hash(prompt)));
  return buf;
}

void MockJudgeClient::add_contains(std::string needle, std::string reply) {
  contains_.emplace_back(std::move(needle), std::move(reply));
}

MockJudgeClient MockJudgeClient::load(std::istream& in) {
  MockJudgeClient m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    try {
      if (j.contains("default")) {
        m.set_default(j.at("default").get<std::string>());
      } else if (j.contains("hash")) {
        auto hex = j.at("hash").get<std::string>();
        std::size_t used = 0;
        std::uint64_t h = std::stoull(hex, &used, 16);
        if (used != hex.size()) throw ParseError(lineno, "bad hash \"" + hex + "\"");
        m.add(h, j.at("reply").get<std::string>());
      } else if (j.contains("contains")) {
        m.add_contains(j.at("contains").get<std::string>(), j.at("reply").get<std::string>());
      } else {
        throw ParseError(lineno, "entry needs \"hash\", \"contains\" or \"default\"");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    } catch (const std::invalid_argument&) {
      throw ParseError(lineno, "bad hash");
    } catch (const std::out_of_range&) {
      throw ParseError(lineno, "bad hash");
    }
  }
  return m;
}

MockJudgeClient MockJudgeClient::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mock judge fixture " + path.string());
  return load(in);
}

JudgeReply MockJudgeClient::complete(const JudgePrompt& prompt) {
  if (auto it = by_hash_.find(request_hash(prompt)); it != by_hash_.end()) return {it->second, 1};
  for (const auto& [needle, reply] : contains_) {
    if (prompt.user.find(needle) != std::string::npos) return {reply, 1};
  }
  if (default_) return {*default_, 1};
  throw Error("mock judge has no reply for request " + request_hash_hex(prompt));
}

LiveJudgeClient::LiveJudgeClient(EndpointConfig cfg, std::shared_ptr<Transport> transport,
                                 std::size_t max_in_flight, SleepFn sleep)
    : cfg_(std::move(cfg)),
      api_key_(read_api_key(cfg_)),
      transport_(std::move(transport)),
      sleep_(std::move(sleep)),
      max_in_flight_(max_in_flight == 0 ? 1 : max_in_flight) {
  if (!transport_) transport_ = make_http_transport(cfg_);
}

JudgeReply LiveJudgeClient::complete(const JudgePrompt& prompt) {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
  }
  struct Release {
    LiveJudgeClient* self;
    ~Release() {
      {
        std::lock_guard lock(self->mu_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};

  nlohmann::json req = {
      {"model", cfg_.model},
      {"messages",
       {{{"role", "system"}, {"content", prompt.system}}, {{"role", "user"}, {"content", prompt.user}}}},
      {"temperature", 0}};
  Headers headers{{"Authorization", "Bearer " + api_key_}};
  RetryOutcome res = post_with_retries(*transport_, cfg_, "/chat/completions", req.dump(), headers, sleep_);
  try {
    auto j = nlohmann::json::parse(res.body);
    return {j.at("choices").at(0).at("message").at("content").get<std::string>(), res.attempts};
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(res.attempts, 200, std::string("malformed chat reply: ") + e.what());
  }
}

JudgeVerdict judge_groundedness(const EvalRecord& record, JudgeClient& client) {
  JudgeReply reply = client.complete(render_groundedness_prompt(record.context, record.candidate));
  JudgeVerdict v = parse_verdict(reply.text);
  v.retries = reply.attempts - 1;
  return v;
}

JudgeVerdict judge_similarity(const EvalRecord& record, JudgeClient& client) {
  JudgeReply reply =
      client.complete(render_similarity_prompt(record.prompt, record.reference, record.candidate));
  JudgeVerdict v = parse_verdict(reply.text);
  v.retries = reply.attempts - 1;
  return v;
}

}  // namespace kgv
