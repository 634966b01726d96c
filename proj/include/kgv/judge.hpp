#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "kgv/endpoint.hpp"
#include "kgv/textmetrics.hpp"

namespace kgv {

struct JudgePrompt {
  std::string system;
  std::string user;
  friend bool operator==(const JudgePrompt&, const JudgePrompt&) = default;
};

// Raw templates with {{...}} placeholders.
const JudgePrompt& groundedness_template();
const JudgePrompt& similarity_template();

// {{context}} and {{response}} are substituted as JSON string literals.
JudgePrompt render_groundedness_prompt(std::string_view context, std::string_view response);
// {{query}}, {{ground_truth}} and {{response}} are substituted verbatim.
JudgePrompt render_similarity_prompt(std::string_view query, std::string_view ground_truth,
                                     std::string_view response);

enum class ParsePath { clean_integer, extracted_integer, failed };

std::string_view to_string(ParsePath p);

struct JudgeVerdict {
  std::optional<int> score;  // 1..5, absent when parsing failed
  std::string raw;
  ParsePath parse_path = ParsePath::failed;
  int retries = 0;
};

// Exactly an integer 1-5 (surrounding whitespace allowed) -> clean; else the
// first standalone integer 1-5 -> extracted; else failed.
JudgeVerdict parse_verdict(std::string_view reply);

struct JudgeReply {
  std::string text;
  int attempts = 1;
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  // Throws EndpointError when the endpoint cannot be reached.
  virtual JudgeReply complete(const JudgePrompt& prompt) = 0;
};

// FNV-1a 64 of system + "\x1f" + user.
std::uint64_t request_hash(const JudgePrompt& prompt);
std::string request_hash_hex(const JudgePrompt& prompt);

// Canned replies. Fixture lines are {"hash": "<16 hex>", "reply": ...},
// {"contains": "<substring of user>", "reply": ...} or {"default": ...}.
// Lookup order: hash, first matching substring in file order, default.
class MockJudgeClient final : public JudgeClient {
 public:
  MockJudgeClient() = default;
  static MockJudgeClient load(std::istream& in);
  static MockJudgeClient load(const std::filesystem::path& path);

  void add(std::uint64_t hash, std::string reply) { by_hash_[hash] = std::move(reply); }
  void add_contains(std::string needle, std::string reply);
  void set_default(std::string reply) { default_ = std::move(reply); }

  // Throws kgv::Error when nothing matches.
  JudgeReply complete(const JudgePrompt& prompt) override;

 private:
  std::unordered_map<std::uint64_t, std::string> by_hash_;
  std::vector<std::pair<std::string, std::string>> contains_;
  std::optional<std::string> default_;
};

// Chat-completion client: POST {base_url}/chat/completions with model,
// system + user messages and temperature 0; the reply is
// choices[0].message.content.
class LiveJudgeClient final : public JudgeClient {
 public:
  LiveJudgeClient(EndpointConfig cfg, std::shared_ptr<Transport> transport = nullptr,
                  std::size_t max_in_flight = 4, SleepFn sleep = {});
  JudgeReply complete(const JudgePrompt& prompt) override;

 private:
  EndpointConfig cfg_;
  std::string api_key_;
  std::shared_ptr<Transport> transport_;
  SleepFn sleep_;
  std::size_t max_in_flight_;
  std::size_t in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

JudgeVerdict judge_groundedness(const EvalRecord& record, JudgeClient& client);
JudgeVerdict judge_similarity(const EvalRecord& record, JudgeClient& client);

}  // namespace kgv
