#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kgv {

// Lowercased whitespace tokens with ASCII punctuation removed. "$" and "%" are
// kept, and so is "." between two digits, so "$7.2" stays one token.
std::vector<std::string> metric_tokens(std::string_view text);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

inline constexpr double kRougeBeta = 1.2;

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

struct MeteorDetail {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

// Exact then Porter-stem unigram alignment; no synonym stage.
MeteorDetail meteor_detail(std::string_view candidate, std::string_view reference);
double meteor(std::string_view candidate, std::string_view reference);

std::string porter_stem(std::string_view word);

struct EvalRecord {
  std::string id;
  std::string prompt;
  std::string context;
  std::string reference;
  std::string candidate;
};

struct MetricScores {
  double rouge_l_f = 0.0;
  double meteor = 0.0;
  std::optional<double> groundedness;
  std::optional<double> gpt_similarity;
  std::optional<double> eliminated_entity_rate;
  // Judge replies that could not be parsed, e.g. "groundedness".
  std::vector<std::string> judge_failures;
};

struct ScoredRecord {
  std::string id;
  MetricScores scores;
};

// Hooks filled in per record when configured. Each returns nullopt when its
// verdict could not be parsed.
struct EvalOptions {
  std::function<std::optional<int>(const EvalRecord&)> groundedness;
  std::function<std::optional<int>(const EvalRecord&)> gpt_similarity;
  std::function<double(const EvalRecord&)> eliminated_entity_rate;
  std::size_t workers = 1;
};

struct EvalResult {
  std::vector<ScoredRecord> records;  // sorted by id
  MetricScores aggregate;             // means over present values
};

// Throws kgv::Error listing duplicate ids.
EvalResult evaluate_dataset(const std::vector<EvalRecord>& records, const EvalOptions& options = {});

// Line-delimited {id, prompt, context, reference, candidate}. Throws
// ParseError with the line number.
std::vector<EvalRecord> load_dataset(std::istream& in);

// Per-record lines followed by {"id": "__aggregate__", ...}.
void write_results(std::ostream& out, const EvalResult& result);

}  // namespace kgv
