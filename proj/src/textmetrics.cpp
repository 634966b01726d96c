#include "kgv/textmetrics.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "kgv/error.hpp"
#include "kgv/normalize.hpp"

namespace kgv {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool keep_char(std::string_view s, std::size_t i) {
  char c = s[i];
  auto u = static_cast<unsigned char>(c);
  if (u >= 0x80 || !std::ispunct(u)) return true;
  if (c == '$' || c == '%') return true;
  if (c == '.') return i > 0 && i + 1 < s.size() && is_digit(s[i - 1]) && is_digit(s[i + 1]);
  return false;
}

}  // namespace

std::vector<std::string> metric_tokens(std::string_view text) {
  std::string lower = unicode_lower(text);
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    char c = lower[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (keep_char(lower, i)) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = a[i - 1] == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  auto c = metric_tokens(candidate);
  auto r = metric_tokens(reference);
  RougeScore s;
  if (c.empty() || r.empty()) return s;
  double lcs = static_cast<double>(lcs_length(c, r));
  if (lcs == 0) return s;
  s.precision = lcs / static_cast<double>(c.size());
  s.recall = lcs / static_cast<double>(r.size());
  const double b2 = kRougeBeta * kRougeBeta;
  s.f = (1 + b2) * s.precision * s.recall / (s.recall + b2 * s.precision);
  return s;
}

MeteorDetail meteor_detail(std::string_view candidate, std::string_view reference) {
  auto c = metric_tokens(candidate);
  auto r = metric_tokens(reference);
  MeteorDetail d;
  if (c.empty() || r.empty()) return d;

  constexpr std::size_t kUnaligned = static_cast<std::size_t>(-1);
  std::vector<std::size_t> align(c.size(), kUnaligned);
  std::vector<bool> used(r.size(), false);
  auto stage = [&](auto&& key_c, auto&& key_r) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (align[i] != kUnaligned) continue;
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (!used[j] && key_c(i) == key_r(j)) {
          align[i] = j;
          used[j] = true;
          break;
        }
      }
    }
  };
  stage([&](std::size_t i) -> const std::string& { return c[i]; },
        [&](std::size_t j) -> const std::string& { return r[j]; });
  std::vector<std::string> sc, sr;
  for (const auto& t : c) sc.push_back(porter_stem(t));
  for (const auto& t : r) sr.push_back(porter_stem(t));
  stage([&](std::size_t i) -> const std::string& { return sc[i]; },
        [&](std::size_t j) -> const std::string& { return sr[j]; });

  std::size_t prev = kUnaligned;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (align[i] == kUnaligned) {
      prev = kUnaligned;
      continue;
    }
    ++d.matches;
    if (prev == kUnaligned || align[i] != prev + 1) ++d.chunks;
    prev = align[i];
  }
  if (d.matches == 0) return d;
  double m = static_cast<double>(d.matches);
  d.precision = m / static_cast<double>(c.size());
  d.recall = m / static_cast<double>(r.size());
  d.fmean = 10 * d.precision * d.recall / (d.recall + 9 * d.precision);
  d.penalty = 0.5 * std::pow(static_cast<double>(d.chunks) / m, 3);
  d.score = d.fmean * (1 - d.penalty);
  return d;
}

double meteor(std::string_view candidate, std::string_view reference) {
  return meteor_detail(candidate, reference).score;
}

EvalResult evaluate_dataset(const std::vector<EvalRecord>& records, const EvalOptions& options) {
  std::map<std::string, std::size_t> seen;
  for (const auto& r : records) ++seen[r.id];
  std::string dups;
  for (const auto& [id, n] : seen) {
    if (n > 1) dups += (dups.empty() ? "" : ", ") + id;
  }
  if (!dups.empty()) throw Error("duplicate record ids: " + dups);

  EvalResult result;
  result.records.resize(records.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      try {
        const EvalRecord& rec = records[i];
        ScoredRecord out{rec.id, {}};
        out.scores.rouge_l_f = rouge_l(rec.candidate, rec.reference).f;
        out.scores.meteor = meteor(rec.candidate, rec.reference);
        if (options.groundedness) {
          if (auto v = options.groundedness(rec)) {
            out.scores.groundedness = *v;
          } else {
            out.scores.judge_failures.push_back("groundedness");
          }
        }
        if (options.gpt_similarity) {
          if (auto v = options.gpt_similarity(rec)) {
            out.scores.gpt_similarity = *v;
          } else {
            out.scores.judge_failures.push_back("gpt_similarity");
          }
        }
        if (options.eliminated_entity_rate)
          out.scores.eliminated_entity_rate = options.eliminated_entity_rate(rec);
        result.records[i] = std::move(out);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = records.size();
      }
    }
  };

  std::size_t workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(1, records.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::sort(result.records.begin(), result.records.end(),
            [](const ScoredRecord& a, const ScoredRecord& b) { return a.id < b.id; });

  struct Mean {
    double sum = 0;
    std::size_t n = 0;
    void add(double v) { sum += v, ++n; }
    std::optional<double> get() const { return n ? std::optional(sum / static_cast<double>(n)) : std::nullopt; }
  };
  Mean rouge, met, ground, sim, elim;
  for (const auto& r : result.records) {
    rouge.add(r.scores.rouge_l_f);
    met.add(r.scores.meteor);
    if (r.scores.groundedness) ground.add(*r.scores.groundedness);
    if (r.scores.gpt_similarity) sim.add(*r.scores.gpt_similarity);
    if (r.scores.eliminated_entity_rate) elim.add(*r.scores.eliminated_entity_rate);
  }
  result.aggregate.rouge_l_f = rouge.get().value_or(0.0);
  result.aggregate.meteor = met.get().value_or(0.0);
  result.aggregate.groundedness = ground.get();
  result.aggregate.gpt_similarity = sim.get();
  result.aggregate.eliminated_entity_rate = elim.get();
  return result;
}

std::vector<EvalRecord> load_dataset(std::istream& in) {
  std::vector<EvalRecord> out;
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
    if (!j.is_object()) throw ParseError(lineno, "record is not an object");
    EvalRecord r;
    auto field = [&](const char* name, std::string& dst, bool required) {
      auto it = j.find(name);
      if (it == j.end()) {
        if (required) throw ParseError(lineno, std::string("missing field \"") + name + "\"");
        return;
      }
      if (!it->is_string()) throw ParseError(lineno, std::string("field \"") + name + "\" is not a string");
      dst = it->get<std::string>();
    };
    field("id", r.id, true);
    field("prompt", r.prompt, false);
    field("context", r.context, false);
    field("reference", r.reference, true);
    field("candidate", r.candidate, true);
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

nlohmann::ordered_json scores_json(const std::string& id, const MetricScores& s) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["rouge_l_f"] = s.rouge_l_f;
  j["meteor"] = s.meteor;
  if (s.groundedness) j["groundedness"] = *s.groundedness;
  if (s.gpt_similarity) j["gpt_similarity"] = *s.gpt_similarity;
  if (s.eliminated_entity_rate) j["eliminated_entity_rate"] = *s.eliminated_entity_rate;
  if (!s.judge_failures.empty()) j["judge_failures"] = s.judge_failures;
  return j;
}

}  // namespace

void write_results(std::ostream& out, const EvalResult& result) {
  for (const auto& r : result.records) out << scores_json(r.id, r.scores).dump() << '\n';
  out << scores_json("__aggregate__", result.aggregate).dump() << '\n';
}

}  // namespace kgv
