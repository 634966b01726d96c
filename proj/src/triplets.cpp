#include "kgv/triplets.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "kgv/error.hpp"
#include "kgv/normalize.hpp"

namespace kgv {

namespace detail {
extern const std::string_view kDefaultAbbreviations;
}

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

char ascii_lower(char c) { return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
  return out;
}

std::set<std::string> parse_abbreviations(std::istream& in) {
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    out.insert(lower(std::string_view(line).substr(b, e - b + 1)));
  }
  return out;
}

}  // namespace

SplitterConfig SplitterConfig::defaults() {
  static const std::set<std::string> kAbbrevs = [] {
    std::istringstream in{std::string(detail::kDefaultAbbreviations)};
    return parse_abbreviations(in);
  }();
  return SplitterConfig{kAbbrevs};
}

SplitterConfig SplitterConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read abbreviation list: " + path.string());
  return SplitterConfig{parse_abbreviations(in)};
}

std::vector<Sentence> split_sentences(std::string_view text, const SplitterConfig& cfg) {
  std::vector<Sentence> out;
  const std::size_t n = text.size();
  std::size_t start = n;  // n means "no open sentence"

  auto emit = [&](std::size_t end) {
    while (end > start && is_space(text[end - 1])) --end;
    if (start < end) {
      out.push_back(Sentence{out.size(), std::string(text.substr(start, end - start)),
                             Span{start, end}});
    }
    start = n;
  };

  std::size_t i = 0;
  while (i < n) {
    char c = text[i];
    if (start == n) {
      if (!is_space(c)) start = i;
      ++i;
      continue;
    }
    if (c == '\n') {
      emit(i);
      ++i;
      continue;
    }
    if (!is_terminal(c)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && (is_terminal(text[j]) || is_closer(text[j]))) ++j;
    if (j == n) {
      emit(j);
      i = j;
      continue;
    }
    if (!is_space(text[j])) {
      i = j;
      continue;
    }
    std::size_t k = j;
    while (k < n && is_space(text[k]) && text[k] != '\n') ++k;
    bool boundary = k == n || text[k] == '\n' || is_upper(text[k]) || is_digit(text[k]);
    if (boundary && c == '.' && j == i + 1) {
      std::size_t tok = i;
      while (tok > start && !is_space(text[tok - 1])) --tok;
      if (cfg.abbreviations.count(lower(text.substr(tok, i + 1 - tok)))) boundary = false;
    }
    if (boundary) emit(j);
    i = j;
  }
  if (start != n) emit(n);
  return out;
}

// ---------------------------------------------------------------------------

ExtractionRules ExtractionRules::defaults() {
  ExtractionRules r;
  r.copulas = {"is", "are", "was", "were", "costs", "supports", "requires", "includes"};
  r.verbs = {
      "has",       "have",       "had",       "provides",  "provided",  "offers",
      "offered",   "contains",   "contained", "allows",    "allowed",   "enables",
      "enabled",   "uses",       "used",      "needs",     "needed",    "gives",
      "gave",      "lets",       "makes",     "made",      "creates",   "created",
      "founded",   "leads",      "led",       "owns",      "owned",     "runs",
      "ran",       "becomes",    "became",    "remains",   "remained",  "increases",
      "increased", "decreases",  "decreased", "reduces",   "reduced",   "covers",
      "covered",   "comes",      "came",      "starts",    "started",   "ends",
      "ended",     "features",   "featured",  "delivers",  "delivered", "connects",
      "connected", "stores",     "stored",    "hosts",     "hosted",    "manages",
      "managed",   "released",   "releases",  "launched",  "launches",  "acquired",
      "acquires",  "integrates", "integrated", "replaces", "replaced",  "protects",
      "protected", "shows",      "showed",    "said",      "says",      "won",
      "wins",      "lost",       "loses",     "joined",    "joins",     "left",
      "announced", "announces",  "reported",  "reports",   "found",     "finds",
      "built",     "builds",     "bought",    "buys",      "sold",      "sells",
      "wrote",     "writes",     "met",       "meets",     "took",      "takes",
      "received",  "receives",   "signed",    "signs",     "visited",   "visits",
      "lives",     "lived",      "works",     "worked",    "plays",     "played",
      "scored",    "scores",     "killed",    "died",      "served",    "serves",
      "charges",   "charged",    "priced",    "equals",    "means",     "meant"};
  r.modals = {"can", "could", "will", "would", "may", "might", "must", "should", "shall"};
  r.clause_openers = {"however",  "if",          "when",    "although", "though",
                      "because",  "since",       "while",   "unless",   "also",
                      "additionally", "furthermore", "moreover", "otherwise", "then",
                      "meanwhile", "currently",  "today",   "therefore", "thus"};
  r.conjunctions = {"and", "or"};
  return r;
}

std::string normalize_relation(std::string_view relation) {
  std::string out;
  bool pending_space = false;
  for (char c : relation) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ascii_lower(c));
  }
  return out;
}

namespace {

struct Token {
  Span span;
  std::string bare;  // lowercase, surrounding punctuation removed (except $ %)
  bool ends_with_comma = false;
};

bool is_strip_punct(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) && c != '$' && c != '%';
}

std::vector<Token> tokenize_range(std::string_view s, Span range) {
  std::vector<Token> out;
  std::size_t i = range.begin;
  while (i < range.end) {
    while (i < range.end && is_space(s[i])) ++i;
    if (i >= range.end) break;
    std::size_t b = i;
    while (i < range.end && !is_space(s[i])) ++i;
    Token t;
    t.span = {b, i};
    std::string_view raw = s.substr(b, i - b);
    t.ends_with_comma = raw.size() > 1 && raw.back() == ',';
    std::size_t lb = 0, le = raw.size();
    while (lb < le && is_strip_punct(raw[lb])) ++lb;
    while (le > lb && is_strip_punct(raw[le - 1])) --le;
    t.bare = lower(raw.substr(lb, le - lb));
    if (raw == ",") t.bare = ",";
    out.push_back(std::move(t));
  }
  return out;
}

// Trims trailing separators (",;:") and whitespace from a span.
Span trim_tail(std::string_view s, Span sp) {
  while (sp.end > sp.begin && (is_space(s[sp.end - 1]) || s[sp.end - 1] == ',' ||
                               s[sp.end - 1] == ';' || s[sp.end - 1] == ':'))
    --sp.end;
  return sp;
}

std::string slice(std::string_view s, Span sp) {
  return std::string(s.substr(sp.begin, sp.size()));
}

EntityMention mention(std::string_view s, Span sp) {
  EntityMention m;
  m.span = sp;
  m.surface = slice(s, sp);
  m.canonical = normalize_entity(m.surface);
  return m;
}

// Body of the clause: sentence minus terminal punctuation and leading
// adverbial/subordinate prefixes.
std::vector<Token> clause_tokens(std::string_view s, const ExtractionRules& rules) {
  Span body{0, s.size()};
  while (body.end > body.begin) {
    char c = s[body.end - 1];
    if (is_space(c) || is_terminal(c) || c == ';' || c == ':' || c == '"') {
      --body.end;
    } else if (body.end - body.begin >= 3 && s.substr(body.end - 3, 3) == "\xE2\x80\xA6") {
      body.end -= 3;  // U+2026 ellipsis
    } else {
      break;
    }
  }
  std::vector<Token> tokens = tokenize_range(s, body);
  std::size_t first = 0;
  while (first < tokens.size() && rules.clause_openers.count(tokens[first].bare)) {
    std::size_t k = first;
    while (k < tokens.size() && !tokens[k].ends_with_comma) ++k;
    if (k + 1 >= tokens.size()) break;
    first = k + 1;
  }
  return {tokens.begin() + static_cast<std::ptrdiff_t>(first), tokens.end()};
}

struct ListItem {
  Span span;
};

std::vector<ListItem> split_list(const std::vector<Token>& tokens, std::size_t from,
                                 const ExtractionRules& rules) {
  std::vector<ListItem> items;
  bool has_conjunction = false;
  std::optional<Span> current;
  auto close = [&] {
    if (current) items.push_back({*current});
    current.reset();
  };
  for (std::size_t i = from; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (rules.conjunctions.count(t.bare)) {
      has_conjunction = true;
      close();
      continue;
    }
    if (t.bare == ",") {
      close();
      continue;
    }
    Span sp = t.span;
    if (t.ends_with_comma) --sp.end;
    if (current) {
      current->end = sp.end;
    } else {
      current = sp;
    }
    if (t.ends_with_comma) close();
  }
  close();
  if (!has_conjunction || items.size() < 2) return {};
  return items;
}

void extract_sentence(const Sentence& sentence, const ExtractionRules& rules,
                      std::vector<Triplet>& out) {
  std::string_view s = sentence.text;
  std::vector<Token> tokens = clause_tokens(s, rules);
  if (tokens.size() < 3) return;

  std::size_t rel_begin = 0, rel_end = 0;  // token indices, rel_end exclusive
  ExtractionRule rule = ExtractionRule::generic_svo;
  for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
    if (rules.copulas.count(tokens[i].bare)) {
      rel_begin = i;
      rel_end = i + 1;
      rule = ExtractionRule::copula;
      break;
    }
  }
  if (rel_end == 0) {
    for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
      if (rules.verbs.count(tokens[i].bare)) {
        rel_begin = i;
        rel_end = i + 1;
        break;
      }
      if (rules.modals.count(tokens[i].bare) && i + 2 < tokens.size()) {
        rel_begin = i;
        rel_end = i + 2;
        break;
      }
    }
  }
  if (rel_end == 0) return;

  Span subject_span = trim_tail(s, {tokens.front().span.begin, tokens[rel_begin - 1].span.end});
  Span relation_span{tokens[rel_begin].span.begin, tokens[rel_end - 1].span.end};
  Span object_span = trim_tail(s, {tokens[rel_end].span.begin, tokens.back().span.end});
  if (subject_span.empty() || object_span.empty()) return;

  EntityMention subject = mention(s, subject_span);
  EntityMention whole_object = mention(s, object_span);
  if (subject.canonical.empty() || whole_object.canonical.empty()) return;

  Triplet base;
  base.subject = subject;
  base.relation = slice(s, relation_span);
  base.relation_span = relation_span;
  base.sentence_index = sentence.index;
  base.provenance = Provenance::extracted;
  base.object_phrase = whole_object.surface;
  base.object_phrase_span = object_span;

  std::vector<ListItem> items = split_list(tokens, rel_end, rules);
  bool all_items_valid = !items.empty();
  for (const auto& item : items) {
    if (normalize_entity(slice(s, item.span)).empty()) all_items_valid = false;
  }
  if (all_items_valid) {
    for (const auto& item : items) {
      Triplet t = base;
      t.object = mention(s, item.span);
      t.rule = ExtractionRule::list_expansion;
      t.confidence = rules.list_confidence;
      t.list_group = 0;
      out.push_back(std::move(t));
    }
    return;
  }
  Triplet t = std::move(base);
  t.object = whole_object;
  t.rule = rule;
  t.confidence = rule == ExtractionRule::copula ? rules.copula_confidence : rules.svo_confidence;
  out.push_back(std::move(t));
}

}  // namespace

std::vector<Triplet> extract_triplets(const std::vector<Sentence>& sentences,
                                      const ExtractionRules& rules) {
  std::vector<Triplet> out;
  for (const auto& sentence : sentences) extract_sentence(sentence, rules, out);
  return out;
}

std::vector<Triplet> extract_document(std::string_view text, const SplitterConfig& splitter,
                                      const ExtractionRules& rules) {
  return extract_triplets(split_sentences(text, splitter), rules);
}

// ---------------------------------------------------------------------------

std::string_view to_string(ExtractionRule rule) {
  switch (rule) {
    case ExtractionRule::copula: return "copula";
    case ExtractionRule::list_expansion: return "list_expansion";
    case ExtractionRule::generic_svo: return "generic_svo";
    case ExtractionRule::external: return "external";
  }
  return "external";
}

std::string_view to_string(Provenance p) {
  return p == Provenance::extracted ? "extracted" : "ingested";
}

std::string to_record(const Triplet& t) {
  nlohmann::ordered_json j;
  j["subject"] = t.subject.surface;
  j["relation"] = t.relation;
  j["object"] = t.object.surface;
  if (t.sentence_index != kNoSentence) j["sentence_index"] = t.sentence_index;
  j["confidence"] = t.confidence;
  if (!t.object_phrase.empty() && t.object_phrase != t.object.surface)
    j["object_phrase"] = t.object_phrase;
  if (t.list_group) j["list_group"] = *t.list_group;
  return j.dump();
}

std::string serialize_triplets(const std::vector<Triplet>& triplets) {
  std::string out;
  for (const auto& t : triplets) {
    out += to_record(t);
    out.push_back('\n');
  }
  return out;
}

namespace {

std::string required_string(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw ParseError(line, std::string("missing string field \"") + key + "\"");
  std::string v = it->get<std::string>();
  bool empty = key == std::string_view("relation") ? normalize_relation(v).empty()
                                                    : normalize_entity(v).empty();
  if (empty) throw ParseError(line, std::string("empty field \"") + key + "\"");
  return v;
}

EntityMention ingested_mention(std::string surface) {
  EntityMention m;
  m.canonical = normalize_entity(surface);
  m.surface = std::move(surface);
  return m;
}

}  // namespace

IngestResult ingest_triplets(std::istream& in) {
  IngestResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "record is not an object");

    Triplet t;
    t.provenance = Provenance::ingested;
    t.rule = ExtractionRule::external;
    t.subject = ingested_mention(required_string(j, "subject", line_no));
    t.relation = required_string(j, "relation", line_no);
    t.object = ingested_mention(required_string(j, "object", line_no));

    if (auto it = j.find("sentence_index"); it != j.end()) {
      if (!it->is_number_integer() || it->get<long long>() < 0)
        throw ParseError(line_no, "sentence_index must be a non-negative integer");
      t.sentence_index = it->get<std::size_t>();
    }
    if (auto it = j.find("confidence"); it != j.end()) {
      if (!it->is_number()) throw ParseError(line_no, "confidence must be a number");
      t.confidence = it->get<double>();
      if (!(t.confidence >= 0.0 && t.confidence <= 1.0))
        throw ParseError(line_no, "confidence outside [0,1]");
    }
    t.object_phrase = t.object.surface;
    if (auto it = j.find("object_phrase"); it != j.end()) {
      if (!it->is_string()) throw ParseError(line_no, "object_phrase must be a string");
      t.object_phrase = it->get<std::string>();
    }
    if (auto it = j.find("list_group"); it != j.end()) {
      if (!it->is_number_unsigned()) throw ParseError(line_no, "list_group must be unsigned");
      t.list_group = it->get<std::uint32_t>();
    }

    if (!seen.insert(to_record(t)).second) {
      ++result.duplicates;
      continue;
    }
    result.triplets.push_back(std::move(t));
  }
  return result;
}

IngestResult ingest_triplets(std::string_view text) {
  std::istringstream in{std::string(text)};
  return ingest_triplets(in);
}

}  // namespace kgv
