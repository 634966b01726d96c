#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace kgv {

// Half-open byte range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool overlaps(const Span& o) const { return begin < o.end && o.begin < end; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct Sentence {
  std::size_t index = 0;
  std::string text;
  Span span;  // offsets into the source document

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct EntityMention {
  std::string surface;
  std::string canonical;
  Span span;  // offsets within the owning sentence; empty for ingested mentions

  friend bool operator==(const EntityMention&, const EntityMention&) = default;
};

enum class Provenance { extracted, ingested };

enum class ExtractionRule { copula, list_expansion, generic_svo, external };

inline constexpr std::size_t kNoSentence = std::numeric_limits<std::size_t>::max();

struct Triplet {
  EntityMention subject;
  std::string relation;
  Span relation_span;
  EntityMention object;
  std::size_t sentence_index = kNoSentence;
  Provenance provenance = Provenance::extracted;
  double confidence = 1.0;
  ExtractionRule rule = ExtractionRule::external;

  // The object phrase as written. For list expansions this is the whole
  // conjunction list shared by the group; otherwise it equals object.surface.
  std::string object_phrase;
  Span object_phrase_span;
  std::optional<std::uint32_t> list_group;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

// ---------------------------------------------------------------------------
// Sentence segmentation

struct SplitterConfig {
  // Lowercased tokens, including their trailing period ("e.g.", "inc.").
  std::set<std::string> abbreviations;

  static SplitterConfig defaults();
  // One abbreviation per line; blank lines and lines starting with '#' are
  // skipped. Throws kgv::Error if the file cannot be read.
  static SplitterConfig load(const std::filesystem::path& path);
};

// Splits on . ! ? (and runs of them, plus closing quotes/brackets) followed by
// whitespace and an uppercase letter or digit, and on line breaks. Never fails.
std::vector<Sentence> split_sentences(std::string_view text,
                                      const SplitterConfig& cfg = SplitterConfig::defaults());

// ---------------------------------------------------------------------------
// Rule-based extraction

struct ExtractionRules {
  std::set<std::string> copulas;
  std::set<std::string> verbs;
  std::set<std::string> modals;
  // Leading words that open an adverbial/subordinate prefix ending in a comma
  // ("However, ...", "If you commit yearly, ...").
  std::set<std::string> clause_openers;
  std::set<std::string> conjunctions;

  double copula_confidence = 1.0;
  double list_confidence = 1.0;
  double svo_confidence = 0.8;

  static ExtractionRules defaults();
};

std::vector<Triplet> extract_triplets(const std::vector<Sentence>& sentences,
                                      const ExtractionRules& rules = ExtractionRules::defaults());

// Convenience: split + extract.
std::vector<Triplet> extract_document(std::string_view text,
                                      const SplitterConfig& splitter = SplitterConfig::defaults(),
                                      const ExtractionRules& rules = ExtractionRules::defaults());

// Lowercased, trimmed, whitespace-collapsed relation key.
std::string normalize_relation(std::string_view relation);

// ---------------------------------------------------------------------------
// Line-delimited triplet records

struct IngestResult {
  std::vector<Triplet> triplets;
  std::size_t duplicates = 0;
};

// Parses one JSON object per line. Blank lines are ignored. Throws ParseError
// naming the 1-based line on malformed input.
IngestResult ingest_triplets(std::istream& in);
IngestResult ingest_triplets(std::string_view text);

// One record without the trailing newline. Optional fields are written only
// when they carry information (sentence_index set, non-default provenance...).
std::string to_record(const Triplet& t);
std::string serialize_triplets(const std::vector<Triplet>& triplets);

std::string_view to_string(ExtractionRule rule);
std::string_view to_string(Provenance p);

}  // namespace kgv
