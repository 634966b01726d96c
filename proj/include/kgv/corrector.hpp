#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgv/kgraph.hpp"
#include "kgv/matching.hpp"
#include "kgv/triplets.hpp"

namespace kgv {

enum class ActionKind { keep, replace_object, replace_relation, eliminate_sentence, prune_edge };

std::string_view to_string(ActionKind kind);

// Replacement of a document byte range.
struct TextEdit {
  Span span;
  std::string replacement;
  friend bool operator==(const TextEdit&, const TextEdit&) = default;
};

struct CorrectionAction {
  ActionKind kind = ActionKind::keep;
  // Generated triplets covered by this action (indices into
  // CorrectionReport::generated_triplets). For prune_edge: the generated
  // triplets dropped by the pruning step.
  std::vector<std::size_t> triplet_ids;
  std::size_t sentence_index = kNoSentence;

  // replace_object / replace_relation: old and new surface strings and the
  // context triplet the replacement came from (index into G.triplets()).
  std::string old_text;
  std::string new_text;
  std::optional<std::size_t> source_triplet;
  // Set when the subject surface was rewritten to the matched context surface.
  std::optional<std::string> subject_rewrite;

  std::string reason;                      // eliminate_sentence / prune_edge
  std::optional<Edge> pruned_edge;         // prune_edge
  std::vector<std::size_t> removed_sentences;
  std::vector<TextEdit> edits;
};

struct CorrectorConfig {
  // Eliminate sentences from which no triplet can be extracted.
  bool strict = false;
  SplitterConfig splitter = SplitterConfig::defaults();
  ExtractionRules rules = ExtractionRules::defaults();
};

struct CorrectionReport {
  std::string original;
  std::string corrected;
  std::vector<Sentence> sentences;
  std::vector<Triplet> generated_triplets;
  std::vector<CorrectionAction> actions;
  KnowledgeGraph verified_graph{GraphOrigin::verified_subgraph};
  double eliminated_entity_rate = 0.0;
  std::vector<MatchResult> match_log;

  bool changed() const { return corrected != original; }
};

// Verifies every triplet of `generated` against `context` and rewrites the
// text: keep, replace object, replace relation, or eliminate; then prunes
// cycles among the surviving assertions down to a spanning forest. `matcher`
// must have been built over `context`.
CorrectionReport correct(std::string_view generated, const KnowledgeGraph& context,
                         const EntityMatcher& matcher, const CorrectorConfig& cfg = {});

// Replays actions onto `original`. Later edits with an identical span replace
// earlier ones; partially overlapping edits throw kgv::Error. Removed
// sentences are dropped together with their leading separator.
std::string apply_edits(std::string_view original, const std::vector<Sentence>& sentences,
                        const std::vector<CorrectionAction>& actions);

// Distinct generated entities whose every mention was eliminated or pruned,
// over all distinct generated entities. 0 when nothing was extracted.
double eliminated_entity_rate(const CorrectionReport& report);

// Picks sentences mentioning the most frequent subjects, original order, at
// most `budget` of them. Falls back to the leading sentences when nothing can
// be extracted.
std::string select_salient_sentences(std::string_view article, std::size_t budget,
                                     const SplitterConfig& splitter = SplitterConfig::defaults(),
                                     const ExtractionRules& rules = ExtractionRules::defaults());

// Structured report: original, corrected, actions, eliminated_entity_rate,
// match_log. `pretty` indents; otherwise a single line.
std::string report_to_json(const CorrectionReport& report, bool pretty);

}  // namespace kgv
