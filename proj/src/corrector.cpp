#include "kgv/corrector.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "json.hpp"
#include "kgv/error.hpp"
#include "kgv/normalize.hpp"

namespace kgv {

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::keep: return "Keep";
    case ActionKind::replace_object: return "ReplaceObject";
    case ActionKind::replace_relation: return "ReplaceRelation";
    case ActionKind::eliminate_sentence: return "EliminateSentence";
    case ActionKind::prune_edge: return "PruneEdge";
  }
  return "Keep";
}

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// One way G states the objects of (subject, relation): a single triplet, or a
// whole conjunction list from one context sentence.
struct Realization {
  std::string relation;
  std::string relation_surface;
  std::vector<std::string> objects;
  std::vector<std::string> object_surfaces;
  std::string phrase;
  std::size_t sentence_index = kNoSentence;
  std::size_t first_triplet = 0;

  std::set<std::string> object_set() const { return {objects.begin(), objects.end()}; }
};

using RealizationIndex = std::unordered_map<std::string, std::vector<Realization>>;

RealizationIndex index_realizations(const KnowledgeGraph& g) {
  RealizationIndex out;
  // (subject, relation, sentence, group) -> position in out[subject]
  std::map<std::tuple<std::string, std::string, std::size_t, long long>, std::size_t> groups;
  const auto& ts = g.triplets();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const Triplet& t = ts[i];
    if (t.subject.canonical == t.object.canonical) continue;
    std::string rel = normalize_relation(t.relation);
    long long group = t.list_group ? static_cast<long long>(*t.list_group)
                                   : -static_cast<long long>(i) - 1;
    auto key = std::make_tuple(t.subject.canonical, rel, t.sentence_index, group);
    auto& list = out[t.subject.canonical];
    auto [it, inserted] = groups.emplace(key, list.size());
    if (inserted) {
      Realization r;
      r.relation = rel;
      r.relation_surface = t.relation;
      r.phrase = t.object_phrase.empty() ? t.object.surface : t.object_phrase;
      r.sentence_index = t.sentence_index;
      r.first_triplet = i;
      list.push_back(std::move(r));
    }
    Realization& r = list[it->second];
    if (std::find(r.objects.begin(), r.objects.end(), t.object.canonical) == r.objects.end()) {
      r.objects.push_back(t.object.canonical);
      r.object_surfaces.push_back(t.object.surface);
    }
  }
  for (auto& [_, list] : out) {
    std::stable_sort(list.begin(), list.end(), [](const Realization& a, const Realization& b) {
      return std::tie(a.sentence_index, a.phrase, a.first_triplet) <
             std::tie(b.sentence_index, b.phrase, b.first_triplet);
    });
  }
  return out;
}

// Triplets of one sentence that share subject, relation and object phrase.
struct Unit {
  std::size_t sentence = 0;
  std::vector<std::size_t> ids;
  bool is_list = false;
};

struct Item {
  std::string key;
  std::string surface;
  std::size_t triplet = kNone;  // generated triplet when the item came from the text
};

// Verified content of a unit after the per-triplet pass.
struct UnitState {
  bool survived = false;
  std::string subject_key;
  std::string subject_surface;
  std::string relation;
  std::vector<Item> items;
  bool items_from_text = true;
  Span phrase_span;  // document offsets
  double confidence = 1.0;
  std::size_t sentence = 0;
  std::vector<std::size_t> ids;
};

Span to_doc(const Sentence& s, Span rel) { return {s.span.begin + rel.begin, s.span.begin + rel.end}; }

std::string join_items(const std::vector<Item>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) {
      if (items.size() == 2) {
        out += " and ";
      } else if (i + 1 == items.size()) {
        out += ", and ";
      } else {
        out += ", ";
      }
    }
    out += items[i].surface;
  }
  return out;
}

std::string join_kept(std::string_view original, const std::vector<Sentence>& sentences,
                      const std::vector<std::string>& texts, const std::vector<bool>& keep) {
  if (sentences.empty()) return std::string(original);
  std::string out;
  bool any = false;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (!keep[i]) continue;
    if (!any) {
      out.append(original.substr(0, sentences.front().span.begin));
    } else {
      std::size_t gap_begin = sentences[i - 1].span.end;
      out.append(original.substr(gap_begin, sentences[i].span.begin - gap_begin));
    }
    out += texts[i];
    any = true;
  }
  if (!any) return "";
  out.append(original.substr(sentences.back().span.end));
  return out;
}

std::string collapse_spaces(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' && !out.empty() && out.back() == ' ') continue;
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string apply_edits(std::string_view original, const std::vector<Sentence>& sentences,
                        const std::vector<CorrectionAction>& actions) {
  std::vector<bool> keep(sentences.size(), true);
  std::vector<std::vector<TextEdit>> per_sentence(sentences.size());

  auto owner = [&](const Span& sp) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (sp.begin >= sentences[i].span.begin && sp.end <= sentences[i].span.end) return i;
    }
    throw Error("edit span [" + std::to_string(sp.begin) + ", " + std::to_string(sp.end) +
                ") is not inside a sentence");
  };

  for (const auto& action : actions) {
    for (std::size_t s : action.removed_sentences) {
      if (s >= sentences.size()) throw Error("action removes unknown sentence " + std::to_string(s));
      keep[s] = false;
    }
    for (const auto& edit : action.edits) {
      auto& edits = per_sentence[owner(edit.span)];
      auto same = std::find_if(edits.begin(), edits.end(),
                               [&](const TextEdit& e) { return e.span == edit.span; });
      if (same != edits.end()) {
        same->replacement = edit.replacement;
        continue;
      }
      for (const auto& e : edits) {
        if (e.span.overlaps(edit.span))
          throw Error("overlapping edits at [" + std::to_string(edit.span.begin) + ", " +
                      std::to_string(edit.span.end) + ")");
      }
      edits.push_back(edit);
    }
  }

  std::vector<std::string> texts(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    texts[i] = sentences[i].text;
    auto& edits = per_sentence[i];
    if (edits.empty() || !keep[i]) continue;
    std::sort(edits.begin(), edits.end(),
              [](const TextEdit& a, const TextEdit& b) { return a.span.begin > b.span.begin; });
    for (const auto& e : edits) {
      std::size_t b = e.span.begin - sentences[i].span.begin;
      texts[i].replace(b, e.span.size(), e.replacement);
    }
    texts[i] = collapse_spaces(texts[i]);
  }
  return join_kept(original, sentences, texts, keep);
}

double eliminated_entity_rate(const CorrectionReport& report) {
  const auto& ts = report.generated_triplets;
  std::set<std::string> entities;
  for (const auto& t : ts) {
    entities.insert(t.subject.canonical);
    entities.insert(t.object.canonical);
  }
  if (entities.empty()) return 0.0;

  std::set<std::size_t> removed_sentences;
  std::vector<bool> dropped(ts.size(), false);
  for (const auto& a : report.actions) {
    removed_sentences.insert(a.removed_sentences.begin(), a.removed_sentences.end());
    if (a.kind == ActionKind::eliminate_sentence || a.kind == ActionKind::prune_edge) {
      for (std::size_t id : a.triplet_ids) dropped.at(id) = true;
    }
  }
  std::set<std::string> surviving;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (dropped[i] || removed_sentences.count(ts[i].sentence_index)) continue;
    surviving.insert(ts[i].subject.canonical);
    surviving.insert(ts[i].object.canonical);
  }
  std::size_t eliminated = 0;
  for (const auto& e : entities) eliminated += surviving.count(e) ? 0 : 1;
  return static_cast<double>(eliminated) / static_cast<double>(entities.size());
}

CorrectionReport correct(std::string_view generated, const KnowledgeGraph& context,
                         const EntityMatcher& matcher, const CorrectorConfig& cfg) {
  if (&matcher.graph() != &context) throw Error("matcher was built over a different graph");

  CorrectionReport report;
  report.original = std::string(generated);
  report.sentences = split_sentences(generated, cfg.splitter);
  report.generated_triplets = extract_triplets(report.sentences, cfg.rules);
  const auto& sentences = report.sentences;
  const auto& gen = report.generated_triplets;

  const RealizationIndex realizations = index_realizations(context);

  // Group triplets into units, sentence by sentence.
  std::vector<std::vector<Unit>> units(sentences.size());
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const Triplet& t = gen[i];
    auto& su = units[t.sentence_index];
    bool joins = t.list_group && !su.empty() && su.back().is_list &&
                 gen[su.back().ids.front()].list_group == t.list_group;
    if (joins) {
      su.back().ids.push_back(i);
    } else {
      su.push_back(Unit{t.sentence_index, {i}, t.list_group.has_value()});
    }
  }

  std::vector<UnitState> states;
  std::vector<CorrectionAction> actions;

  for (std::size_t si = 0; si < sentences.size(); ++si) {
    const Sentence& sentence = sentences[si];
    if (units[si].empty()) {
      if (cfg.strict) {
        CorrectionAction a;
        a.kind = ActionKind::eliminate_sentence;
        a.sentence_index = si;
        a.reason = "no extractable triplet";
        a.removed_sentences = {si};
        actions.push_back(std::move(a));
      }
      continue;
    }

    std::vector<CorrectionAction> sentence_actions;
    std::vector<UnitState> sentence_states;
    bool remove_sentence = false;

    for (const Unit& unit : units[si]) {
      const Triplet& head = gen[unit.ids.front()];
      MatchResult subject_match = matcher.match(head.subject);
      report.match_log.push_back(subject_match);

      auto eliminate = [&](std::string reason) {
        CorrectionAction a;
        a.kind = ActionKind::eliminate_sentence;
        a.triplet_ids = unit.ids;
        a.sentence_index = si;
        a.reason = std::move(reason);
        sentence_actions.push_back(std::move(a));
        remove_sentence = true;
      };

      if (!subject_match.matched) {
        eliminate("subject not found in context");
        continue;
      }
      const std::string& subject = *subject_match.matched;
      const std::string relation = normalize_relation(head.relation);

      std::vector<Item> gen_items;
      std::set<std::string> gen_set;
      for (std::size_t id : unit.ids) {
        MatchResult m = matcher.match_lexical(gen[id].object.surface);
        std::string key = m.matched ? *m.matched : gen[id].object.canonical;
        gen_items.push_back(Item{key, gen[id].object.surface, id});
        gen_set.insert(key);
      }

      static const std::vector<Realization> kNoRealizations;
      auto rit = realizations.find(subject);
      const auto& reals = rit == realizations.end() ? kNoRealizations : rit->second;
      std::vector<const Realization*> same_rel;
      std::set<std::string> same_rel_objects;
      for (const auto& r : reals) {
        if (r.relation != relation) continue;
        same_rel.push_back(&r);
        same_rel_objects.insert(r.objects.begin(), r.objects.end());
      }

      UnitState st;
      st.subject_key = subject;
      st.subject_surface = context.find(subject)->mentions.front();
      st.relation = relation;
      st.phrase_span = to_doc(sentence, head.object_phrase_span);
      st.confidence = head.confidence;
      st.sentence = si;
      st.ids = unit.ids;
      st.items = gen_items;

      CorrectionAction a;
      a.triplet_ids = unit.ids;
      a.sentence_index = si;
      std::vector<CorrectionAction> extra;

      if (!same_rel.empty()) {
        const Realization* exact = nullptr;
        for (const auto* r : same_rel) {
          if (r->object_set() == gen_set) {
            exact = r;
            break;
          }
        }
        bool subset = std::includes(same_rel_objects.begin(), same_rel_objects.end(),
                                    gen_set.begin(), gen_set.end());
        const Realization* best = same_rel.front();
        std::vector<Item> verified_items;
        for (const auto& item : gen_items) {
          if (same_rel_objects.count(item.key)) verified_items.push_back(item);
        }

        if (exact || subset) {
          a.kind = ActionKind::keep;
          if (exact) a.source_triplet = exact->first_triplet;
        } else if (unit.is_list && best->objects.size() == 1 && !verified_items.empty()) {
          // Drop the unsupported conjuncts, keep the rest of the sentence.
          a.kind = ActionKind::keep;
          std::vector<std::size_t> kept_ids, cut_ids;
          for (const auto& item : gen_items) {
            (same_rel_objects.count(item.key) ? kept_ids : cut_ids).push_back(item.triplet);
          }
          a.triplet_ids = kept_ids;
          CorrectionAction cut;
          cut.kind = ActionKind::eliminate_sentence;
          cut.triplet_ids = cut_ids;
          cut.sentence_index = si;
          cut.reason = "list item not found in context";
          cut.old_text = head.object_phrase;
          cut.new_text = join_items(verified_items);
          cut.edits.push_back(TextEdit{st.phrase_span, cut.new_text});
          extra.push_back(std::move(cut));
          st.items = verified_items;
        } else {
          a.kind = ActionKind::replace_object;
          a.old_text = head.object_phrase;
          a.new_text = best->phrase;
          a.source_triplet = best->first_triplet;
          a.edits.push_back(TextEdit{st.phrase_span, best->phrase});
          st.items.clear();
          for (std::size_t k = 0; k < best->objects.size(); ++k)
            st.items.push_back(Item{best->objects[k], best->object_surfaces[k], kNone});
          st.items_from_text = false;
        }
      } else {
        const Realization* alt = nullptr;
        for (const auto& r : reals) {
          if (r.object_set() == gen_set) {
            alt = &r;
            break;
          }
        }
        if (!alt) {
          eliminate("no context triplet supports this assertion");
          continue;
        }
        a.kind = ActionKind::replace_relation;
        a.old_text = head.relation;
        a.new_text = alt->relation_surface;
        a.source_triplet = alt->first_triplet;
        a.edits.push_back(TextEdit{to_doc(sentence, head.relation_span), alt->relation_surface});
        st.relation = alt->relation;
      }

      bool lexical = subject_match.tier == MatchTier::exact ||
                     subject_match.tier == MatchTier::normalized;
      if (!lexical && st.subject_surface != head.subject.surface) {
        a.subject_rewrite = st.subject_surface;
        a.edits.push_back(TextEdit{to_doc(sentence, head.subject.span), st.subject_surface});
      }
      st.survived = true;
      sentence_actions.push_back(std::move(a));
      for (auto& e : extra) sentence_actions.push_back(std::move(e));
      sentence_states.push_back(std::move(st));
    }

    if (remove_sentence) {
      // The sentence goes as a whole; every unit in it is eliminated.
      CorrectionAction a;
      a.kind = ActionKind::eliminate_sentence;
      a.sentence_index = si;
      a.removed_sentences = {si};
      for (const auto& prior : sentence_actions) {
        if (a.reason.empty() && !prior.reason.empty()) a.reason = prior.reason;
        a.triplet_ids.insert(a.triplet_ids.end(), prior.triplet_ids.begin(), prior.triplet_ids.end());
      }
      std::sort(a.triplet_ids.begin(), a.triplet_ids.end());
      actions.push_back(std::move(a));
      continue;
    }
    for (auto& a : sentence_actions) actions.push_back(std::move(a));
    for (auto& s : sentence_states) states.push_back(std::move(s));
  }

  // Verified subgraph of G over every entity the surviving assertions touch.
  std::set<std::string> verified;
  for (const auto& st : states) {
    verified.insert(st.subject_key);
    for (const auto& item : st.items) {
      if (context.contains(item.key)) verified.insert(item.key);
    }
  }
  report.verified_graph = verified_subgraph(context, verified);

  // Graph of the corrected assertions; prune redundant edges until it is a
  // spanning forest.
  std::vector<Triplet> assertions;
  std::vector<std::pair<std::size_t, std::size_t>> assertion_origin;  // (state, item)
  for (std::size_t s = 0; s < states.size(); ++s) {
    const auto& st = states[s];
    for (std::size_t k = 0; k < st.items.size(); ++k) {
      Triplet t;
      t.subject = EntityMention{st.subject_surface, st.subject_key, {}};
      t.relation = st.relation;
      t.object = EntityMention{st.items[k].surface, st.items[k].key, {}};
      t.sentence_index = st.sentence;
      t.confidence = st.items[k].triplet != kNone ? gen[st.items[k].triplet].confidence : st.confidence;
      assertions.push_back(std::move(t));
      assertion_origin.emplace_back(s, k);
    }
  }
  KnowledgeGraph asserted = build_graph(assertions, GraphOrigin::generated);
  if (!find_cycles(asserted).empty()) {
    KnowledgeGraph forest = minimum_spanning_tree(asserted);
    std::set<std::tuple<std::string, std::string, std::string>> kept_edges;
    for (const auto& e : forest.edges()) kept_edges.emplace(e.u, e.v, e.relation);

    std::vector<std::vector<bool>> item_alive(states.size());
    for (std::size_t s = 0; s < states.size(); ++s) item_alive[s].assign(states[s].items.size(), true);

    for (const auto& edge : asserted.edges()) {
      if (kept_edges.count({edge.u, edge.v, edge.relation})) continue;
      CorrectionAction a;
      a.kind = ActionKind::prune_edge;
      a.pruned_edge = edge;
      a.reason = "edge closes a cycle among verified assertions";
      std::set<std::size_t> touched;
      for (std::size_t src : edge.sources) {
        auto [s, k] = assertion_origin[src];
        item_alive[s][k] = false;
        touched.insert(s);
        if (a.sentence_index == kNoSentence) a.sentence_index = states[s].sentence;
      }
      for (std::size_t s : touched) {
        const auto& st = states[s];
        std::vector<Item> remaining;
        for (std::size_t k = 0; k < st.items.size(); ++k) {
          if (item_alive[s][k]) {
            remaining.push_back(st.items[k]);
          } else if (st.items[k].triplet != kNone) {
            a.triplet_ids.push_back(st.items[k].triplet);
          }
        }
        if (remaining.empty()) {
          a.removed_sentences.push_back(st.sentence);
          a.triplet_ids.insert(a.triplet_ids.end(), st.ids.begin(), st.ids.end());
        } else {
          a.edits.push_back(TextEdit{st.phrase_span, join_items(remaining)});
        }
      }
      std::sort(a.triplet_ids.begin(), a.triplet_ids.end());
      a.triplet_ids.erase(std::unique(a.triplet_ids.begin(), a.triplet_ids.end()), a.triplet_ids.end());
      actions.push_back(std::move(a));
    }
  }

  report.actions = std::move(actions);
  report.corrected = apply_edits(report.original, report.sentences, report.actions);
  report.eliminated_entity_rate = eliminated_entity_rate(report);
  return report;
}

std::string select_salient_sentences(std::string_view article, std::size_t budget,
                                     const SplitterConfig& splitter, const ExtractionRules& rules) {
  if (budget == 0) throw Error("budget must be at least 1");
  std::vector<Sentence> sentences = split_sentences(article, splitter);
  if (sentences.empty()) return "";
  std::vector<Triplet> triplets = extract_triplets(sentences, rules);

  std::vector<bool> keep(sentences.size(), false);
  std::size_t chosen = 0;
  if (triplets.empty()) {
    for (std::size_t i = 0; i < sentences.size() && chosen < budget; ++i, ++chosen) keep[i] = true;
  } else {
    // subject -> sentences it is the subject of, in order; ranking by count,
    // earlier first appearance wins ties.
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<std::size_t>> by_subject;
    for (const auto& t : triplets) {
      auto& list = by_subject[t.subject.canonical];
      if (list.empty()) order.push_back(t.subject.canonical);
      if (list.empty() || list.back() != t.sentence_index) list.push_back(t.sentence_index);
    }
    std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
      return by_subject[a].size() > by_subject[b].size();
    });
    for (const auto& subject : order) {
      for (std::size_t s : by_subject[subject]) {
        if (chosen == budget) break;
        if (!keep[s]) {
          keep[s] = true;
          ++chosen;
        }
      }
      if (chosen == budget) break;
    }
  }
  std::vector<std::string> texts;
  for (const auto& s : sentences) texts.push_back(s.text);
  return join_kept(article, sentences, texts, keep);
}

std::string report_to_json(const CorrectionReport& report, bool pretty) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["original"] = report.original;
  j["corrected"] = report.corrected;
  ordered_json actions = ordered_json::array();
  for (const auto& a : report.actions) {
    ordered_json ja;
    ja["kind"] = to_string(a.kind);
    ja["triplet_ids"] = a.triplet_ids;
    if (a.sentence_index != kNoSentence) ja["sentence_index"] = a.sentence_index;
    if (!a.triplet_ids.empty()) {
      ordered_json ts = ordered_json::array();
      for (std::size_t id : a.triplet_ids) {
        const Triplet& t = report.generated_triplets.at(id);
        ts.push_back({t.subject.surface, t.relation, t.object.surface});
      }
      ja["triplets"] = ts;
    }
    if (!a.old_text.empty() || !a.new_text.empty()) {
      ja["old"] = a.old_text;
      ja["new"] = a.new_text;
    }
    if (a.source_triplet) ja["source_triplet"] = *a.source_triplet;
    if (a.subject_rewrite) ja["subject_rewrite"] = *a.subject_rewrite;
    if (!a.reason.empty()) ja["reason"] = a.reason;
    if (a.pruned_edge) {
      ja["edge"] = {{"endpoints", {a.pruned_edge->u, a.pruned_edge->v}},
                    {"relation", a.pruned_edge->relation},
                    {"weight", a.pruned_edge->weight}};
    }
    if (!a.removed_sentences.empty()) ja["removed_sentences"] = a.removed_sentences;
    if (!a.edits.empty()) {
      ordered_json edits = ordered_json::array();
      for (const auto& e : a.edits)
        edits.push_back({{"begin", e.span.begin}, {"end", e.span.end}, {"text", e.replacement}});
      ja["edits"] = edits;
    }
    actions.push_back(std::move(ja));
  }
  j["actions"] = std::move(actions);
  j["eliminated_entity_rate"] = report.eliminated_entity_rate;
  ordered_json log = ordered_json::array();
  for (const auto& m : report.match_log) {
    ordered_json jm;
    jm["query"] = m.query;
    jm["matched"] = m.matched ? ordered_json(*m.matched) : ordered_json(nullptr);
    jm["score"] = m.score;
    jm["tier"] = to_string(m.tier);
    log.push_back(std::move(jm));
  }
  j["match_log"] = std::move(log);
  return pretty ? j.dump(2) : j.dump();
}

}  // namespace kgv
