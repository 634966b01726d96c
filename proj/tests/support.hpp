#pragma once

#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kgv/contextstore.hpp"
#include "kgv/corrector.hpp"
#include "kgv/matching.hpp"

namespace kgv::testing {

inline std::string fixture_path(const std::string& name) { return std::string(KGV_FIXTURE_DIR) + "/" + name; }

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name), std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Context graph, its index and a matcher bundled with stable addresses.
struct Grounding {
  KnowledgeGraph graph;
  HashingEmbedder embedder;
  VectorIndex index;
  std::unique_ptr<EntityMatcher> matcher;

  explicit Grounding(std::string_view context, MatcherConfig cfg = {})
      : graph(build_graph(extract_document(context))), index(build_index(graph, embedder)) {
    matcher = std::make_unique<EntityMatcher>(graph, index, embedder, std::move(cfg));
  }
  Grounding(const Grounding&) = delete;

  CorrectionReport correct(std::string_view generated, const CorrectorConfig& cfg = {}) const {
    return kgv::correct(generated, graph, *matcher, cfg);
  }
};

// Canonical entities of every triplet extracted from `text`.
inline std::set<std::string> entities_of(std::string_view text) {
  std::set<std::string> out;
  for (const auto& t : extract_document(text)) {
    out.insert(t.subject.canonical);
    out.insert(t.object.canonical);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic documents: a product catalogue context and a generated answer that
// mixes grounded, perturbed and invented sentences.

struct SyntheticCase {
  std::string context;
  std::string generated;
  // Distinct generated entities that appear only in invented content.
  std::set<std::string> injected;
  std::set<std::string> generated_entities;

  double injected_fraction() const {
    return generated_entities.empty()
               ? 0.0
               : static_cast<double>(injected.size()) / static_cast<double>(generated_entities.size());
  }
};

class SyntheticCorpus {
 public:
  explicit SyntheticCorpus(std::uint64_t seed) : rng_(seed) {}

  SyntheticCase next() {
    SyntheticCase c;
    std::vector<std::string> ctx, gen;
    const int products = pick(2, 4);
    std::vector<std::string> names = draw_names(kGroundWords, products);
    std::vector<std::string> ghosts = draw_names(kGhostWords, 3);
    int feature_serial = 0;

    for (int p = 0; p < products; ++p) {
      const std::string& name = names[p];
      int price = pick(2, 60);
      std::string price_text = "$" + std::to_string(price) + " dollars per user per month";
      std::vector<std::string> feats;
      for (int f = 0; f < 3; ++f) feats.push_back(feature(p, feature_serial++));
      ctx.push_back(name + " is " + price_text + ".");
      for (const auto& f : feats) ctx.push_back(name + " supports " + f + ".");

      switch (pick(0, 3)) {
        case 0:  // grounded copy
          gen.push_back(name + " is " + price_text + ".");
          break;
        case 1:  // wrong price, fixed by replacement
          gen.push_back(name + " is $" + std::to_string(price + pick(1, 9)) + " dollars per user per month.");
          break;
        case 2:  // partial list, verified
          gen.push_back(name + " supports " + feats[0] + " and " + feats[2] + ".");
          break;
        default: {  // list with an invented item, excised
          std::string invented = "Ghost Item " + std::to_string(pick(100, 999)) + std::to_string(p);
          gen.push_back(name + " supports " + feats[1] + " and " + invented + ".");
          c.injected.insert(normalize_entity(invented));
          break;
        }
      }
    }
    const int invented = pick(0, 2);
    for (int i = 0; i < invented; ++i) {
      std::string object = "$" + std::to_string(pick(2, 90)) + " credits per seat per week";
      gen.push_back(ghosts[i] + " is " + object + ".");
      c.injected.insert(normalize_entity(ghosts[i]));
      c.injected.insert(normalize_entity(object));
    }
    std::shuffle(gen.begin(), gen.end(), rng_);

    c.context = join(ctx);
    c.generated = join(gen);
    c.generated_entities = entities_of(c.generated);
    return c;
  }

 private:
  static constexpr const char* kGroundWords[] = {"Contoso", "Fabrikam", "Northwind", "Tailspin",
                                                 "Litware", "Adatum",   "Proseware", "Woodgrove"};
  static constexpr const char* kGhostWords[] = {"Zebulon", "Quixa", "Vortigen", "Plimbo",
                                                "Grumwald", "Yxtra", "Jubjub",  "Krazzle"};
  static constexpr const char* kSuffixes[] = {"Ledger", "Mail", "Drive", "Vault", "Planner", "Forms"};

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  template <std::size_t N>
  std::vector<std::string> draw_names(const char* const (&words)[N], int count) {
    std::vector<std::string> pool(std::begin(words), std::end(words));
    std::shuffle(pool.begin(), pool.end(), rng_);
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i)
      out.push_back(pool[static_cast<std::size_t>(i)] + " " + kSuffixes[pick(0, 5)] + " " +
                    std::to_string(pick(1, 9)));
    return out;
  }

  static std::string feature(int product, int serial) {
    static constexpr const char* kKinds[] = {"encrypted backup", "audit logging", "shared calendars",
                                             "offline sync",     "custom domains", "guest access"};
    return std::string(kKinds[serial % 6]) + " tier " + std::to_string(product) + std::to_string(serial);
  }

  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : " ") + p;
    return out;
  }

  std::mt19937_64 rng_;
};

// Unconstrained small worlds for property tests: shared objects (cycles),
// relation swaps, unknown entities, sentences without triplets.
struct RandomCase {
  std::string context;
  std::string generated;
};

inline RandomCase random_case(std::mt19937_64& rng) {
  static constexpr const char* kSubjects[] = {"Alpha Suite", "Beta Portal", "Gamma Hub", "Delta Box",
                                              "Omega Desk", "Sigma Cloud"};
  static constexpr const char* kUnknown[] = {"Quasar Widget", "Nimbus Crate", "Pluto Lamp"};
  static constexpr const char* kObjects[] = {"email", "chat", "storage", "$5 dollars", "$9 dollars",
                                             "video calls", "backups", "reports"};
  static constexpr const char* kRelations[] = {"is", "supports", "includes", "offers"};
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto any = [&](const auto& arr) {
    return std::string(arr[pick(0, static_cast<int>(std::size(arr)) - 1)]);
  };
  auto objects = [&](int n) {
    std::vector<std::string> pool(std::begin(kObjects), std::end(kObjects));
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(static_cast<std::size_t>(n));
    if (n == 1) return pool[0];
    if (n == 2) return pool[0] + " and " + pool[1];
    std::string out;
    for (int i = 0; i + 1 < n; ++i) out += pool[static_cast<std::size_t>(i)] + ", ";
    return out + "and " + pool.back();
  };

  RandomCase c;
  const int facts = pick(1, 8);
  for (int i = 0; i < facts; ++i) {
    c.context += (i ? " " : "") + any(kSubjects) + " " + any(kRelations) + " " + objects(pick(1, 3)) + ".";
  }
  const int sentences = pick(1, 6);
  for (int i = 0; i < sentences; ++i) {
    std::string s;
    switch (pick(0, 5)) {
      case 0: s = any(kUnknown) + " " + any(kRelations) + " " + objects(pick(1, 3)) + "."; break;
      case 1: s = "Thanks for asking."; break;
      case 2: s = any(kSubjects) + " " + any(kRelations) + " " + any(kUnknown) + "."; break;
      default: s = any(kSubjects) + " " + any(kRelations) + " " + objects(pick(1, 4)) + "."; break;
    }
    c.generated += (i ? " " : "") + s;
  }
  return c;
}

}  // namespace kgv::testing
