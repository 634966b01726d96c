#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kgv/kgraph.hpp"
#include "kgv/matching.hpp"
#include "kgv/triplets.hpp"

namespace kgv {

inline constexpr std::uint32_t kStoreVersion = 1;

// Persisted triplets plus the embedding index over their entities. Triplets
// are kept in record form (provenance ingested, no spans) so a store equals
// its own reload.
struct TripletStore {
  std::uint32_t version = kStoreVersion;
  std::vector<Triplet> triplets;
  VectorIndex index;

  friend bool operator==(const TripletStore& a, const TripletStore& b) {
    return a.version == b.version && a.triplets == b.triplets && a.index == b.index;
  }
};

// Converts `triplets` to record form and indexes every entity of their graph.
TripletStore make_store(const std::vector<Triplet>& triplets, const Embedder& embedder);

// "KTST", u32 version, u64 length + triplet records, then the index block.
void save_store(const TripletStore& store, std::ostream& out);
void save_store(const TripletStore& store, const std::filesystem::path& path);
// Throws FormatError with the byte offset on bad magic, version mismatch,
// truncation or a malformed section.
TripletStore load_store(std::istream& in);
TripletStore load_store(const std::filesystem::path& path);

struct ContextBundle {
  std::string id;
  std::string prompt;
  std::string rag_context;
  std::string guided_context;
  KnowledgeGraph graph;  // over guided_context plus store triplets
  std::shared_ptr<const VectorIndex> index;
  std::vector<Triplet> store_triplets;
};

struct AssembleOptions {
  std::string id;
  SplitterConfig splitter = SplitterConfig::defaults();
  ExtractionRules rules = ExtractionRules::defaults();
};

// rag_context = rag_results joined by "\n". The graph holds the triplets
// extracted from it followed by the store's; the index is the store's,
// extended with the new entities. Throws kgv::Error "no grounding source"
// when both are empty.
ContextBundle assemble(std::string_view prompt, const std::vector<std::string>& rag_results,
                       const TripletStore* store, const Embedder& embedder,
                       const AssembleOptions& options = {});

// Next splitmix64 output; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

// `count` distinct pool positions in draw order (partial Fisher-Yates driven
// by splitmix64 from `seed`). Throws kgv::Error when count > pool_size.
std::vector<std::size_t> select_distractors(std::size_t pool_size, std::size_t count,
                                            std::uint64_t seed);

// guided_context = rag_context + "\n" + the selected distractors joined by
// "\n"; the graph and index are rebuilt over it. count 0 leaves
// guided_context equal to rag_context.
ContextBundle augment(const ContextBundle& bundle, const std::vector<std::string>& distractor_pool,
                      std::size_t count, std::uint64_t seed, const Embedder& embedder,
                      const AssembleOptions& options = {});

// {"id", "prompt", "rag_context", "guided_context"} on one line.
std::string export_bundle(const ContextBundle& bundle);

}  // namespace kgv
