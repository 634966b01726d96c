#include "kgv/contextstore.hpp"

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "json.hpp"
#include "kgv/error.hpp"

namespace kgv {

namespace {

constexpr std::string_view kStoreMagic = "KTST";

std::string join_lines(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += '\n';
    out += parts[i];
  }
  return out;
}

std::shared_ptr<const VectorIndex> extend_index(const VectorIndex* base, const KnowledgeGraph& graph,
                                                const Embedder& embedder) {
  auto index = std::make_shared<VectorIndex>(base ? *base : VectorIndex(embedder.dimension()));
  for (const auto& node : graph.nodes()) {
    if (!index->contains(node.canonical)) index->add(node.canonical, embedder.embed(node.canonical));
  }
  return index;
}

KnowledgeGraph graph_over(std::string_view text, const std::vector<Triplet>& store_triplets,
                          const AssembleOptions& options) {
  std::vector<Triplet> all = extract_document(text, options.splitter, options.rules);
  all.insert(all.end(), store_triplets.begin(), store_triplets.end());
  return build_graph(all, GraphOrigin::context);
}

}  // namespace

TripletStore make_store(const std::vector<Triplet>& triplets, const Embedder& embedder) {
  TripletStore store;
  store.triplets = ingest_triplets(serialize_triplets(triplets)).triplets;
  store.index = build_index(build_graph(store.triplets), embedder);
  return store;
}

void save_store(const TripletStore& store, std::ostream& out) {
  bin::put_bytes(out, kStoreMagic);
  bin::put_u32(out, store.version);
  std::string block = serialize_triplets(store.triplets);
  bin::put_u64(out, block.size());
  bin::put_bytes(out, block);
  store.index.save(out);
}

void save_store(const TripletStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  save_store(store, out);
  if (!out) throw Error("write failed: " + path.string());
}

TripletStore load_store(std::istream& in) {
  bin::Reader r(in);
  r.expect_magic(kStoreMagic);
  std::size_t at = r.offset();
  TripletStore store;
  store.version = r.u32("version");
  if (store.version != kStoreVersion)
    throw FormatError(at, "store version " + std::to_string(store.version) + ", expected " +
                              std::to_string(kStoreVersion));
  std::uint64_t len = r.u64("triplet section length");
  std::size_t block_at = r.offset();
  std::string block = r.bytes(static_cast<std::size_t>(len), "triplet section");
  try {
    store.triplets = ingest_triplets(block).triplets;
  } catch (const ParseError& e) {
    throw FormatError(block_at, std::string("triplet section: ") + e.what());
  }
  std::size_t index_at = r.offset();
  store.index = VectorIndex::load(in, index_at);
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(static_cast<std::size_t>(in.tellg()), "trailing bytes after index");

  std::set<std::string> entities;
  for (const auto& t : store.triplets) {
    entities.insert(t.subject.canonical);
    entities.insert(t.object.canonical);
  }
  for (const auto& key : store.index.keys()) {
    if (!entities.count(key))
      throw FormatError(index_at, "index key \"" + key + "\" is not an entity of the store");
  }
  return store;
}

TripletStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read store " + path.string());
  return load_store(in);
}

ContextBundle assemble(std::string_view prompt, const std::vector<std::string>& rag_results,
                       const TripletStore* store, const Embedder& embedder,
                       const AssembleOptions& options) {
  if (rag_results.empty() && store == nullptr) throw Error("no grounding source");
  ContextBundle b;
  b.id = options.id;
  b.prompt = std::string(prompt);
  b.rag_context = join_lines(rag_results);
  b.guided_context = b.rag_context;
  if (store) b.store_triplets = store->triplets;
  b.graph = graph_over(b.guided_context, b.store_triplets, options);
  b.index = extend_index(store ? &store->index : nullptr, b.graph, embedder);
  return b;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<std::size_t> select_distractors(std::size_t pool_size, std::size_t count,
                                            std::uint64_t seed) {
  if (count > pool_size)
    throw Error("cannot draw " + std::to_string(count) + " distractors from a pool of " +
                std::to_string(pool_size));
  std::vector<std::size_t> slots(pool_size);
  std::iota(slots.begin(), slots.end(), 0);
  std::uint64_t state = seed;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(splitmix64(state) % (pool_size - i));
    std::swap(slots[i], slots[j]);
  }
  slots.resize(count);
  return slots;
}

ContextBundle augment(const ContextBundle& bundle, const std::vector<std::string>& distractor_pool,
                      std::size_t count, std::uint64_t seed, const Embedder& embedder,
                      const AssembleOptions& options) {
  std::vector<std::size_t> picks = select_distractors(distractor_pool.size(), count, seed);
  ContextBundle out = bundle;
  out.guided_context = bundle.rag_context;
  for (std::size_t p : picks) out.guided_context += "\n" + distractor_pool[p];
  out.graph = graph_over(out.guided_context, out.store_triplets, options);
  out.index = extend_index(bundle.index.get(), out.graph, embedder);
  return out;
}

std::string export_bundle(const ContextBundle& bundle) {
  nlohmann::ordered_json j;
  j["id"] = bundle.id;
  j["prompt"] = bundle.prompt;
  j["rag_context"] = bundle.rag_context;
  j["guided_context"] = bundle.guided_context;
  return j.dump();
}

}  // namespace kgv
