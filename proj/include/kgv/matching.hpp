#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgv/endpoint.hpp"
#include "kgv/kgraph.hpp"
#include "kgv/normalize.hpp"
#include "kgv/triplets.hpp"

namespace kgv {

inline constexpr std::size_t kDefaultDimension = 256;

// Unit-length float vector.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  // L2-normalizes `values`. Throws kgv::Error on an empty or all-zero input.
  static EmbeddingVector normalized(std::span<const double> values);
  // Accepts already-normalized values; throws if |norm - 1| > 1e-6.
  static EmbeddingVector from_unit(std::vector<float> values);

  std::size_t dimension() const { return values_.size(); }
  std::span<const float> values() const { return values_; }
  double norm() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<float> values_;
};

// Dot product of two unit vectors clamped to [-1, 1]. Throws kgv::Error on a
// dimension mismatch.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Throws kgv::Error on empty input.
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
};

// Signed feature hashing of character 3-grams. Each whitespace token of the
// lowercased text is padded with one space on each side before n-gramming.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dimension = kDefaultDimension);
  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const override { return dimension_; }

 private:
  std::size_t dimension_;
};

// OpenAI-style /embeddings endpoint: POST {"model", "input"} and read
// data[0].embedding. Failures surface as EndpointError with attempt counts.
class ExternalEmbedder final : public Embedder {
 public:
  ExternalEmbedder(EndpointConfig cfg, std::size_t dimension,
                   std::shared_ptr<Transport> transport = nullptr);
  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const override { return dimension_; }

 private:
  EndpointConfig cfg_;
  std::size_t dimension_;
  std::shared_ptr<Transport> transport_;
};

// Flat exact-search cosine index. Const member functions may be called
// concurrently; mutation requires exclusive access.
class VectorIndex {
 public:
  explicit VectorIndex(std::size_t dimension = kDefaultDimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  bool contains(std::string_view key) const;
  const EmbeddingVector* find(std::string_view key) const;
  // Keys in insertion order.
  const std::vector<std::string>& keys() const { return keys_; }
  std::size_t overwrites() const { return overwrites_; }

  // Returns true when an existing key was overwritten. Throws kgv::Error on a
  // dimension mismatch.
  bool add(const std::string& key, const EmbeddingVector& v);

  // min(k, size()) results by descending score; equal scores ordered by key.
  // Throws kgv::Error when k == 0 or on a dimension mismatch.
  std::vector<std::pair<std::string, double>> query(const EmbeddingVector& v, std::size_t k) const;

  void save(std::ostream& out) const;
  // Validates magic, version and vector norms. Throws FormatError naming the
  // byte offset of the first problem, counted from `base_offset`.
  static VectorIndex load(std::istream& in, std::size_t base_offset = 0);
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

  friend bool operator==(const VectorIndex& a, const VectorIndex& b) {
    return a.dimension_ == b.dimension_ && a.keys_ == b.keys_ && a.vectors_ == b.vectors_;
  }

 private:
  std::size_t dimension_;
  std::vector<std::string> keys_;
  std::vector<EmbeddingVector> vectors_;
  std::unordered_map<std::string, std::size_t> slot_;
  std::size_t overwrites_ = 0;
};

enum class MatchTier { exact, normalized, alias, embedding, none };

std::string_view to_string(MatchTier tier);

struct MatchResult {
  std::string query;
  std::optional<std::string> matched;  // canonical key in G
  double score = 0.0;
  MatchTier tier = MatchTier::none;
};

enum class EmbedderKind { hashing, external };

struct MatcherConfig {
  double threshold = 0.80;
  // normalized alias -> normalized canonical key
  std::map<std::string, std::string> alias_table;
  EmbedderKind embedder = EmbedderKind::hashing;
  std::size_t dimension = kDefaultDimension;

  // Throws kgv::Error when threshold is outside (0, 1].
  void validate() const;
};

// Line-delimited {"alias": ..., "canonical": ...}. Both sides are normalized.
std::map<std::string, std::string> load_alias_table(std::istream& in);
std::map<std::string, std::string> load_alias_table(const std::filesystem::path& path);

// Embeds every node of `graph` under its canonical key.
VectorIndex build_index(const KnowledgeGraph& graph, const Embedder& embedder);

// Tiered entity resolution against one graph. Holds references; the graph,
// index and embedder must outlive the matcher.
class EntityMatcher {
 public:
  EntityMatcher(const KnowledgeGraph& graph, const VectorIndex& index, const Embedder& embedder,
                MatcherConfig cfg);

  // exact surface -> normalized key -> alias -> embedding; first hit wins.
  MatchResult match(std::string_view surface) const;
  MatchResult match(const EntityMention& mention) const { return match(mention.surface); }
  // Same ladder without the embedding tier.
  MatchResult match_lexical(std::string_view surface) const;

  const MatcherConfig& config() const { return cfg_; }
  const KnowledgeGraph& graph() const { return graph_; }

 private:
  const KnowledgeGraph& graph_;
  const VectorIndex& index_;
  const Embedder& embedder_;
  MatcherConfig cfg_;
  std::unordered_map<std::string, std::string> surface_to_key_;
};

MatchResult match_entity(const EntityMention& query, const KnowledgeGraph& graph,
                         const VectorIndex& index, const Embedder& embedder,
                         const MatcherConfig& cfg);

}  // namespace kgv
