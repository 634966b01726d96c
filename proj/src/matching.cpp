#include "kgv/matching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "binary_io.hpp"
#include "json.hpp"
#include "kgv/error.hpp"

namespace kgv {

// ---------------------------------------------------------------------------
// Normalization

std::string unicode_lower(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString n = nfc->normalize(u, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  n.toLower(icu::Locale::getRoot());
  std::string out;
  n.toUTF8String(out);
  return out;
}

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_edge_punct(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) && c != '$' && c != '%';
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string normalize_entity(std::string_view surface) {
  std::string s = collapse_whitespace(unicode_lower(surface));
  for (bool changed = true; changed;) {
    changed = false;
    std::size_t b = 0, e = s.size();
    while (b < e && (is_edge_punct(s[b]) || s[b] == ' ')) ++b;
    while (e > b && (is_edge_punct(s[e - 1]) || s[e - 1] == ' ')) --e;
    if (b != 0 || e != s.size()) {
      s = s.substr(b, e - b);
      changed = true;
    }
    for (std::string_view det : {"the ", "a ", "an "}) {
      if (s.size() > det.size() && s.compare(0, det.size(), det) == 0) {
        s.erase(0, det.size());
        changed = true;
        break;
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Vectors

EmbeddingVector EmbeddingVector::normalized(std::span<const double> values) {
  if (values.empty()) throw Error("cannot normalize an empty vector");
  double sq = 0.0;
  for (double v : values) sq += v * v;
  if (!(sq > 0.0) || !std::isfinite(sq)) throw Error("cannot normalize a zero or non-finite vector");
  const double inv = 1.0 / std::sqrt(sq);
  EmbeddingVector out;
  out.values_.reserve(values.size());
  for (double v : values) out.values_.push_back(static_cast<float>(v * inv));
  return out;
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> values) {
  EmbeddingVector out;
  out.values_ = std::move(values);
  if (out.values_.empty() || std::abs(out.norm() - 1.0) > 1e-6)
    throw Error("vector is not unit length");
  return out;
}

double EmbeddingVector::norm() const {
  double sq = 0.0;
  for (float v : values_) sq += static_cast<double>(v) * v;
  return std::sqrt(sq);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw Error("dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                std::to_string(b.dimension()));
  double dot = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) dot += static_cast<double>(av[i]) * bv[i];
  return std::clamp(dot, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Embedders

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw Error("embedding dimension must be positive");
}

EmbeddingVector HashingEmbedder::embed(std::string_view text) const {
  std::string lowered = collapse_whitespace(unicode_lower(text));
  if (lowered.empty()) throw Error("cannot embed an empty string");
  std::vector<double> acc(dimension_, 0.0);
  std::istringstream tokens(lowered);
  std::string tok;
  while (tokens >> tok) {
    std::string padded = " " + tok + " ";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      std::uint64_t h = fnv1a(std::string_view(padded).substr(i, 3));
      std::size_t bucket = h % dimension_;
      acc[bucket] += (mix64(h) >> 63) ? -1.0 : 1.0;
    }
  }
  if (std::all_of(acc.begin(), acc.end(), [](double v) { return v == 0.0; })) {
    // Every n-gram cancelled out; pick a fixed direction.
    acc[fnv1a(lowered) % dimension_] = 1.0;
  }
  return EmbeddingVector::normalized(acc);
}

ExternalEmbedder::ExternalEmbedder(EndpointConfig cfg, std::size_t dimension,
                                   std::shared_ptr<Transport> transport)
    : cfg_(std::move(cfg)), dimension_(dimension), transport_(std::move(transport)) {
  if (!transport_) transport_ = make_http_transport(cfg_);
}

EmbeddingVector ExternalEmbedder::embed(std::string_view text) const {
  if (text.empty()) throw Error("cannot embed an empty string");
  nlohmann::json req = {{"model", cfg_.model}, {"input", std::string(text)}};
  Headers headers{{"Authorization", "Bearer " + read_api_key(cfg_)}};
  RetryOutcome res = post_with_retries(*transport_, cfg_, "/embeddings", req.dump(), headers);
  std::vector<double> values;
  try {
    auto j = nlohmann::json::parse(res.body);
    values = j.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(res.attempts, 200, std::string("malformed embedding reply: ") + e.what());
  }
  if (values.size() != dimension_)
    throw EndpointError(res.attempts, 200,
                        "embedding has dimension " + std::to_string(values.size()) +
                            ", expected " + std::to_string(dimension_));
  return EmbeddingVector::normalized(values);
}

// ---------------------------------------------------------------------------
// Index

bool VectorIndex::contains(std::string_view key) const {
  return slot_.count(std::string(key)) > 0;
}

const EmbeddingVector* VectorIndex::find(std::string_view key) const {
  auto it = slot_.find(std::string(key));
  return it == slot_.end() ? nullptr : &vectors_[it->second];
}

bool VectorIndex::add(const std::string& key, const EmbeddingVector& v) {
  if (v.dimension() != dimension_)
    throw Error("dimension mismatch: index has " + std::to_string(dimension_) + ", vector has " +
                std::to_string(v.dimension()));
  auto [it, inserted] = slot_.emplace(key, keys_.size());
  if (inserted) {
    keys_.push_back(key);
    vectors_.push_back(v);
    return false;
  }
  vectors_[it->second] = v;
  ++overwrites_;
  return true;
}

std::vector<std::pair<std::string, double>> VectorIndex::query(const EmbeddingVector& v,
                                                               std::size_t k) const {
  if (k == 0) throw Error("k must be positive");
  if (keys_.empty()) return {};
  if (v.dimension() != dimension_) throw Error("query dimension mismatch");
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(keys_.size());
  for (std::size_t i = 0; i < keys_.size(); ++i)
    scored.emplace_back(keys_[i], cosine_similarity(vectors_[i], v));
  auto better = [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    better);
  scored.resize(n);
  return scored;
}

namespace {
constexpr std::string_view kIndexMagic = "KGVI";
constexpr std::uint32_t kIndexVersion = 1;
}  // namespace

void VectorIndex::save(std::ostream& out) const {
  bin::put_bytes(out, kIndexMagic);
  bin::put_u32(out, kIndexVersion);
  bin::put_u32(out, static_cast<std::uint32_t>(dimension_));
  bin::put_u32(out, static_cast<std::uint32_t>(keys_.size()));
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    bin::put_u32(out, static_cast<std::uint32_t>(keys_[i].size()));
    bin::put_bytes(out, keys_[i]);
    for (float f : vectors_[i].values()) bin::put_f32(out, f);
  }
}

VectorIndex VectorIndex::load(std::istream& in, std::size_t base_offset) {
  bin::Reader r(in, base_offset);
  r.expect_magic(kIndexMagic);
  std::size_t at = r.offset();
  std::uint32_t version = r.u32("version");
  if (version != kIndexVersion)
    throw FormatError(at, "unsupported index version " + std::to_string(version));
  at = r.offset();
  std::uint32_t dim = r.u32("dimension");
  if (dim == 0) throw FormatError(at, "zero dimension");
  std::uint32_t count = r.u32("count");

  VectorIndex index(dim);
  for (std::uint32_t n = 0; n < count; ++n) {
    std::uint32_t len = r.u32("key length");
    std::string key = r.bytes(len, "key");
    std::size_t vec_at = r.offset();
    std::vector<float> values(dim);
    for (auto& f : values) f = r.f32("vector");
    EmbeddingVector v;
    try {
      v = EmbeddingVector::from_unit(std::move(values));
    } catch (const Error&) {
      throw FormatError(vec_at, "vector for \"" + key + "\" is not unit length");
    }
    if (index.contains(key)) throw FormatError(vec_at, "duplicate key \"" + key + "\"");
    index.add(key, v);
  }
  return index;
}

void VectorIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  save(out);
  if (!out) throw Error("write failed: " + path.string());
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return load(in);
}

// ---------------------------------------------------------------------------
// Matching

std::string_view to_string(MatchTier tier) {
  switch (tier) {
    case MatchTier::exact: return "exact";
    case MatchTier::normalized: return "normalized";
    case MatchTier::alias: return "alias";
    case MatchTier::embedding: return "embedding";
    case MatchTier::none: return "none";
  }
  return "none";
}

void MatcherConfig::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw Error("threshold must be in (0, 1], got " + std::to_string(threshold));
  if (dimension == 0) throw Error("dimension must be positive");
}

std::map<std::string, std::string> load_alias_table(std::istream& in) {
  std::map<std::string, std::string> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      std::string alias = normalize_entity(j.at("alias").get<std::string>());
      std::string canonical = normalize_entity(j.at("canonical").get<std::string>());
      if (alias.empty() || canonical.empty()) throw ParseError(line_no, "empty alias entry");
      table[alias] = canonical;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return table;
}

std::map<std::string, std::string> load_alias_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read alias table " + path.string());
  return load_alias_table(in);
}

VectorIndex build_index(const KnowledgeGraph& graph, const Embedder& embedder) {
  VectorIndex index(embedder.dimension());
  for (const auto& node : graph.nodes()) index.add(node.canonical, embedder.embed(node.canonical));
  return index;
}

EntityMatcher::EntityMatcher(const KnowledgeGraph& graph, const VectorIndex& index,
                             const Embedder& embedder, MatcherConfig cfg)
    : graph_(graph), index_(index), embedder_(embedder), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (index_.dimension() != embedder_.dimension())
    throw Error("index and embedder dimensions differ");
  for (const auto& node : graph_.nodes()) {
    for (const auto& m : node.mentions) surface_to_key_.emplace(m, node.canonical);
  }
}

MatchResult EntityMatcher::match_lexical(std::string_view surface) const {
  MatchResult r;
  r.query = std::string(surface);
  if (auto it = surface_to_key_.find(r.query); it != surface_to_key_.end()) {
    r.matched = it->second;
    r.score = 1.0;
    r.tier = MatchTier::exact;
    return r;
  }
  std::string canonical = normalize_entity(surface);
  if (canonical.empty()) return r;
  if (graph_.contains(canonical)) {
    r.matched = canonical;
    r.score = 1.0;
    r.tier = MatchTier::normalized;
    return r;
  }
  if (auto it = cfg_.alias_table.find(canonical);
      it != cfg_.alias_table.end() && graph_.contains(it->second)) {
    r.matched = it->second;
    r.score = 1.0;
    r.tier = MatchTier::alias;
    return r;
  }
  return r;
}

MatchResult EntityMatcher::match(std::string_view surface) const {
  MatchResult r = match_lexical(surface);
  if (r.tier != MatchTier::none || index_.empty()) return r;
  std::string canonical = normalize_entity(surface);
  if (canonical.empty()) return r;
  EmbeddingVector q = embedder_.embed(canonical);
  // The index may carry keys that are not nodes of this graph; take the best
  // one that is.
  for (const auto& [key, score] : index_.query(q, index_.size())) {
    if (!graph_.contains(key)) continue;
    r.score = score;
    if (score >= cfg_.threshold) {
      r.matched = key;
      r.tier = MatchTier::embedding;
    }
    break;
  }
  return r;
}

MatchResult match_entity(const EntityMention& query, const KnowledgeGraph& graph,
                         const VectorIndex& index, const Embedder& embedder,
                         const MatcherConfig& cfg) {
  return EntityMatcher(graph, index, embedder, cfg).match(query);
}

}  // namespace kgv
