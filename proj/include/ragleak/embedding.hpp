#pragma once

#include <cmath>
#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ragleak {

// Feature-hashed bag-of-ngrams text encoder. One encoder is shared by the
// whole pipeline (store, attack bookkeeping, leak adjudication) so that all
// similarity judgements live in a single geometry.
struct EmbedderConfig {
  int dimension = 256;
  int ngram_max = 2;    // 1 = unigrams only, 2 = unigrams + bigrams
  bool lowercase = true;
  // Bigram features carry reduced weight. Token-order edits (paraphrase
  // shuffles) then move a vector only slightly while unigram content still
  // dominates similarity.
  double bigram_weight = 0.25;
};

inline void validate(const EmbedderConfig& cfg) {
  if (cfg.dimension < 2) throw std::invalid_argument("embedder: dimension must be >= 2");
  if (cfg.ngram_max != 1 && cfg.ngram_max != 2)
    throw std::invalid_argument("embedder: ngram_max must be 1 or 2");
  if (cfg.bigram_weight < 0.0)
    throw std::invalid_argument("embedder: bigram_weight must be >= 0");
}

struct EmbeddingVector {
  std::vector<double> values;
  bool zero = false;  // true when the source text produced no features

  size_t dimension() const { return values.size(); }
};

namespace detail {

// tokens are maximal runs of [A-Za-z0-9]; everything else separates
inline std::vector<std::string> split_tokens(std::string_view text, bool lowercase) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isalnum(uc)) {
      cur.push_back(lowercase ? static_cast<char>(std::tolower(uc)) : ch);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

// Deterministic embedding: hash each unigram (and bigram, joined with a 0x1f
// byte) with 64-bit FNV-1a; the low bit picks the sign, the remaining bits
// pick the bucket; accumulate and L2-normalize. No corpus state, no frequency
// weighting, so the same text always maps to the same unit vector.
inline EmbeddingVector embed(std::string_view text, const EmbedderConfig& cfg = {}) {
  validate(cfg);
  const auto dim = static_cast<size_t>(cfg.dimension);
  EmbeddingVector v;
  v.values.assign(dim, 0.0);

  const std::vector<std::string> toks = detail::split_tokens(text, cfg.lowercase);
  if (toks.empty()) {
    v.zero = true;
    return v;
  }

  const auto add_feature = [&](std::string_view key, double weight) {
    const uint64_t h = detail::fnv1a64(key);
    const double sign = (h & 1ULL) ? 1.0 : -1.0;
    v.values[(h >> 1) % dim] += sign * weight;
  };

  for (const auto& t : toks) add_feature(t, 1.0);
  if (cfg.ngram_max >= 2 && cfg.bigram_weight > 0.0) {
    for (size_t i = 0; i + 1 < toks.size(); ++i) {
      add_feature(toks[i] + '\x1f' + toks[i + 1], cfg.bigram_weight);
    }
  }

  double norm_sq = 0.0;
  for (const double x : v.values) norm_sq += x * x;
  if (norm_sq < 1e-24) {
    // all features cancelled (possible only through hash collisions)
    v.values.assign(dim, 0.0);
    v.zero = true;
    return v;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v.values) x *= inv;
  return v;
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw std::invalid_argument("cosine: dimension mismatch");
  if (a.zero || b.zero) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double l2_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw std::invalid_argument("l2_distance: dimension mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace ragleak
