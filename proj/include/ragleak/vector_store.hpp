#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragleak/embedding.hpp"
#include "ragleak/rng.hpp"

namespace ragleak {

struct ChunkInput {
  size_t id = 0;
  std::string text;
  std::string topic_label;  // optional ground-truth label, never used for ranking
};

struct IndexedChunk {
  size_t id = 0;
  std::string text;
  EmbeddingVector embedding;
  std::string topic_label;
};

struct RetrievalResult {
  std::vector<size_t> chunk_ids;
  std::vector<double> scores;  // cosine against the query, aligned with chunk_ids

  size_t size() const { return chunk_ids.size(); }
};

// Immutable brute-force index: retrieval scans every chunk and ranks by exact
// cosine. No approximate structure, so results depend only on the corpus, the
// query, and the tie rule (lower id wins on equal scores).
class VectorStore {
 public:
  [[nodiscard]] static VectorStore build_index(const std::vector<ChunkInput>& corpus,
                                               const EmbedderConfig& cfg = {}) {
    if (corpus.empty()) throw std::invalid_argument("build_index: corpus is empty");
    VectorStore store;
    store.cfg_ = cfg;
    store.chunks_.reserve(corpus.size());
    for (const auto& in : corpus) {
      if (store.by_id_.count(in.id))
        throw std::invalid_argument("build_index: duplicate chunk id " +
                                    std::to_string(in.id));
      IndexedChunk chunk;
      chunk.id = in.id;
      chunk.text = in.text;
      chunk.embedding = embed(in.text, cfg);
      chunk.topic_label = in.topic_label;
      store.by_id_[in.id] = store.chunks_.size();
      store.chunks_.push_back(std::move(chunk));
    }
    return store;
  }

  const std::vector<IndexedChunk>& chunks() const { return chunks_; }
  const EmbedderConfig& embedder() const { return cfg_; }

  bool contains(size_t id) const { return by_id_.count(id) > 0; }

  const IndexedChunk& chunk_by_id(size_t id) const {
    const auto it = by_id_.find(id);
    if (it == by_id_.end())
      throw std::out_of_range("vector store: unknown chunk id " + std::to_string(id));
    return chunks_[it->second];
  }

  RetrievalResult retrieve_embedded(const EmbeddingVector& query, size_t k,
                                    double threshold) const {
    std::vector<std::pair<double, size_t>> scored;  // (score, id)
    scored.reserve(chunks_.size());
    for (const auto& chunk : chunks_) {
      const double score = cosine(query, chunk.embedding);
      if (score >= threshold) scored.emplace_back(score, chunk.id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    if (scored.size() > k) scored.resize(k);
    RetrievalResult result;
    for (const auto& [score, id] : scored) {
      result.chunk_ids.push_back(id);
      result.scores.push_back(score);
    }
    return result;
  }

  RetrievalResult retrieve(const std::string& query, size_t k, double threshold) const {
    return retrieve_embedded(embed(query, cfg_), k, threshold);
  }

  // Embedding-perturbation defense: independent N(0, sigma^2) noise on every
  // coordinate, then re-normalization so cosine and L2 rankings stay
  // equivalent. sigma = 0 returns an exact copy; zero vectors pass through.
  friend VectorStore apply_gaussian_perturbation(const VectorStore& store, double sigma,
                                                 uint64_t seed) {
    if (sigma < 0.0)
      throw std::invalid_argument("apply_gaussian_perturbation: sigma must be >= 0");
    VectorStore out = store;
    if (sigma == 0.0) return out;
    Rng rng(derive_seed(seed, "store-perturb"));
    for (auto& chunk : out.chunks_) {
      if (chunk.embedding.zero) continue;
      double norm_sq = 0.0;
      for (double& x : chunk.embedding.values) {
        x += sigma * rng.gaussian();
        norm_sq += x * x;
      }
      if (norm_sq < 1e-24) {
        chunk.embedding.values.assign(chunk.embedding.values.size(), 0.0);
        chunk.embedding.zero = true;
        continue;
      }
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (double& x : chunk.embedding.values) x *= inv;
    }
    return out;
  }

 private:
  VectorStore() = default;  // all instances come from build_index

  EmbedderConfig cfg_;
  std::vector<IndexedChunk> chunks_;
  std::unordered_map<size_t, size_t> by_id_;
};

// Maximal-marginal-relevance re-ranking over an existing candidate list. The
// first pick is pure relevance; each later pick maximizes
//   lambda * cos(query, d) - (1 - lambda) * max_{s in selected} cos(d, s).
// Ties fall to the lower chunk id. Reported scores remain the plain query
// cosines, so only retrieve() output is guaranteed score-sorted.
inline RetrievalResult mmr_rerank(const VectorStore& store, const EmbeddingVector& query,
                                  const RetrievalResult& candidates, double lambda,
                                  size_t k) {
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("mmr_rerank: lambda must be in [0, 1]");

  struct Entry {
    size_t id;
    double relevance;
    const EmbeddingVector* vec;
  };
  std::vector<Entry> pool;
  pool.reserve(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& chunk = store.chunk_by_id(candidates.chunk_ids[i]);
    pool.push_back({chunk.id, cosine(query, chunk.embedding), &chunk.embedding});
  }

  RetrievalResult out;
  std::vector<const EmbeddingVector*> selected;
  while (!pool.empty() && out.size() < k) {
    size_t best = 0;
    double best_score = 0.0;
    for (size_t i = 0; i < pool.size(); ++i) {
      double score;
      if (selected.empty()) {
        score = pool[i].relevance;
      } else {
        double max_sim = -2.0;
        for (const auto* s : selected) {
          max_sim = std::max(max_sim, cosine(*pool[i].vec, *s));
        }
        score = lambda * pool[i].relevance - (1.0 - lambda) * max_sim;
      }
      if (i == 0 || score > best_score ||
          (score == best_score && pool[i].id < pool[best].id)) {
        best = i;
        best_score = score;
      }
    }
    out.chunk_ids.push_back(pool[best].id);
    out.scores.push_back(pool[best].relevance);
    selected.push_back(pool[best].vec);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

}  // namespace ragleak
