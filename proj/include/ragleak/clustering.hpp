#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "ragleak/embedding.hpp"
#include "ragleak/rng.hpp"

namespace ragleak {

struct KeywordPoint {
  std::string keyword;
  EmbeddingVector embedding;
};

struct ClusterResult {
  // one label per input point: -1 for noise, otherwise the cluster id;
  // cluster ids are assigned in order of discovery, which follows input order
  std::vector<int> labels;
  std::vector<std::vector<size_t>> members;    // point indices per cluster id
  std::vector<EmbeddingVector> centroids;      // arithmetic mean, not normalized

  size_t cluster_count() const { return members.size(); }
};

namespace detail {

inline EmbeddingVector mean_of(const std::vector<EmbeddingVector>& points,
                               const std::vector<size_t>& idx) {
  EmbeddingVector c;
  c.values.assign(points[idx.front()].dimension(), 0.0);
  for (const size_t i : idx) {
    for (size_t d = 0; d < c.values.size(); ++d) c.values[d] += points[i].values[d];
  }
  for (double& x : c.values) x /= static_cast<double>(idx.size());
  return c;
}

}  // namespace detail

// Classic DBSCAN on Euclidean distance. A point is core when at least
// min_pts points (itself included) lie within eps, boundary inclusive.
// Points are visited in input order and clusters expand breadth-first in
// that same order, so border points join the first core point that reaches
// them and the labeling is fully deterministic.
inline ClusterResult dbscan(const std::vector<EmbeddingVector>& points, double eps,
                            size_t min_pts) {
  if (eps <= 0.0) throw std::invalid_argument("dbscan: eps must be positive");
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");

  const size_t n = points.size();
  ClusterResult result;
  result.labels.assign(n, -1);
  if (n == 0) return result;

  std::vector<std::vector<size_t>> neighborhood(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (l2_distance(points[i], points[j]) <= eps) neighborhood[i].push_back(j);
    }
  }

  std::vector<char> visited(n, 0);
  int next_cluster = 0;
  for (size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    visited[i] = 1;
    if (neighborhood[i].size() < min_pts) continue;  // noise unless claimed later

    const int cluster = next_cluster++;
    result.members.emplace_back();
    result.labels[i] = cluster;
    result.members.back().push_back(i);

    std::deque<size_t> queue(neighborhood[i].begin(), neighborhood[i].end());
    while (!queue.empty()) {
      const size_t j = queue.front();
      queue.pop_front();
      if (result.labels[j] == -1) {  // unclaimed: border or not-yet-visited
        result.labels[j] = cluster;
        result.members.back().push_back(j);
      }
      if (visited[j]) continue;
      visited[j] = 1;
      if (neighborhood[j].size() >= min_pts) {
        queue.insert(queue.end(), neighborhood[j].begin(), neighborhood[j].end());
      }
    }
  }

  result.centroids.reserve(result.members.size());
  for (const auto& idx : result.members) {
    result.centroids.push_back(detail::mean_of(points, idx));
  }
  return result;
}

// A topic anchor: a representative keyword, its position in embedding space,
// the mass of the cluster it came from, and how often the attack has picked it.
struct Anchor {
  std::string keyword;
  EmbeddingVector embedding;
  double weight = 0.0;
  uint64_t selection_count = 0;
};

// One anchor per cluster: the member nearest the centroid (alphabetical
// keyword on distance ties), weighted by cluster size over the total point
// count. Noise points dilute every weight but produce no anchor, so weights
// sum to 1 - noise_fraction.
inline std::vector<Anchor> derive_anchors(const std::vector<KeywordPoint>& points,
                                          const ClusterResult& clusters) {
  if (clusters.labels.size() != points.size())
    throw std::invalid_argument("derive_anchors: labels do not match points");
  std::vector<Anchor> anchors;
  const double total = static_cast<double>(points.size());
  for (size_t c = 0; c < clusters.cluster_count(); ++c) {
    const auto& member_idx = clusters.members[c];
    size_t best = member_idx.front();
    double best_dist = l2_distance(points[best].embedding, clusters.centroids[c]);
    for (const size_t i : member_idx) {
      const double dist = l2_distance(points[i].embedding, clusters.centroids[c]);
      if (dist < best_dist - 1e-12 ||
          (std::abs(dist - best_dist) <= 1e-12 &&
           points[i].keyword < points[best].keyword)) {
        best = i;
        best_dist = dist;
      }
    }
    Anchor a;
    a.keyword = points[best].keyword;
    a.embedding = points[best].embedding;
    a.weight = static_cast<double>(member_idx.size()) / total;
    a.selection_count = 0;
    anchors.push_back(std::move(a));
  }
  return anchors;
}

// Probability distribution over anchors, kept in anchor-list order.
struct TopicDistribution {
  std::vector<std::pair<std::string, double>> entries;  // (keyword, probability)

  size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

inline std::vector<double> softmax(const std::vector<double>& scores,
                                   double temperature = 1.0) {
  if (temperature <= 0.0) throw std::invalid_argument("softmax: temperature must be > 0");
  std::vector<double> out(scores.size(), 0.0);
  if (scores.empty()) return out;
  double max_score = scores.front();
  for (const double s : scores) max_score = std::max(max_score, s);
  double total = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - max_score) / temperature);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

// Lloyd's algorithm with k-means++ seeding, at most 100 iterations. Kept for
// ablations; the attack pipeline clusters with dbscan by default.
inline ClusterResult kmeans(const std::vector<EmbeddingVector>& points, size_t k,
                            uint64_t seed) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > points.size()) throw std::invalid_argument("kmeans: k exceeds point count");

  const size_t n = points.size();
  Rng rng(seed);

  // k-means++ seeding: later centers drawn proportionally to squared distance
  std::vector<size_t> centers;
  centers.push_back(rng.uniform_index(n));
  std::vector<double> dist_sq(n, 0.0);
  while (centers.size() < k) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double best = l2_distance(points[i], points[centers[0]]);
      for (size_t c = 1; c < centers.size(); ++c) {
        best = std::min(best, l2_distance(points[i], points[centers[c]]));
      }
      dist_sq[i] = best * best;
      total += dist_sq[i];
    }
    if (total <= 0.0) {
      // all remaining points coincide with a center; fill deterministically
      centers.push_back(centers.size() % n);
      continue;
    }
    double draw = rng.uniform() * total;
    size_t pick = n - 1;
    for (size_t i = 0; i < n; ++i) {
      draw -= dist_sq[i];
      if (draw <= 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(pick);
  }

  std::vector<EmbeddingVector> means;
  means.reserve(k);
  for (const size_t c : centers) means.push_back(points[c]);

  std::vector<int> assignment(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_dist = l2_distance(points[i], means[0]);
      for (size_t c = 1; c < k; ++c) {
        const double dist = l2_distance(points[i], means[c]);
        if (dist < best_dist) {
          best_dist = dist;
          best = static_cast<int>(c);
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (size_t c = 0; c < k; ++c) {
      std::vector<size_t> idx;
      for (size_t i = 0; i < n; ++i) {
        if (assignment[i] == static_cast<int>(c)) idx.push_back(i);
      }
      if (!idx.empty()) means[c] = detail::mean_of(points, idx);
    }
  }

  ClusterResult result;
  result.labels = assignment;
  result.members.assign(k, {});
  for (size_t i = 0; i < n; ++i) {
    result.members[static_cast<size_t>(assignment[i])].push_back(i);
  }
  result.centroids = std::move(means);
  return result;
}

}  // namespace ragleak
