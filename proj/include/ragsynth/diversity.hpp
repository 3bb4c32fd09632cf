#pragma once

// Diversity stage: k-means over chunk embeddings, elbow selection of k from
// mean intra-cluster distance, and nearest-to-centroid representative sampling.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "ragsynth/corpus.hpp"
#include "ragsynth/detail/concurrency.hpp"
#include "ragsynth/embedding.hpp"
#include "ragsynth/error.hpp"

namespace ragsynth {

struct ClusteringResult {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  /// Inertia after every assignment step, against the centroids used for it.
  std::vector<double> inertia_trace;
};

struct DiverseSample {
  Chunk chunk;
  std::size_t cluster = 0;
  double distance_to_centroid = 0.0;
  std::size_t input_index = 0;
};

inline std::size_t count_distinct(std::span<const EmbeddingVector> vectors) {
  std::vector<std::span<const double>> views;
  views.reserve(vectors.size());
  for (const auto& v : vectors) views.push_back(v.values());
  const auto less = [](std::span<const double> a, std::span<const double> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  };
  std::sort(views.begin(), views.end(), less);
  const auto eq = [](std::span<const double> a, std::span<const double> b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
  };
  return static_cast<std::size_t>(std::unique(views.begin(), views.end(), eq) - views.begin());
}

namespace detail {

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline std::size_t nearest(std::span<const double> x, const std::vector<std::vector<double>>& centroids,
                           double& best) {
  std::size_t arg = 0;
  best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(x, centroids[c]);
    if (d < best) {
      best = d;
      arg = c;
    }
  }
  return arg;
}

inline std::vector<std::vector<double>> kmeanspp_init(std::span<const EmbeddingVector> xs,
                                                       std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = xs.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);
  const auto first = std::min(n - 1, static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(n)));
  centroids.emplace_back(xs[first].values().begin(), xs[first].values().end());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(xs[i].values(), centroids[0]);
  while (centroids.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    const double target = unit_draw(rng) * total;
    std::size_t pick = n;
    double cum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      cum += d2[i];
      pick = i;
      if (cum > target) break;
    }
    centroids.emplace_back(xs[pick].values().begin(), xs[pick].values().end());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(xs[i].values(), centroids.back()));
    }
  }
  return centroids;
}

// Single-point move (Hartigan criterion) that lowers inertia the most for the
// lowest-index point that has one. Moving x from A to B changes inertia by
// |B|/(|B|+1) d(x,cB)^2 - |A|/(|A|-1) d(x,cA)^2. Returns false at a local optimum.
inline bool improving_move(std::span<const EmbeddingVector> xs, const std::vector<std::vector<double>>& centroids,
                           const std::vector<std::size_t>& sizes, std::vector<std::size_t>& assignments) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::size_t a = assignments[i];
    if (sizes[a] < 2) continue;
    const double na = static_cast<double>(sizes[a]);
    const double remove = na / (na - 1.0) * squared_distance(xs[i].values(), centroids[a]);
    std::size_t to = a;
    double best = remove;
    for (std::size_t b = 0; b < centroids.size(); ++b) {
      if (b == a) continue;
      const double nb = static_cast<double>(sizes[b]);
      const double add = nb / (nb + 1.0) * squared_distance(xs[i].values(), centroids[b]);
      if (add < best) {
        best = add;
        to = b;
      }
    }
    if (to != a && remove - best > 1e-12 * std::max(1.0, remove)) {
      assignments[i] = to;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Deterministic in (vectors, k, seed).
/// When an assignment step changes nothing, a single improving point move is
/// tried before declaring convergence, which lets Lloyd escape fixed points
/// such as the three-against-one split of a square. Stops after max_iter
/// update steps. Nearest-centroid ties go to the lower index.
inline ClusteringResult kmeans(std::span<const EmbeddingVector> vectors, std::size_t k,
                               std::uint64_t seed, std::size_t max_iter = 300) {
  if (vectors.empty()) throw InvalidArgument("kmeans: empty input");
  if (k == 0) throw InvalidArgument("kmeans: k must be >= 1");
  if (max_iter == 0) throw InvalidArgument("kmeans: max_iter must be >= 1");
  const std::size_t dim = vectors.front().dim();
  for (const auto& v : vectors) {
    if (v.dim() != dim) throw DimensionMismatch(dim, v.dim());
  }
  const std::size_t distinct = count_distinct(vectors);
  if (k > distinct) {
    throw InvalidArgument("kmeans: k=" + std::to_string(k) + " exceeds " +
                          std::to_string(distinct) + " distinct vectors");
  }

  const std::size_t n = vectors.size();
  std::mt19937_64 rng(seed);
  ClusteringResult r;
  r.k = k;
  r.centroids = detail::kmeanspp_init(vectors, k, rng);
  r.assignments.assign(n, k);  // sentinel: nothing assigned yet
  std::vector<double> dist(n);

  for (std::size_t iter = 0;; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = detail::nearest(vectors[i].values(), r.centroids, dist[i]);
      changed |= (c != r.assignments[i]);
      r.assignments[i] = c;
      inertia += dist[i];
    }
    r.inertia_trace.push_back(inertia);
    r.inertia = inertia;
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : r.assignments) ++sizes[a];
    if (iter == max_iter ||
        (!changed && !(iter > 0 && detail::improving_move(vectors, r.centroids, sizes, r.assignments)))) {
      r.iterations = std::max<std::size_t>(1, iter);
      break;
    }
    if (!changed) {
      sizes.assign(k, 0);
      for (auto a : r.assignments) ++sizes[a];
    }

    // Empty-cluster repair: move the farthest member of the largest cluster.
    for (std::size_t empty = 0; empty < k; ++empty) {
      if (sizes[empty] != 0) continue;
      const auto largest = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) -
                                                    sizes.begin());
      std::size_t victim = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (r.assignments[i] == largest && (victim == n || dist[i] > dist[victim])) victim = i;
      }
      if (victim == n || dist[victim] <= 0.0) {
        // Largest cluster is a single repeated point; take the globally farthest
        // point among clusters that still have more than one member.
        victim = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (sizes[r.assignments[i]] > 1 && dist[i] > 0.0 && (victim == n || dist[i] > dist[victim])) {
            victim = i;
          }
        }
      }
      if (victim == n) throw Error("kmeans: cannot repair empty cluster");
      --sizes[r.assignments[victim]];
      r.assignments[victim] = empty;
      dist[victim] = 0.0;
      ++sizes[empty];
    }

    for (auto& c : r.centroids) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = r.centroids[r.assignments[i]];
      const auto x = vectors[i].values();
      for (std::size_t d = 0; d < dim; ++d) c[d] += x[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (double& v : r.centroids[c]) v /= static_cast<double>(sizes[c]);
    }
  }
  return r;
}

struct ElbowScores {
  std::size_t k_min = 0;
  /// Mean intra-cluster distance (inertia / n) for k = k_min + i.
  std::vector<double> mean_intra;
  std::size_t best_k = 0;
};

/// Runs kmeans for every k in [k_min, k_max] (concurrently) and picks the elbow:
/// argmax over interior k of W(k-1) - 2W(k) + W(k+1), smaller k on ties.
inline ElbowScores elbow_scores(std::span<const EmbeddingVector> vectors, std::size_t k_min,
                                std::size_t k_max, std::uint64_t seed, std::size_t max_iter = 300,
                                std::size_t workers = 0) {
  if (k_min < 1 || k_min > k_max) {
    throw InvalidArgument("select_k: need 1 <= k_min <= k_max");
  }
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  ElbowScores s;
  s.k_min = k_min;
  const auto n = static_cast<double>(vectors.size());
  s.mean_intra = concurrency::ordered_map(k_max - k_min + 1, workers, [&](std::size_t i) {
    return kmeans(vectors, k_min + i, seed, max_iter).inertia / n;
  });
  s.best_k = k_min;
  if (k_max - k_min < 2) return s;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < s.mean_intra.size(); ++i) {
    const double second = s.mean_intra[i - 1] - 2.0 * s.mean_intra[i] + s.mean_intra[i + 1];
    if (second > best) {
      best = second;
      s.best_k = k_min + i;
    }
  }
  return s;
}

inline std::size_t select_k(std::span<const EmbeddingVector> vectors, std::size_t k_min,
                            std::size_t k_max, std::uint64_t seed, std::size_t max_iter = 300) {
  return elbow_scores(vectors, k_min, k_max, seed, max_iter).best_k;
}

/// For each cluster, the `per_cluster` members nearest its centroid (ties by
/// input index). Output ordered by (cluster, distance, input index).
inline std::vector<DiverseSample> select_representatives(const ClusteringResult& result,
                                                         std::span<const EmbeddedChunk> embedded,
                                                         std::size_t per_cluster) {
  if (per_cluster == 0) throw InvalidArgument("per_cluster must be >= 1");
  if (result.assignments.size() != embedded.size()) {
    throw InvalidArgument("assignments (" + std::to_string(result.assignments.size()) +
                          ") not aligned with embedded chunks (" + std::to_string(embedded.size()) + ")");
  }
  std::vector<std::vector<DiverseSample>> by_cluster(result.k);
  for (std::size_t i = 0; i < embedded.size(); ++i) {
    const std::size_t c = result.assignments[i];
    if (c >= result.k) throw InvalidArgument("cluster index out of range");
    by_cluster[c].push_back(DiverseSample{
        embedded[i].chunk, c, euclidean_distance(embedded[i].vector.values(), result.centroids[c]), i});
  }
  std::vector<DiverseSample> out;
  for (auto& members : by_cluster) {
    std::sort(members.begin(), members.end(), [](const DiverseSample& a, const DiverseSample& b) {
      return a.distance_to_centroid != b.distance_to_centroid
                 ? a.distance_to_centroid < b.distance_to_centroid
                 : a.input_index < b.input_index;
    });
    const std::size_t take = std::min(per_cluster, members.size());
    out.insert(out.end(), std::make_move_iterator(members.begin()),
               std::make_move_iterator(members.begin() + static_cast<std::ptrdiff_t>(take)));
  }
  return out;
}

}  // namespace ragsynth
