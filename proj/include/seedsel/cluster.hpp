#pragma once

// Divisive hierarchical k-means. Each node with enough members is split by
// k-means (k = branching) and the procedure recurses until the depth budget
// is spent, so a full tree has branching^depth leaves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "seedsel/corpus.hpp"
#include "seedsel/error.hpp"
#include "seedsel/rng.hpp"
#include "seedsel/textpipe.hpp"

namespace seedsel {

struct ClusterParams {
  std::size_t branching = 3;
  std::size_t depth = 5;
  std::size_t max_iterations = 50;
  double convergence_tol = 1e-6;
  std::uint64_t rng_seed = 0;
  std::size_t min_split_size = 6;
  std::size_t restarts = 3;  // k-means runs per node; lowest SSE wins

  void validate() const {
    if (branching < 2) throw ValidationError("branching must be at least 2");
    if (depth < 1) throw ValidationError("depth must be at least 1");
    if (max_iterations < 1) throw ValidationError("max_iterations must be at least 1");
    if (!(convergence_tol >= 0.0)) throw ValidationError("convergence_tol must be nonnegative");
    if (min_split_size < 2) throw ValidationError("min_split_size must be at least 2");
    if (restarts < 1) throw ValidationError("restarts must be at least 1");
  }

  std::size_t target_leaves() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < depth; ++i) n *= branching;
    return n;
  }
};

struct ClusterNode {
  std::vector<double> centroid;
  std::vector<DocIndex> members;  // ascending
  std::vector<std::size_t> children;
  std::size_t level = 0;
};

struct ClusterTree {
  std::vector<ClusterNode> nodes;  // nodes[0] is the root
  std::vector<std::size_t> leaves; // node indices in depth-first order
  std::size_t dimension = 0;
  /// True when every node above the depth limit split into exactly
  /// `branching` children.
  bool complete = true;
  std::size_t lloyd_iterations = 0;

  const ClusterNode& leaf(std::size_t leaf_id) const { return nodes[leaves[leaf_id]]; }
  std::size_t leaf_count() const noexcept { return leaves.size(); }
};

namespace detail {

struct KMeansOutcome {
  std::vector<std::size_t> assignment;  // per local point
  std::vector<std::vector<double>> centroids;
  std::size_t iterations = 0;
  double sse = 0.0;
};

class NodeKMeans {
 public:
  NodeKMeans(std::span<const SparseVector* const> points, std::size_t dim, std::size_t k)
      : points_(points), dim_(dim), k_(k), norms_(points.size()) {
    for (std::size_t i = 0; i < points.size(); ++i) norms_[i] = points[i]->squared_norm();
  }

  /// Returns false when the node cannot be split (fewer than two distinct points).
  bool run(Rng& rng, std::size_t max_iterations, double tol, KMeansOutcome& out) {
    const std::size_t n = points_.size();
    std::vector<std::size_t> seeds;
    if (!seed(rng, seeds)) return false;

    centroids_.assign(seeds.size(), std::vector<double>(dim_, 0.0));
    for (std::size_t c = 0; c < seeds.size(); ++c)
      for (const auto& e : points_[seeds[c]]->entries) centroids_[c][e.column] = e.weight;
    centroid_norms_.assign(seeds.size(), 0.0);
    for (std::size_t c = 0; c < seeds.size(); ++c) centroid_norms_[c] = points_[seeds[c]]->squared_norm();

    assignment_.assign(n, 0);
    distance_.assign(n, 0.0);
    assign();
    repair_empty();
    update();
    double sse = total_sse();
    std::size_t iterations = 1;
    while (iterations < max_iterations) {
      const std::vector<std::size_t> previous = assignment_;
      assign();
      repair_empty();
      update();
      const double next = total_sse();
      ++iterations;
      if (next > sse * (1.0 + 1e-9) + 1e-12)
        throw std::logic_error("k-means within-cluster SSE increased during a Lloyd iteration");
      const bool unchanged = previous == assignment_;
      const double rel = sse > 0.0 ? (sse - next) / sse : 0.0;
      sse = next;
      if (unchanged || rel <= tol) break;
    }
    out.assignment = assignment_;
    out.centroids = centroids_;
    out.iterations = iterations;
    out.sse = sse;
    return true;
  }

 private:
  double distance(std::size_t i, std::size_t c) const {
    const double d = norms_[i] - 2.0 * points_[i]->dot(centroids_[c]) + centroid_norms_[c];
    return d > 0.0 ? d : 0.0;
  }

  double distance_to_point(std::size_t i, std::size_t j) const {
    // ||a - b||^2 via a merge over sorted entries.
    const auto& a = points_[i]->entries;
    const auto& b = points_[j]->entries;
    double s = 0.0;
    std::size_t p = 0, q = 0;
    while (p < a.size() || q < b.size()) {
      if (q == b.size() || (p < a.size() && a[p].column < b[q].column)) {
        s += a[p].weight * a[p].weight;
        ++p;
      } else if (p == a.size() || b[q].column < a[p].column) {
        s += b[q].weight * b[q].weight;
        ++q;
      } else {
        const double d = a[p].weight - b[q].weight;
        s += d * d;
        ++p;
        ++q;
      }
    }
    return s;
  }

  // Greedy k-means++: first centre uniform, then for each further centre
  // several D^2-weighted candidates, keeping the one with the lowest potential.
  bool seed(Rng& rng, std::vector<std::size_t>& seeds) {
    const std::size_t n = points_.size();
    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k_)));
    seeds.push_back(rng.below(n));
    std::vector<double> nearest(n), trial(n), best_trial(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = distance_to_point(i, seeds[0]);
    while (seeds.size() < k_) {
      const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
      if (!(total > 0.0)) break;
      std::size_t pick = n;
      double best_potential = 0.0;
      for (std::size_t t = 0; t < trials; ++t) {
        double target = rng.uniform() * total;
        std::size_t cand = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (nearest[i] <= 0.0) continue;
          cand = i;
          target -= nearest[i];
          if (target < 0.0) break;
        }
        double potential = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          trial[i] = std::min(nearest[i], distance_to_point(i, cand));
          potential += trial[i];
        }
        if (pick == n || potential < best_potential) {
          pick = cand;
          best_potential = potential;
          best_trial.swap(trial);
        }
      }
      seeds.push_back(pick);
      nearest.swap(best_trial);
    }
    return seeds.size() >= 2;
  }

  void assign() {
    const std::size_t kk = centroids_.size();
    for (std::size_t i = 0; i < points_.size(); ++i) {
      std::size_t best = 0;
      double best_d = distance(i, 0);
      for (std::size_t c = 1; c < kk; ++c) {
        const double d = distance(i, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assignment_[i] = best;
      distance_[i] = best_d;
    }
  }

  // An empty cluster takes the point farthest from its own centroid, drawn
  // from clusters that keep at least one member.
  void repair_empty() {
    const std::size_t kk = centroids_.size();
    std::vector<std::size_t> counts(kk, 0);
    for (std::size_t a : assignment_) ++counts[a];
    for (std::size_t c = 0; c < kk; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = points_.size();
      double far_d = 0.0;
      for (std::size_t i = 0; i < points_.size(); ++i) {
        if (counts[assignment_[i]] < 2) continue;
        if (distance_[i] > far_d) {
          far_d = distance_[i];
          far = i;
        }
      }
      if (far == points_.size()) continue;
      --counts[assignment_[far]];
      assignment_[far] = c;
      distance_[far] = 0.0;
      ++counts[c];
    }
  }

  void update() {
    const std::size_t kk = centroids_.size();
    std::vector<std::size_t> counts(kk, 0);
    for (std::size_t a : assignment_) ++counts[a];
    for (std::size_t c = 0; c < kk; ++c)
      if (counts[c] > 0) std::fill(centroids_[c].begin(), centroids_[c].end(), 0.0);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      auto& centroid = centroids_[assignment_[i]];
      for (const auto& e : points_[i]->entries) centroid[e.column] += e.weight;
    }
    for (std::size_t c = 0; c < kk; ++c) {
      if (counts[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[c]);
      double norm = 0.0;
      for (double& v : centroids_[c]) {
        v *= inv;
        norm += v * v;
      }
      centroid_norms_[c] = norm;
    }
  }

  double total_sse() {
    double s = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      distance_[i] = distance(i, assignment_[i]);
      s += distance_[i];
    }
    return s;
  }

  std::span<const SparseVector* const> points_;
  std::size_t dim_;
  std::size_t k_;
  std::vector<double> norms_;
  std::vector<std::vector<double>> centroids_;
  std::vector<double> centroid_norms_;
  std::vector<std::size_t> assignment_;
  std::vector<double> distance_;
};

inline std::vector<double> mean_of(std::span<const DocIndex> members,
                                   std::span<const SparseVector> vectors, std::size_t dim) {
  std::vector<double> c(dim, 0.0);
  if (members.empty()) return c;
  for (DocIndex d : members)
    for (const auto& e : vectors[d].entries) c[e.column] += e.weight;
  const double inv = 1.0 / static_cast<double>(members.size());
  for (double& v : c) v *= inv;
  return c;
}

}  // namespace detail

/// Builds the cluster tree over `members`. `vectors` is indexed by DocIndex
/// and `dimension` is the vocabulary size. Each node seeds its own PRNG
/// stream from (rng_seed, node path), so the result does not depend on the
/// order in which subtrees are built.
inline ClusterTree build_tree(std::span<const DocIndex> members,
                              std::span<const SparseVector> vectors, std::size_t dimension,
                              const ClusterParams& params) {
  params.validate();
  if (members.empty()) throw ValidationError("cannot cluster an empty document set");
  ClusterTree tree;
  tree.dimension = dimension;

  ClusterNode root;
  root.members.assign(members.begin(), members.end());
  std::sort(root.members.begin(), root.members.end());
  root.centroid = detail::mean_of(root.members, vectors, dimension);
  tree.nodes.push_back(std::move(root));

  struct Pending {
    std::size_t node;
    std::uint64_t path;
  };
  std::vector<Pending> stack{{0, 1}};
  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    ClusterNode& node = tree.nodes[job.node];
    if (node.level >= params.depth) continue;
    if (node.members.size() < params.min_split_size) {
      tree.complete = false;
      continue;
    }
    std::vector<const SparseVector*> points;
    points.reserve(node.members.size());
    for (DocIndex d : node.members) points.push_back(&vectors[d]);
    detail::NodeKMeans kmeans(points, dimension, params.branching);
    Rng rng(derive_seed(params.rng_seed, "cluster-node", job.path));
    detail::KMeansOutcome outcome;
    bool split = false;
    for (std::size_t r = 0; r < params.restarts; ++r) {
      detail::KMeansOutcome attempt;
      if (!kmeans.run(rng, params.max_iterations, params.convergence_tol, attempt)) break;
      tree.lloyd_iterations += attempt.iterations;
      if (!split || attempt.sse < outcome.sse) outcome = std::move(attempt);
      split = true;
    }
    if (!split) {
      tree.complete = false;
      continue;
    }

    std::vector<std::vector<DocIndex>> groups(outcome.centroids.size());
    for (std::size_t i = 0; i < node.members.size(); ++i)
      groups[outcome.assignment[i]].push_back(node.members[i]);
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < groups.size(); ++c)
      if (!groups[c].empty()) order.push_back(c);
    // Children ordered by smallest member so tree order is independent of
    // the arbitrary cluster numbering.
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return groups[a].front() < groups[b].front(); });
    if (order.size() < params.branching) tree.complete = false;
    if (order.size() < 2) continue;

    const std::size_t level = node.level + 1;
    std::vector<std::size_t> child_ids;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const std::size_t c = order[rank];
      ClusterNode child;
      child.members = std::move(groups[c]);
      child.centroid = std::move(outcome.centroids[c]);
      child.level = level;
      child_ids.push_back(tree.nodes.size());
      tree.nodes.push_back(std::move(child));
    }
    tree.nodes[job.node].children = child_ids;
    for (std::size_t rank = child_ids.size(); rank-- > 0;)
      stack.push_back({child_ids[rank], job.path * (params.branching + 1) + rank + 1});
  }

  // Depth-first leaf order.
  std::vector<std::size_t> walk{0};
  while (!walk.empty()) {
    const std::size_t id = walk.back();
    walk.pop_back();
    const auto& kids = tree.nodes[id].children;
    if (kids.empty()) {
      tree.leaves.push_back(id);
    } else {
      for (std::size_t r = kids.size(); r-- > 0;) walk.push_back(kids[r]);
    }
  }
  return tree;
}

/// Document -> leaf ordinal (position in tree.leaves).
inline std::unordered_map<DocIndex, std::size_t> leaf_assignment(const ClusterTree& tree) {
  std::unordered_map<DocIndex, std::size_t> out;
  for (std::size_t leaf = 0; leaf < tree.leaves.size(); ++leaf)
    for (DocIndex d : tree.leaf(leaf).members) out.emplace(d, leaf);
  return out;
}

/// Audit dump: one JSON object per leaf with its ten heaviest centroid terms.
inline void write_tree_jsonl(std::ostream& out, const ClusterTree& tree, const Vocabulary& vocab) {
  for (std::size_t leaf = 0; leaf < tree.leaves.size(); ++leaf) {
    const auto& node = tree.leaf(leaf);
    std::vector<std::size_t> cols(node.centroid.size());
    std::iota(cols.begin(), cols.end(), 0);
    const std::size_t top = std::min<std::size_t>(10, cols.size());
    std::partial_sort(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(top), cols.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (node.centroid[a] != node.centroid[b]) return node.centroid[a] > node.centroid[b];
                        return a < b;
                      });
    nlohmann::json terms = nlohmann::json::array();
    for (std::size_t i = 0; i < top; ++i) {
      if (node.centroid[cols[i]] <= 0.0) break;
      if (cols[i] < vocab.size()) terms.push_back(vocab.term(cols[i]));
    }
    out << nlohmann::json{{"leaf", leaf}, {"size", node.members.size()}, {"top_terms", terms}}.dump()
        << '\n';
  }
}

}  // namespace seedsel
