#ifndef COMANIFOLD_GRAPH_HPP
#define COMANIFOLD_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "comanifold/observed_matrix.hpp"
#include "comanifold/types.hpp"

namespace comanifold {

/// Undirected simple graph over matrix rows or columns.
/// Edges are stored as (i, j) with i < j, lexicographically sorted, no duplicates.
struct NeighborGraph {
    Index node_count = 0;
    std::vector<std::pair<Index, Index>> edges;
};

/// Normalize an edge list into the canonical NeighborGraph form.
inline NeighborGraph make_graph(Index node_count, std::vector<std::pair<Index, Index>> edges) {
    if (node_count < 1) throw ValidationError("graph: node_count must be positive");
    for (auto& [i, j] : edges) {
        if (i == j) throw ValidationError("graph: self loops are not allowed");
        if (i < 0 || j < 0 || i >= node_count || j >= node_count)
            throw ValidationError("graph: edge endpoint out of range");
        if (i > j) std::swap(i, j);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return NeighborGraph{node_count, std::move(edges)};
}

namespace detail {

class UnionFind {
  public:
    explicit UnionFind(Index n) : parent_(static_cast<std::size_t>(n)) {
        std::iota(parent_.begin(), parent_.end(), Index{0});
    }
    Index find(Index x) {
        while (parent_[static_cast<std::size_t>(x)] != x) {
            parent_[static_cast<std::size_t>(x)] =
                parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
            x = parent_[static_cast<std::size_t>(x)];
        }
        return x;
    }
    bool merge(Index a, Index b) {
        const Index ra = find(a);
        const Index rb = find(b);
        if (ra == rb) return false;
        parent_[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
        return true;
    }

  private:
    std::vector<Index> parent_;
};

}  // namespace detail

/**
 * Distance between two partially observed vectors over their common support S:
 *
 *     d(a, b) = sqrt( (L / |S|) * sum_{t in S} (a_t - b_t)^2 ),   L = full length.
 *
 * The L/|S| factor rescales the partial sum to the full-vector energy.
 * Returns nullopt when the common support is empty.
 */
template <typename DerivedA, typename DerivedB, typename MaskA, typename MaskB>
std::optional<typename DerivedA::Scalar> masked_distance(const Eigen::MatrixBase<DerivedA>& a,
                                                         const Eigen::ArrayBase<MaskA>& a_mask,
                                                         const Eigen::MatrixBase<DerivedB>& b,
                                                         const Eigen::ArrayBase<MaskB>& b_mask) {
    using Scalar = typename DerivedA::Scalar;
    const Index L = a.size();
    if (b.size() != L || a_mask.size() != L || b_mask.size() != L)
        throw ValidationError("masked_distance: vector and mask lengths differ");
    Scalar sum = 0;
    Index support = 0;
    for (Index t = 0; t < L; ++t) {
        if (a_mask(t) && b_mask(t)) {
            const Scalar diff = a(t) - b(t);
            sum += diff * diff;
            ++support;
        }
    }
    if (support == 0) return std::nullopt;
    return std::sqrt(sum * static_cast<Scalar>(L) / static_cast<Scalar>(support));
}

/// All-pairs masked distances between rows or columns of X.
/// value(i, j) is meaningful only where present(i, j); absent slots hold zero.
template <typename Scalar>
struct PairwiseDistances {
    Mat<Scalar> value;
    MaskMat present;
};

template <typename Scalar>
PairwiseDistances<Scalar> pairwise_masked_distances(const ObservedMatrix<Scalar>& X, Mode mode) {
    const Index count = (mode == Mode::rows) ? X.rows() : X.cols();
    PairwiseDistances<Scalar> out;
    out.value = Mat<Scalar>::Zero(count, count);
    out.present = MaskMat::Constant(count, count, false);
    for (Index i = 0; i < count; ++i) {
        out.present(i, i) = true;
        for (Index j = i + 1; j < count; ++j) {
            std::optional<Scalar> d;
            if (mode == Mode::rows) {
                d = masked_distance(X.values.row(i).transpose(), X.mask.row(i).transpose(),
                                    X.values.row(j).transpose(), X.mask.row(j).transpose());
            } else {
                d = masked_distance(X.values.col(i), X.mask.col(i), X.values.col(j), X.mask.col(j));
            }
            if (d) {
                out.value(i, j) = out.value(j, i) = *d;
                out.present(i, j) = out.present(j, i) = true;
            }
        }
    }
    return out;
}

/// Default neighbor count used by the pipeline.
inline Index default_knn_k(Index node_count) {
    return std::max<Index>(2, static_cast<Index>(std::lround(std::log2(static_cast<double>(node_count)))));
}

/**
 * Symmetric k-nearest-neighbor graph from precomputed pairwise distances.
 * A node ranks only peers with a defined distance (ties broken by smaller
 * index) and the directed lists are joined into one undirected edge set.
 */
template <typename Scalar>
NeighborGraph knn_from_distances(const PairwiseDistances<Scalar>& dist, Index k) {
    const Index count = dist.value.rows();
    if (count < 2) throw ValidationError("knn graph: need at least two nodes");
    if (k < 1 || k > count - 1) throw ValidationError("knn graph: k must lie in [1, node_count - 1]");
    std::vector<std::pair<Index, Index>> edges;
    std::vector<std::pair<Scalar, Index>> candidates;
    for (Index u = 0; u < count; ++u) {
        candidates.clear();
        for (Index v = 0; v < count; ++v) {
            if (v != u && dist.present(u, v)) candidates.emplace_back(dist.value(u, v), v);
        }
        if (candidates.empty())
            throw ValidationError("knn graph: a node shares no observed coordinates with any other node");
        const Index take = std::min<Index>(k, static_cast<Index>(candidates.size()));
        std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end());
        for (Index t = 0; t < take; ++t) {
            const Index v = candidates[static_cast<std::size_t>(t)].second;
            edges.emplace_back(std::min(u, v), std::max(u, v));
        }
    }
    return make_graph(count, std::move(edges));
}

template <typename Scalar>
NeighborGraph knn_graph(const ObservedMatrix<Scalar>& X, Mode mode, Index k) {
    return knn_from_distances(pairwise_masked_distances(X, mode), k);
}

inline bool is_connected(const NeighborGraph& G) {
    detail::UnionFind uf(G.node_count);
    Index components = G.node_count;
    for (const auto& [i, j] : G.edges)
        if (uf.merge(i, j)) --components;
    return components == 1;
}

/**
 * Connect a fragmented graph by adding a minimum-distance spanning structure
 * across its components (Kruskal over all cross-component pairs).  Pairs with
 * no defined distance weigh +inf and are ranked after every finite pair, with
 * lexicographic order as the final tie break, so the result is deterministic
 * even when whole components share no observations.
 */
template <typename Scalar>
NeighborGraph ensure_connected(const NeighborGraph& G, const PairwiseDistances<Scalar>& dist) {
    if (dist.value.rows() != G.node_count)
        throw ValidationError("ensure_connected: distance matrix does not match node count");
    detail::UnionFind uf(G.node_count);
    Index components = G.node_count;
    for (const auto& [i, j] : G.edges)
        if (uf.merge(i, j)) --components;
    if (components == 1) return G;

    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    std::vector<std::tuple<Scalar, Index, Index>> cross;
    for (Index i = 0; i < G.node_count; ++i)
        for (Index j = i + 1; j < G.node_count; ++j)
            if (uf.find(i) != uf.find(j))
                cross.emplace_back(dist.present(i, j) ? dist.value(i, j) : inf, i, j);
    std::sort(cross.begin(), cross.end());

    auto edges = G.edges;
    for (const auto& [w, i, j] : cross) {
        if (uf.merge(i, j)) {
            edges.emplace_back(i, j);
            if (--components == 1) break;
        }
    }
    return make_graph(G.node_count, std::move(edges));
}

/**
 * Edge-incidence matrix: one row per edge with +1 at the smaller endpoint and
 * -1 at the larger one.  For a connected graph its null space is spanned by
 * the constant vector.
 */
template <typename Scalar>
Mat<Scalar> incidence(const NeighborGraph& G) {
    Mat<Scalar> Phi = Mat<Scalar>::Zero(static_cast<Index>(G.edges.size()), G.node_count);
    for (std::size_t l = 0; l < G.edges.size(); ++l) {
        Phi(static_cast<Index>(l), G.edges[l].first) = Scalar(1);
        Phi(static_cast<Index>(l), G.edges[l].second) = Scalar(-1);
    }
    return Phi;
}

}  // namespace comanifold

#endif
