#ifndef COMANIFOLD_DATASETS_HPP
#define COMANIFOLD_DATASETS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include "comanifold/rng.hpp"
#include "comanifold/types.hpp"

namespace comanifold {

enum class LinkageVariant { linkage, linkage2 };

/**
 * Generation parameters for the synthetic coupled-geometry datasets.
 *
 * Both variants build a matrix of Euclidean distances between two spatially
 * separated 3D point sets: rows sample a curve (helix) or three Gaussian
 * clouds, columns sample a saddle surface patch.  The geometry constants the
 * construction depends on are exposed here instead of being hidden in the
 * generators.
 */
template <typename Scalar = double>
struct LinkageSpec {
    Index n_rows = 100;  ///< row points (helix samples or cloud points)
    Index n_cols = 150;  ///< column points (surface samples)
    LinkageVariant variant = LinkageVariant::linkage;
    std::uint64_t seed = 0;
    Scalar noise = 1;          ///< isotropic displacement of row points; the cloud
                               ///< standard deviation in the linkage2 variant
    Scalar separation = 10;    ///< offset between the two sets along the first axis,
                               ///< and the spacing of the linkage2 cloud centers
    Scalar helix_radius = 1;   ///< helix x/y radius
    Scalar helix_pitch = Scalar(0.25);  ///< height gained per radian of helix parameter

    void validate() const {
        if (n_rows < 4 || n_cols < 4)
            throw ValidationError("LinkageSpec: n_rows and n_cols must be at least 4");
        if (!(noise >= 0)) throw ValidationError("LinkageSpec: noise must be nonnegative");
        if (!(separation > 0)) throw ValidationError("LinkageSpec: separation must be positive");
        if (!(helix_radius > 0) || !(helix_pitch > 0))
            throw ValidationError("LinkageSpec: helix radius and pitch must be positive");
    }
};

/**
 * A generated dataset: the distance matrix plus the ground truth that
 * produced it.  row_points and col_points hold the 3D samples after the
 * separation offset, so X(i, j) = ||row_points.row(i) - col_points.row(j)||.
 * row_param carries the helix parameter (linkage), row_labels the cluster
 * ids (linkage2); the unused one is left empty.  col_param holds the (x, y)
 * surface coordinates of each column point.
 */
template <typename Scalar = double>
struct LinkageData {
    Mat<Scalar> X;
    Mat<Scalar> row_points;
    Mat<Scalar> col_points;
    Vec<Scalar> row_param;
    std::vector<Index> row_labels;
    Mat<Scalar> col_param;
};

namespace detail {

/// Saddle patch z = x * y sampled on a cell-jittered uniform grid over
/// [-1, 1]^2, consuming two uniform draws per point.
template <typename Scalar>
void sample_saddle(Index n_cols, Rng& rng, Mat<Scalar>& points, Mat<Scalar>& param) {
    const Index g = static_cast<Index>(
        std::ceil(std::sqrt(static_cast<double>(n_cols))));
    points.resize(n_cols, 3);
    param.resize(n_cols, 2);
    for (Index j = 0; j < n_cols; ++j) {
        const Index a = j % g;
        const Index b = j / g;
        const Scalar x = Scalar(-1) + Scalar(2) * (Scalar(a) + Scalar(rng.uniform01())) / Scalar(g);
        const Scalar y = Scalar(-1) + Scalar(2) * (Scalar(b) + Scalar(rng.uniform01())) / Scalar(g);
        param(j, 0) = x;
        param(j, 1) = y;
        points(j, 0) = x;
        points(j, 1) = y;
        points(j, 2) = x * y;
    }
}

template <typename Scalar>
Mat<Scalar> cross_distances(const Mat<Scalar>& rows, const Mat<Scalar>& cols) {
    Mat<Scalar> X(rows.rows(), cols.rows());
    for (Index i = 0; i < rows.rows(); ++i)
        for (Index j = 0; j < cols.rows(); ++j)
            X(i, j) = (rows.row(i) - cols.row(j)).norm();
    return X;
}

}  // namespace detail

/**
 * Rows sample a helix (radius, pitch from the spec; parameter drawn uniformly
 * on [0, 4 pi] and sorted so rows follow the curve), columns sample the
 * saddle patch, and the row set is translated by `separation` along the first
 * axis.  `noise` adds an isotropic Gaussian displacement to every row point.
 * Bit-reproducible for a fixed spec: rows consume the generator first, then
 * columns.
 */
template <typename Scalar = double>
LinkageData<Scalar> generate_linkage(const LinkageSpec<Scalar>& spec) {
    spec.validate();
    Rng rng(spec.seed);
    LinkageData<Scalar> data;

    std::vector<Scalar> t(static_cast<std::size_t>(spec.n_rows));
    for (auto& ti : t) ti = Scalar(rng.uniform(0.0, 4.0 * std::numbers::pi));
    std::sort(t.begin(), t.end());

    data.row_param.resize(spec.n_rows);
    data.row_points.resize(spec.n_rows, 3);
    for (Index i = 0; i < spec.n_rows; ++i) {
        const Scalar ti = t[static_cast<std::size_t>(i)];
        data.row_param(i) = ti;
        data.row_points(i, 0) = spec.helix_radius * std::cos(ti) + spec.separation;
        data.row_points(i, 1) = spec.helix_radius * std::sin(ti);
        data.row_points(i, 2) = spec.helix_pitch * ti;
        for (Index d = 0; d < 3; ++d)
            data.row_points(i, d) += spec.noise * Scalar(rng.normal());
    }

    detail::sample_saddle(spec.n_cols, rng, data.col_points, data.col_param);
    data.X = detail::cross_distances(data.row_points, data.col_points);
    return data;
}

/**
 * Rows sample three isotropic Gaussian clouds with standard deviation
 * `noise`, centered at (0, 0, 0), (0, s, 0), (0, 0, s) for s = separation
 * (mutual center distance s * sqrt(2)); columns sample the saddle patch as
 * in generate_linkage, and the row set is again offset by s along the first
 * axis.  Rows are assigned to clouds in contiguous blocks whose sizes differ
 * by at most one, recorded in row_labels.
 */
template <typename Scalar = double>
LinkageData<Scalar> generate_linkage2(const LinkageSpec<Scalar>& spec) {
    spec.validate();
    Rng rng(spec.seed);
    LinkageData<Scalar> data;

    const Scalar s = spec.separation;
    const Scalar centers[3][3] = {{0, 0, 0}, {0, s, 0}, {0, 0, s}};
    const Index base = spec.n_rows / 3;
    const Index remainder = spec.n_rows % 3;

    data.row_labels.reserve(static_cast<std::size_t>(spec.n_rows));
    data.row_points.resize(spec.n_rows, 3);
    Index i = 0;
    for (Index c = 0; c < 3; ++c) {
        const Index count = base + (c < remainder ? 1 : 0);
        for (Index r = 0; r < count; ++r, ++i) {
            data.row_labels.push_back(c);
            data.row_points(i, 0) = centers[c][0] + s;
            data.row_points(i, 1) = centers[c][1];
            data.row_points(i, 2) = centers[c][2];
            for (Index d = 0; d < 3; ++d)
                data.row_points(i, d) += spec.noise * Scalar(rng.normal());
        }
    }

    detail::sample_saddle(spec.n_cols, rng, data.col_points, data.col_param);
    data.X = detail::cross_distances(data.row_points, data.col_points);
    return data;
}

/// Keep the `count` rows with the largest sample variance, preserving their
/// original relative order.  Ties keep the earlier row.
template <typename Scalar>
Mat<Scalar> top_variance_features(const Mat<Scalar>& X, Index count) {
    if (count < 1) throw ValidationError("top_variance_features: count must be positive");
    if (count > X.rows())
        throw ValidationError("top_variance_features: count exceeds the number of rows");
    const Index m = X.rows();
    Vec<Scalar> variance(m);
    for (Index i = 0; i < m; ++i) {
        const Scalar mean = X.row(i).mean();
        variance(i) = (X.row(i).array() - mean).square().sum() /
                      Scalar(std::max<Index>(X.cols() - 1, 1));
    }
    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return variance(a) > variance(b); });
    order.resize(static_cast<std::size_t>(count));
    std::sort(order.begin(), order.end());

    Mat<Scalar> kept(count, X.cols());
    for (Index i = 0; i < count; ++i) kept.row(i) = X.row(order[static_cast<std::size_t>(i)]);
    return kept;
}

/// A row/column shuffled matrix together with the permutations that made it:
/// X(i, j) = original(row_perm[i], col_perm[j]), so ground truth aligns via
/// new_labels[i] = old_labels[row_perm[i]].
template <typename Scalar>
struct ShuffledMatrix {
    Mat<Scalar> X;
    std::vector<Index> row_perm;
    std::vector<Index> col_perm;
};

/// Deterministically permute rows and columns; rows consume the generator
/// before columns.
template <typename Scalar>
ShuffledMatrix<Scalar> shuffle_modes(const Mat<Scalar>& X, std::uint64_t seed) {
    Rng rng(seed);
    ShuffledMatrix<Scalar> out;
    out.row_perm.resize(static_cast<std::size_t>(X.rows()));
    out.col_perm.resize(static_cast<std::size_t>(X.cols()));
    std::iota(out.row_perm.begin(), out.row_perm.end(), Index{0});
    std::iota(out.col_perm.begin(), out.col_perm.end(), Index{0});
    rng.shuffle(out.row_perm);
    rng.shuffle(out.col_perm);
    out.X.resize(X.rows(), X.cols());
    for (Index i = 0; i < X.rows(); ++i)
        for (Index j = 0; j < X.cols(); ++j)
            out.X(i, j) = X(out.row_perm[static_cast<std::size_t>(i)],
                            out.col_perm[static_cast<std::size_t>(j)]);
    return out;
}

}  // namespace comanifold

#endif
