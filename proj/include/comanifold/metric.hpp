#ifndef COMANIFOLD_METRIC_HPP
#define COMANIFOLD_METRIC_HPP

#include <cmath>
#include <utility>
#include <vector>

#include "comanifold/sweep.hpp"
#include "comanifold/types.hpp"

namespace comanifold {

/// Multi-scale row and column distances accumulated over a cell collection.
template <typename Scalar>
struct MultiScaleDistances {
    Mat<Scalar> row_dist;
    Mat<Scalar> col_dist;
    Scalar alpha = Scalar(-0.5);
    std::vector<std::pair<int, int>> cells_used;
};

/// Weight of one cell in the accumulated metric: (2^l * 2^k)^alpha.
template <typename Scalar>
Scalar cell_scale(int l, int k, Scalar alpha) {
    return std::exp2(Scalar(l + k) * alpha);
}

/// Exact pairwise Euclidean distances between rows (or columns) of a dense matrix.
template <typename Derived>
Mat<typename Derived::Scalar> euclidean_distances(const Eigen::MatrixBase<Derived>& A,
                                                  Mode mode) {
    using Scalar = typename Derived::Scalar;
    const Index n = mode == Mode::rows ? A.rows() : A.cols();
    Mat<Scalar> D = Mat<Scalar>::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
            const Scalar d = mode == Mode::rows ? (A.row(i) - A.row(j)).norm()
                                                : (A.col(i) - A.col(j)).norm();
            D(i, j) = d;
            D(j, i) = d;
        }
    return D;
}

/// Scaled distance between two rows (or columns) of one cell's filled matrix.
template <typename Scalar>
Scalar cell_distance(const GridCellResult<Scalar>& cell, Mode mode, Index i, Index j,
                     Scalar alpha) {
    const Index n = mode == Mode::rows ? cell.X_filled.rows() : cell.X_filled.cols();
    if (i < 0 || j < 0 || i >= n || j >= n)
        throw ValidationError("cell_distance: index out of range");
    const Scalar s = cell_scale(cell.l, cell.k, alpha);
    const Scalar d = mode == Mode::rows ? (cell.X_filled.row(i) - cell.X_filled.row(j)).norm()
                                        : (cell.X_filled.col(i) - cell.X_filled.col(j)).norm();
    return s * d;
}

/**
 * Streaming accumulator for the multi-scale metric.  Cells can be folded in
 * as the sweep produces them; folding a stored cell list in the same order
 * gives bit-identical distances.
 */
template <typename Scalar>
class MultiScaleAccumulator {
  public:
    MultiScaleAccumulator(Index rows, Index cols, Scalar alpha) : alpha_(alpha) {
        if (rows < 1 || cols < 1)
            throw ValidationError("multi-scale accumulator: dimensions must be positive");
        dist_.row_dist = Mat<Scalar>::Zero(rows, rows);
        dist_.col_dist = Mat<Scalar>::Zero(cols, cols);
        dist_.alpha = alpha;
    }

    void add_cell(const GridCellResult<Scalar>& cell) {
        if (cell.X_filled.rows() != dist_.row_dist.rows() ||
            cell.X_filled.cols() != dist_.col_dist.rows())
            throw ValidationError("multi-scale accumulator: cell dimensions do not match");
        const Scalar s = cell_scale(cell.l, cell.k, alpha_);
        fold(cell.X_filled, s, Mode::rows, dist_.row_dist);
        fold(cell.X_filled, s, Mode::columns, dist_.col_dist);
        dist_.cells_used.emplace_back(cell.l, cell.k);
    }

    const MultiScaleDistances<Scalar>& distances() const { return dist_; }
    MultiScaleDistances<Scalar> take() { return std::move(dist_); }

  private:
    static void fold(const Mat<Scalar>& X, Scalar s, Mode mode, Mat<Scalar>& D) {
        const Index n = D.rows();
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j) {
                const Scalar d = mode == Mode::rows ? (X.row(i) - X.row(j)).norm()
                                                    : (X.col(i) - X.col(j)).norm();
                D(i, j) += s * d;
                D(j, i) = D(i, j);
            }
    }

    Scalar alpha_;
    MultiScaleDistances<Scalar> dist_;
};

/// Fold a stored cell list, in its stored order, into the multi-scale metric.
template <typename Scalar>
MultiScaleDistances<Scalar> accumulate(const std::vector<GridCellResult<Scalar>>& cells,
                                       Scalar alpha) {
    if (cells.empty()) throw ValidationError("accumulate: empty cell list");
    MultiScaleAccumulator<Scalar> acc(cells.front().X_filled.rows(),
                                      cells.front().X_filled.cols(), alpha);
    for (const auto& cell : cells) acc.add_cell(cell);
    return acc.take();
}

}  // namespace comanifold

#endif
