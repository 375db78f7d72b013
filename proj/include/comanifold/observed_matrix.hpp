#ifndef COMANIFOLD_OBSERVED_MATRIX_HPP
#define COMANIFOLD_OBSERVED_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "comanifold/rng.hpp"
#include "comanifold/types.hpp"

namespace comanifold {

/**
 * A partially observed matrix: dense values plus a boolean mask with
 * true marking observed entries.  Unobserved slots are stored as exact
 * zeros so that two instances with equal observations compare equal;
 * NaN never acts as a missingness sentinel.
 */
template <typename Scalar>
struct ObservedMatrix {
    Mat<Scalar> values;
    MaskMat mask;

    ObservedMatrix(Mat<Scalar> values_in, MaskMat mask_in)
        : values(std::move(values_in)), mask(std::move(mask_in)) {
        if (values.rows() != mask.rows() || values.cols() != mask.cols())
            throw ValidationError("observed matrix: values and mask dimensions differ");
        if (values.rows() < 2 || values.cols() < 2)
            throw ValidationError("observed matrix: need at least 2 rows and 2 columns");
        if (!mask.any())
            throw ValidationError("observed matrix: mask has no observed entries");
        values = mask.select(values, Mat<Scalar>::Zero(values.rows(), values.cols()));
    }

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }

    Index observed_count() const { return mask.count(); }
};

/// Random-missingness pattern: fraction of entries removed, RNG seed.
struct MaskSpec {
    double fraction_missing = 0.0;
    std::uint64_t seed = 0;
};

/// Dense matrix equal to X on observed entries and zero elsewhere.
template <typename Scalar>
Mat<Scalar> project_observed(const ObservedMatrix<Scalar>& X) {
    return X.mask.select(X.values, Mat<Scalar>::Zero(X.rows(), X.cols()));
}

/// Dense completion: observed entries from X, the rest copied from U.
template <typename Scalar, typename Derived>
Mat<Scalar> fill_with(const ObservedMatrix<Scalar>& X, const Eigen::MatrixBase<Derived>& U) {
    if (U.rows() != X.rows() || U.cols() != X.cols())
        throw ValidationError("fill_with: completion matrix dimensions differ from X");
    return X.mask.select(X.values, U.derived());
}

/// Mean over observed entries only.
template <typename Scalar>
Scalar observed_mean(const ObservedMatrix<Scalar>& X) {
    const Index count = X.mask.count();
    if (count == 0) throw ValidationError("observed_mean: mask has no observed entries");
    return X.mask.select(X.values, Mat<Scalar>::Zero(X.rows(), X.cols())).sum() /
           static_cast<Scalar>(count);
}

/**
 * Remove round(fraction * m * n) entries of a fully observed matrix uniformly
 * at random.  Draws are redrawn (bounded) until every row and every column
 * keeps at least one observation, so downstream neighbor ranking stays
 * well posed.  Deterministic for a fixed seed.
 */
template <typename Scalar>
ObservedMatrix<Scalar> apply_mask(const Mat<Scalar>& X, const MaskSpec& spec) {
    if (!(spec.fraction_missing >= 0.0 && spec.fraction_missing < 1.0))
        throw ValidationError("apply_mask: fraction_missing must lie in [0, 1)");
    const Index m = X.rows();
    const Index n = X.cols();
    const Index total = m * n;
    const Index n_missing =
        static_cast<Index>(std::llround(spec.fraction_missing * static_cast<double>(total)));
    if (total - n_missing < std::max(m, n))
        throw ValidationError("apply_mask: too few observations left to cover every row and column");

    Rng rng(spec.seed);
    std::vector<Index> cells(static_cast<std::size_t>(total));
    for (Index t = 0; t < total; ++t) cells[static_cast<std::size_t>(t)] = t;

    constexpr int max_attempts = 1000;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        // Partial Fisher-Yates: the first n_missing slots become the removed cells.
        for (Index t = 0; t < n_missing; ++t) {
            const Index j = t + static_cast<Index>(rng.below(static_cast<std::uint64_t>(total - t)));
            std::swap(cells[static_cast<std::size_t>(t)], cells[static_cast<std::size_t>(j)]);
        }
        MaskMat mask = MaskMat::Constant(m, n, true);
        for (Index t = 0; t < n_missing; ++t) {
            const Index cell = cells[static_cast<std::size_t>(t)];
            mask(cell / n, cell % n) = false;
        }
        const bool rows_covered = (mask.rowwise().count() > 0).all();
        const bool cols_covered = (mask.colwise().count() > 0).all();
        if (rows_covered && cols_covered) return ObservedMatrix<Scalar>(X, std::move(mask));
    }
    throw ValidationError("apply_mask: could not cover every row and column within retry budget");
}

}  // namespace comanifold

#endif
