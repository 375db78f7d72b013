#ifndef COMANIFOLD_SWEEP_HPP
#define COMANIFOLD_SWEEP_HPP

#include <cmath>
#include <utility>
#include <vector>

#include "comanifold/bicluster.hpp"
#include "comanifold/graph.hpp"
#include "comanifold/observed_matrix.hpp"
#include "comanifold/penalty.hpp"
#include "comanifold/types.hpp"

namespace comanifold {

/// Dyadic grid of penalty scales: gamma_r = 2^l and gamma_c = 2^k, with l and
/// k walked upward from negative starts until full fusion or the safety caps.
struct ScaleGrid {
    int l0 = -4;
    int k0 = -4;
    int l_max = 20;
    int k_max = 20;

    void validate() const {
        if (l0 >= 0 || k0 >= 0)
            throw ValidationError("scale grid: start exponents must be negative");
        if (l_max <= l0 || k_max <= k0)
            throw ValidationError("scale grid: caps must exceed start exponents");
    }
};

template <typename Scalar>
struct GridCellResult {
    int l = 0;
    int k = 0;
    Mat<Scalar> X_filled;  ///< observed entries kept bit-exact, the rest imputed
    Index n_r = 0;
    Index n_c = 0;
    Scalar objective = Scalar(0);
    Index outer_iters = 0;
};

template <typename Scalar>
struct SweepResult {
    std::vector<GridCellResult<Scalar>> cells;
    bool capped = false;  ///< some loop hit its exponent cap before full fusion
};

/**
 * Walk the solution surface over the dyadic grid.  For each row exponent l,
 * the column exponent k increases until a single column group remains; the
 * row walk stops once its reset cell (k = k0) already yields a single row
 * group.  Every executed cell is recorded in execution order.  With
 * cfg.warm_start the cells of one row are chained through the previous smooth
 * estimate and splitting state; the reset cell of each row always starts from
 * scratch, keeping rows of the grid independent of each other.
 */
template <typename Scalar, PenaltyFunction Penalty>
SweepResult<Scalar> sweep_scales(const ObservedMatrix<Scalar>& X, const NeighborGraph& Gr,
                                 const NeighborGraph& Gc, const Penalty& penalty,
                                 const ScaleGrid& grid, const SolverConfig<Scalar>& cfg,
                                 const BiclusterWorkspace<Scalar>& ws) {
    grid.validate();
    SweepResult<Scalar> out;
    for (int l = grid.l0; l <= grid.l_max; ++l) {
        const Scalar gamma_r = std::exp2(Scalar(l));
        Mat<Scalar> carry;
        SplitState<Scalar> split;
        Index reset_n_r = 0;
        bool fused_columns = false;
        for (int k = grid.k0; k <= grid.k_max; ++k) {
            const Scalar gamma_c = std::exp2(Scalar(k));
            const Mat<Scalar>* start = (cfg.warm_start && k > grid.k0) ? &carry : nullptr;
            SolveResult<Scalar> fit = co_cluster_missing(X, gamma_r, gamma_c, Gr, Gc, penalty,
                                                         cfg, ws, start,
                                                         cfg.warm_start ? &split : nullptr);
            if (k == grid.k0) reset_n_r = fit.n_r;
            out.cells.push_back({l, k, std::move(fit.X_filled), fit.n_r, fit.n_c,
                                 fit.objective_trace.back(), fit.outer_iters});
            if (cfg.warm_start) carry = std::move(fit.U);
            if (fit.n_c == 1) {
                fused_columns = true;
                break;
            }
        }
        if (!fused_columns) out.capped = true;
        if (reset_n_r == 1) return out;
    }
    out.capped = true;
    return out;
}

template <typename Scalar, PenaltyFunction Penalty>
SweepResult<Scalar> sweep_scales(const ObservedMatrix<Scalar>& X, const NeighborGraph& Gr,
                                 const NeighborGraph& Gc, const Penalty& penalty,
                                 const ScaleGrid& grid, const SolverConfig<Scalar>& cfg) {
    const BiclusterWorkspace<Scalar> ws(Gr, Gc);
    return sweep_scales(X, Gr, Gc, penalty, grid, cfg, ws);
}

}  // namespace comanifold

#endif
