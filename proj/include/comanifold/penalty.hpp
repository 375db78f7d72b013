#ifndef COMANIFOLD_PENALTY_HPP
#define COMANIFOLD_PENALTY_HPP

#include <cmath>
#include <concepts>

#include "comanifold/graph.hpp"
#include "comanifold/types.hpp"

namespace comanifold {

template <typename P>
concept PenaltyFunction = requires(const P& p, typename P::Scalar z) {
    { p.omega(z) } -> std::convertible_to<typename P::Scalar>;
    { p.omega_deriv(z) } -> std::convertible_to<typename P::Scalar>;
};

/**
 * Concave fusion penalty
 *
 *     omega(z) = (1/2) * integral_0^z dzeta / (sqrt(zeta) + epsilon)
 *              = sqrt(z) - epsilon * log(1 + sqrt(z) / epsilon),
 *
 * a smoothed square root: near zero it behaves like z / (2 epsilon), for
 * large z like sqrt(z).  Its derivative 1 / (2 (sqrt(z) + epsilon)) supplies
 * the reweighting used by the majorization steps; the smaller an edge
 * difference gets, the harder it is pulled toward exact fusion.
 */
template <typename ScalarT = double>
struct SnowflakePenalty {
    using Scalar = ScalarT;

    Scalar epsilon = Scalar(1e-12);

    Scalar omega(Scalar z) const {
        check(z);
        const Scalar r = std::sqrt(z);
        return r - epsilon * std::log1p(r / epsilon);
    }

    Scalar omega_deriv(Scalar z) const {
        check(z);
        return Scalar(1) / (Scalar(2) * (std::sqrt(z) + epsilon));
    }

  private:
    void check(Scalar z) const {
        if (!(epsilon > Scalar(0))) throw ValidationError("snowflake penalty: epsilon must be positive");
        if (!(z >= Scalar(0))) throw ValidationError("snowflake penalty: argument must be nonnegative");
    }
};

/// Convex reference member of the family: omega(z) = z.
template <typename ScalarT = double>
struct LinearPenalty {
    using Scalar = ScalarT;

    Scalar omega(Scalar z) const {
        if (!(z >= Scalar(0))) throw ValidationError("linear penalty: argument must be nonnegative");
        return z;
    }

    Scalar omega_deriv(Scalar z) const {
        if (!(z >= Scalar(0))) throw ValidationError("linear penalty: argument must be nonnegative");
        return Scalar(1);
    }
};

/// Euclidean difference of an edge's endpoints in the given mode.
template <typename Derived>
typename Derived::Scalar edge_difference_norm(const Eigen::MatrixBase<Derived>& U, Mode mode,
                                              Index i, Index j) {
    return (mode == Mode::rows) ? (U.row(i) - U.row(j)).norm() : (U.col(i) - U.col(j)).norm();
}

/// Majorization weights: omega'(current edge difference), one per edge of G.
template <typename Derived, PenaltyFunction Penalty>
Vec<typename Derived::Scalar> mm_weights(const Eigen::MatrixBase<Derived>& U,
                                         const NeighborGraph& G, Mode mode,
                                         const Penalty& penalty) {
    using Scalar = typename Derived::Scalar;
    const Index node_count = (mode == Mode::rows) ? U.rows() : U.cols();
    if (node_count != G.node_count)
        throw ValidationError("mm_weights: graph node count does not match the matrix mode");
    Vec<Scalar> w(static_cast<Index>(G.edges.size()));
    for (std::size_t l = 0; l < G.edges.size(); ++l) {
        const auto [i, j] = G.edges[l];
        w(static_cast<Index>(l)) = penalty.omega_deriv(edge_difference_norm(U, mode, i, j));
    }
    return w;
}

}  // namespace comanifold

#endif
