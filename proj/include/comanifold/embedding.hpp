#ifndef COMANIFOLD_EMBEDDING_HPP
#define COMANIFOLD_EMBEDDING_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "comanifold/types.hpp"

namespace comanifold {

/**
 * Diffusion-map coordinates of one mode.  Column l of `coordinates` is
 * lambda_l * psi_l for the l-th nontrivial eigenpair of the row-stochastic
 * diffusion operator, eigenvalues descending, the trivial pair excluded.
 * `degenerate_spectrum` marks repeated eigenvalues among the returned ones;
 * coordinates inside such a block are solver-ordered and only their span is
 * meaningful.
 */
template <typename Scalar = double>
struct DiffusionEmbedding {
    Mat<Scalar> coordinates;
    Vec<Scalar> eigenvalues;
    Scalar sigma = 0;  ///< kernel bandwidth used, when built from distances
    bool degenerate_spectrum = false;
};

/// Median of the strictly off-diagonal entries of a distance matrix; falls
/// back to the smallest positive entry when the median is zero.
template <typename Scalar>
Scalar median_bandwidth(const Mat<Scalar>& D) {
    const Index n = D.rows();
    if (D.cols() != n) throw ValidationError("median_bandwidth: matrix must be square");
    if (n < 2) throw ValidationError("median_bandwidth: need at least two nodes");
    std::vector<Scalar> off;
    off.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) off.push_back(D(i, j));
    std::sort(off.begin(), off.end());
    const std::size_t half = off.size() / 2;
    const Scalar median = (off.size() % 2 != 0)
                              ? off[half]
                              : (off[half - 1] + off[half]) / Scalar(2);
    if (median > 0) return median;
    const auto positive = std::find_if(off.begin(), off.end(), [](Scalar v) { return v > 0; });
    if (positive == off.end())
        throw NumericalError("median_bandwidth: all pairwise distances are zero");
    return *positive;
}

/// Gaussian kernel A(i, j) = exp(-D(i, j)^2 / sigma^2).  Evaluated entrywise
/// through libm so results do not depend on SIMD packet width.
template <typename Scalar>
Mat<Scalar> gaussian_affinity(const Mat<Scalar>& D, Scalar sigma) {
    if (!(sigma > 0)) throw ValidationError("gaussian_affinity: sigma must be positive");
    Mat<Scalar> A(D.rows(), D.cols());
    for (Index j = 0; j < D.cols(); ++j)
        for (Index i = 0; i < D.rows(); ++i)
            A(i, j) = std::exp(-D(i, j) * D(i, j) / (sigma * sigma));
    return A;
}

/**
 * Diffusion map of an affinity matrix: eigenpairs of the row-stochastic
 * P = Dg^{-1} A computed through the symmetric conjugation
 * S = Dg^{-1/2} A Dg^{-1/2}, whose real spectrum equals P's.  The top pair
 * (lambda = 1, constant eigenvector) is checked and discarded; the next d
 * eigenvectors are mapped back by Dg^{-1/2}, normalized to unit length with
 * the largest-magnitude entry positive, and scaled by their eigenvalues.
 */
template <typename Scalar>
DiffusionEmbedding<Scalar> diffusion_map(const Mat<Scalar>& A, Index d) {
    const Index n = A.rows();
    if (A.cols() != n) throw ValidationError("diffusion_map: affinity must be square");
    if (d < 1) throw ValidationError("diffusion_map: dimension must be positive");
    if (d >= n) throw ValidationError("diffusion_map: dimension must be below the node count");
    if (!A.isApprox(A.transpose()))
        throw ValidationError("diffusion_map: affinity must be symmetric");
    if ((A.diagonal().array() <= 0).any())
        throw ValidationError("diffusion_map: affinity needs positive diagonal entries");

    const Vec<Scalar> degree = A.rowwise().sum();
    if ((degree.array() <= 0).any())
        throw ValidationError("diffusion_map: zero-degree node");
    const Vec<Scalar> inv_sqrt = degree.array().rsqrt();
    const Mat<Scalar> S = inv_sqrt.asDiagonal() * A * inv_sqrt.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(
        (S + S.transpose()) / Scalar(2));
    if (eig.info() != Eigen::Success)
        throw SolverError("diffusion_map: eigensolver did not converge");

    // Eigen reports ascending order; index from the top.
    const auto lambda = [&](Index l) { return eig.eigenvalues()(n - 1 - l); };
    const Vec<Scalar> psi0 = inv_sqrt.asDiagonal() * eig.eigenvectors().col(n - 1);
    const Scalar psi0_spread = psi0.maxCoeff() - psi0.minCoeff();
    if (std::abs(lambda(0) - Scalar(1)) > Scalar(1e-8) ||
        std::abs(psi0_spread) > Scalar(1e-8) * std::max(Scalar(1), psi0.cwiseAbs().maxCoeff())) {
        std::ostringstream msg;
        msg << "diffusion_map: leading eigenpair is not the trivial one (lambda0 = " << lambda(0)
            << ")";
        throw NumericalError(msg.str());
    }

    DiffusionEmbedding<Scalar> out;
    out.coordinates.resize(n, d);
    out.eigenvalues.resize(d);
    for (Index l = 1; l <= d; ++l) {
        Vec<Scalar> psi = inv_sqrt.asDiagonal() * eig.eigenvectors().col(n - 1 - l);
        psi /= psi.norm();
        Index peak = 0;
        psi.cwiseAbs().maxCoeff(&peak);
        if (psi(peak) < 0) psi = -psi;
        out.eigenvalues(l - 1) = lambda(l);
        out.coordinates.col(l - 1) = lambda(l) * psi;
    }
    // Also compare against the first eigenvalue past the cut, so a block
    // truncated by d is flagged too.
    for (Index l = 0; l <= d && l + 1 <= n - 1; ++l)
        if (std::abs(lambda(l) - lambda(l + 1)) <= Scalar(1e-10)) out.degenerate_spectrum = true;
    return out;
}

/// Full pipeline for one mode: median bandwidth, Gaussian affinity, diffusion
/// map.  Records the bandwidth in the result.
template <typename Scalar>
DiffusionEmbedding<Scalar> embed_distances(const Mat<Scalar>& D, Index d) {
    const Scalar sigma = median_bandwidth(D);
    DiffusionEmbedding<Scalar> out = diffusion_map(gaussian_affinity(D, sigma), d);
    out.sigma = sigma;
    return out;
}

}  // namespace comanifold

#endif
