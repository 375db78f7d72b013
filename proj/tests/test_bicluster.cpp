#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "comanifold/bicluster.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using comanifold::BiclusterWorkspace;
using comanifold::convex_bicluster;
using comanifold::co_cluster_missing;
using comanifold::count_fused_groups;
using comanifold::Index;
using comanifold::LinearPenalty;
using comanifold::make_graph;
using comanifold::MaskMat;
using comanifold::mm_weights;
using comanifold::Mode;
using comanifold::ObservedMatrix;
using comanifold::objective_value;
using comanifold::SnowflakePenalty;
using comanifold::SolverConfig;
using comanifold::SolverError;
using comanifold::surrogate_value;
using comanifold::ValidationError;
using test_support::make_instance;
using test_support::MatrixXd;
using VectorXd = comanifold::Vec<double>;

namespace {

const SnowflakePenalty<double> snowflake{1e-12};

oracles::ConvexInstance to_oracle(const MatrixXd& X_tilde, const comanifold::NeighborGraph& Gr,
                                  const comanifold::NeighborGraph& Gc, const VectorXd& wr,
                                  const VectorXd& wc, double gamma_r, double gamma_c) {
    oracles::ConvexInstance inst;
    inst.X_tilde = X_tilde;
    inst.row_edges = Gr.edges;
    inst.col_edges = Gc.edges;
    inst.wr = wr;
    inst.wc = wc;
    inst.gamma_r = gamma_r;
    inst.gamma_c = gamma_c;
    return inst;
}

}  // namespace

TEST_CASE("objective_value") {
    SUBCASE("exact fit leaves only the penalties") {
        const auto inst = make_instance(4, 3, 50, 0.0);
        const MatrixXd U = inst.X.values;
        double expected = 0.0;
        for (const auto& [i, j] : inst.Gr.edges)
            expected += 0.7 * snowflake.omega((U.row(i) - U.row(j)).norm());
        for (const auto& [i, j] : inst.Gc.edges)
            expected += 0.3 * snowflake.omega((U.col(i) - U.col(j)).norm());
        CHECK(objective_value(U, inst.X, inst.Gr, inst.Gc, 0.7, 0.3, snowflake) ==
              doctest::Approx(expected).epsilon(1e-14));
    }
    SUBCASE("constant matrices pay no penalty") {
        const auto inst = make_instance(5, 4, 51, 0.3);
        const MatrixXd U = MatrixXd::Constant(5, 4, 1.5);
        double fidelity = 0.0;
        for (Index i = 0; i < 5; ++i)
            for (Index j = 0; j < 4; ++j)
                if (inst.X.mask(i, j)) {
                    const double r = inst.X.values(i, j) - 1.5;
                    fidelity += 0.5 * r * r;
                }
        CHECK(objective_value(U, inst.X, inst.Gr, inst.Gc, 2.0, 3.0, snowflake) ==
              doctest::Approx(fidelity).epsilon(1e-14));
    }
    SUBCASE("matches a plain-loop evaluation") {
        const auto inst = make_instance(4, 3, 52, 0.25);
        const MatrixXd U = test_support::random_matrix(4, 3, 53, -2.0, 2.0);
        double expected = 0.0;
        for (Index i = 0; i < 4; ++i)
            for (Index j = 0; j < 3; ++j)
                if (inst.X.mask(i, j)) {
                    const double r = inst.X.values(i, j) - U(i, j);
                    expected += 0.5 * r * r;
                }
        for (const auto& [i, j] : inst.Gr.edges)
            expected += 0.9 * snowflake.omega((U.row(i) - U.row(j)).norm());
        for (const auto& [i, j] : inst.Gc.edges)
            expected += 1.4 * snowflake.omega((U.col(i) - U.col(j)).norm());
        CHECK(objective_value(U, inst.X, inst.Gr, inst.Gc, 0.9, 1.4, snowflake) ==
              doctest::Approx(expected).epsilon(1e-13));
    }
    SUBCASE("validation") {
        const auto inst = make_instance(4, 3, 54, 0.2);
        CHECK_THROWS_AS(
            objective_value(MatrixXd::Zero(3, 3), inst.X, inst.Gr, inst.Gc, 1.0, 1.0, snowflake),
            ValidationError);
        CHECK_THROWS_AS(
            objective_value(MatrixXd::Zero(4, 3), inst.X, inst.Gr, inst.Gc, -1.0, 1.0, snowflake),
            ValidationError);
    }
}

TEST_CASE("surrogate majorizes the objective and touches it at the anchor") {
    comanifold::Rng rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        const auto inst = make_instance(6, 5, 100 + trial, 0.3);
        const MatrixXd anchor = test_support::random_matrix(6, 5, 200 + trial, -1.0, 11.0);
        const double f_anchor =
            objective_value(anchor, inst.X, inst.Gr, inst.Gc, 0.8, 1.2, snowflake);
        const double g_anchor =
            surrogate_value(anchor, anchor, inst.X, inst.Gr, inst.Gc, 0.8, 1.2, snowflake);
        CHECK(g_anchor == doctest::Approx(f_anchor).epsilon(1e-12));

        for (int draw = 0; draw < 40; ++draw) {
            MatrixXd U(6, 5);
            for (Index i = 0; i < 6; ++i)
                for (Index j = 0; j < 5; ++j) U(i, j) = rng.uniform(-5.0, 15.0);
            const double f = objective_value(U, inst.X, inst.Gr, inst.Gc, 0.8, 1.2, snowflake);
            const double g = surrogate_value(U, anchor, inst.X, inst.Gr, inst.Gc, 0.8, 1.2, snowflake);
            CHECK(g >= f - 1e-10);
        }
    }
}

TEST_CASE("linear penalty on complete data makes the surrogate exact") {
    const auto inst = make_instance(5, 4, 60, 0.0);
    const LinearPenalty<double> lin;
    const MatrixXd anchor = test_support::random_matrix(5, 4, 61);
    for (int draw = 0; draw < 20; ++draw) {
        const MatrixXd U = test_support::random_matrix(5, 4, 62 + draw, -3.0, 13.0);
        const double f = objective_value(U, inst.X, inst.Gr, inst.Gc, 0.5, 0.7, lin);
        const double g = surrogate_value(U, anchor, inst.X, inst.Gr, inst.Gc, 0.5, 0.7, lin);
        CHECK(g == doctest::Approx(f).epsilon(1e-12));
    }
}

TEST_CASE("count_fused_groups") {
    const auto path6 = make_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}});
    SUBCASE("all rows equal collapse to one group") {
        const MatrixXd U = MatrixXd::Constant(6, 3, 4.0);
        const auto groups = count_fused_groups(U, path6, Mode::rows, 1e-6);
        CHECK(groups.count == 1);
        CHECK(groups.labels == std::vector<Index>(6, 0));
    }
    SUBCASE("well-separated rows stay apart") {
        MatrixXd U(6, 2);
        for (Index i = 0; i < 6; ++i) U.row(i).setConstant(static_cast<double>(i));
        CHECK(count_fused_groups(U, path6, Mode::rows, 1e-6).count == 6);
    }
    SUBCASE("three exact blocks over a path graph") {
        MatrixXd U(6, 2);
        U.row(0) << 1, 1;
        U.row(1) << 1, 1;
        U.row(2) << 2, 2;
        U.row(3) << 2, 2;
        U.row(4) << 3, 3;
        U.row(5) << 3, 3;
        const auto groups = count_fused_groups(U, path6, Mode::rows, 1e-6);
        CHECK(groups.count == 3);
        CHECK(groups.labels == std::vector<Index>{0, 0, 1, 1, 2, 2});
        CHECK(groups.count == oracles::all_pairs_group_count(U, true, 1e-6));
    }
    SUBCASE("column mode") {
        MatrixXd U(2, 4);
        U << 1, 1, 5, 5,  //
            2, 2, 6, 6;
        const auto G = make_graph(4, {{0, 1}, {1, 2}, {2, 3}});
        CHECK(count_fused_groups(U, G, Mode::columns, 1e-6).count == 2);
    }
    SUBCASE("nonpositive tolerance throws") {
        CHECK_THROWS_AS(count_fused_groups(MatrixXd::Zero(6, 2), path6, Mode::rows, 0.0),
                        ValidationError);
    }
}

TEST_CASE("convex_bicluster") {
    SolverConfig<double> cfg;

    SUBCASE("zero penalties return the target exactly") {
        const auto inst = make_instance(5, 4, 70, 0.2);
        const MatrixXd X_tilde = fill_with(inst.X, MatrixXd::Zero(5, 4));
        const VectorXd wr = VectorXd::Ones(static_cast<Index>(inst.Gr.edges.size()));
        const VectorXd wc = VectorXd::Ones(static_cast<Index>(inst.Gc.edges.size()));
        const auto fit = convex_bicluster(X_tilde, 0.0, 0.0, wr, wc, inst.Gr, inst.Gc, cfg);
        CHECK(fit.U == X_tilde);
        CHECK(fit.converged);
    }
    SUBCASE("overwhelming penalties collapse everything to the grand mean") {
        const auto inst = make_instance(5, 4, 71, 0.0);
        const MatrixXd X_tilde = inst.X.values;
        const VectorXd wr = VectorXd::Ones(static_cast<Index>(inst.Gr.edges.size()));
        const VectorXd wc = VectorXd::Ones(static_cast<Index>(inst.Gc.edges.size()));
        const double huge = std::ldexp(1.0, 20);
        const auto fit = convex_bicluster(X_tilde, huge, huge, wr, wc, inst.Gr, inst.Gc, cfg);
        const double mean = X_tilde.mean();
        CHECK((fit.U.array() - mean).abs().maxCoeff() < 1e-6);
        CHECK(fit.n_r == 1);
        CHECK(fit.n_c == 1);
    }
    SUBCASE("reaches the subgradient oracle on a random instance") {
        const auto inst = make_instance(5, 4, 72, 0.0);
        const MatrixXd& X_tilde = inst.X.values;
        const VectorXd wr = VectorXd::Ones(static_cast<Index>(inst.Gr.edges.size()));
        const VectorXd wc = VectorXd::Ones(static_cast<Index>(inst.Gc.edges.size()));
        SolverConfig<double> tight = cfg;
        tight.tol_inner = 1e-10;
        tight.max_inner = 20000;
        const auto fit = convex_bicluster(X_tilde, 0.4, 0.6, wr, wc, inst.Gr, inst.Gc, tight);
        const auto oracle_inst = to_oracle(X_tilde, inst.Gr, inst.Gc, wr, wc, 0.4, 0.6);
        const double oracle_best = oracles::subgradient_best_objective(oracle_inst, 200000, 0.05);
        const double direct = oracles::convex_objective(oracle_inst, fit.U);
        CHECK(direct <= oracle_best + 1e-5 * std::abs(oracle_best));
        CHECK(fit.objective == doctest::Approx(direct).epsilon(1e-9));
    }
    SUBCASE("weight vector length must match the edge count") {
        const auto inst = make_instance(4, 3, 73, 0.0);
        const VectorXd bad = VectorXd::Ones(1);
        const VectorXd wc = VectorXd::Ones(static_cast<Index>(inst.Gc.edges.size()));
        CHECK_THROWS_AS(
            convex_bicluster(inst.X.values, 1.0, 1.0, bad, wc, inst.Gr, inst.Gc, cfg),
            ValidationError);
    }
    SUBCASE("unreachable tolerance raises a solver error") {
        const auto inst = make_instance(5, 4, 74, 0.0);
        const VectorXd wr = VectorXd::Ones(static_cast<Index>(inst.Gr.edges.size()));
        const VectorXd wc = VectorXd::Ones(static_cast<Index>(inst.Gc.edges.size()));
        SolverConfig<double> starved = cfg;
        starved.max_inner = 2;
        CHECK_THROWS_AS(
            convex_bicluster(inst.X.values, 1.0, 1.0, wr, wc, inst.Gr, inst.Gc, starved),
            SolverError);
    }
}

TEST_CASE("co_cluster_missing") {
    SolverConfig<double> cfg;

    SUBCASE("complete data with zero penalties recovers X in one outer iteration") {
        const auto inst = make_instance(5, 4, 80, 0.0);
        const auto fit = co_cluster_missing(inst.X, 0.0, 0.0, inst.Gr, inst.Gc, snowflake, cfg);
        CHECK(fit.U == inst.X.values);
        CHECK(fit.outer_iters <= 2);
        CHECK(fit.X_filled == inst.X.values);
    }
    SUBCASE("overwhelming penalties collapse to the observed mean") {
        const auto inst = make_instance(6, 5, 81, 0.3);
        const double huge = std::ldexp(1.0, 20);
        const auto fit = co_cluster_missing(inst.X, huge, huge, inst.Gr, inst.Gc, snowflake, cfg);
        const double mean = comanifold::observed_mean(inst.X);
        CHECK((fit.U.array() - mean).abs().maxCoeff() < 1e-6);
        CHECK(fit.n_r == 1);
        CHECK(fit.n_c == 1);
    }
    SUBCASE("objective trace never increases") {
        for (std::uint64_t seed : {90u, 91u, 92u}) {
            const auto inst = make_instance(8, 6, seed, 0.3);
            const auto fit = co_cluster_missing(inst.X, 1.0, 1.0, inst.Gr, inst.Gc, snowflake, cfg);
            REQUIRE(fit.objective_trace.size() >= 2);
            for (std::size_t t = 1; t < fit.objective_trace.size(); ++t)
                CHECK(fit.objective_trace[t] <= fit.objective_trace[t - 1] + 1e-10);
            CHECK(fit.n_r_trace.size() == fit.objective_trace.size());
            CHECK(fit.X_filled == fill_with(inst.X, fit.U));
        }
    }
    SUBCASE("restart from the solution is a fixed point") {
        // Sub-ulp tol_outer: the loop stops only when a step yields no computed
        // descent, so the returned point is stationary at working precision.
        SolverConfig<double> tight = cfg;
        tight.tol_outer = 1e-300;
        tight.tol_inner = 1e-10;
        tight.max_inner = 50000;
        tight.max_outer = 500;
        const auto inst = make_instance(8, 6, 95, 0.3);
        const auto first = co_cluster_missing(inst.X, 1.0, 1.0, inst.Gr, inst.Gc, snowflake, tight);
        const auto again = co_cluster_missing(inst.X, 1.0, 1.0, inst.Gr, inst.Gc, snowflake, tight,
                                              &first.U);
        CHECK((again.U - first.U).norm() <= 1e-8);
    }
    SUBCASE("disconnected graphs are rejected up front") {
        const auto inst = make_instance(4, 4, 96, 0.0);
        const auto split = make_graph(4, {{0, 1}, {2, 3}});
        CHECK_THROWS_WITH_AS(
            co_cluster_missing(inst.X, 1.0, 1.0, split, inst.Gc, snowflake, cfg),
            "co_cluster_missing: row graph must be connected", ValidationError);
    }
    SUBCASE("permutation equivariance") {
        const auto inst = make_instance(6, 5, 97, 0.2);
        const auto fit = co_cluster_missing(inst.X, 0.7, 0.9, inst.Gr, inst.Gc, snowflake, cfg);

        std::vector<Index> perm = {3, 0, 5, 1, 4, 2};
        MatrixXd values(6, 5);
        MaskMat mask(6, 5);
        for (Index i = 0; i < 6; ++i) {
            values.row(i) = inst.X.values.row(perm[static_cast<std::size_t>(i)]);
            for (Index j = 0; j < 5; ++j) mask(i, j) = inst.X.mask(perm[static_cast<std::size_t>(i)], j);
        }
        std::vector<Index> inverse(6);
        for (Index i = 0; i < 6; ++i) inverse[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;
        std::vector<std::pair<Index, Index>> relabeled;
        for (const auto& [i, j] : inst.Gr.edges)
            relabeled.emplace_back(inverse[static_cast<std::size_t>(i)],
                                   inverse[static_cast<std::size_t>(j)]);
        const auto Gr_perm = make_graph(6, std::move(relabeled));

        const ObservedMatrix<double> X_perm(values, mask);
        const auto fit_perm =
            co_cluster_missing(X_perm, 0.7, 0.9, Gr_perm, inst.Gc, snowflake, cfg);
        for (Index i = 0; i < 6; ++i)
            CHECK((fit_perm.U.row(i) - fit.U.row(perm[static_cast<std::size_t>(i)])).norm() <= 1e-7);
    }
    SUBCASE("config validation") {
        const auto inst = make_instance(4, 4, 98, 0.0);
        SolverConfig<double> bad = cfg;
        bad.tol_outer = 0.0;
        CHECK_THROWS_AS(co_cluster_missing(inst.X, 1.0, 1.0, inst.Gr, inst.Gc, snowflake, bad),
                        ValidationError);
        bad = cfg;
        bad.max_inner = 0;
        CHECK_THROWS_AS(co_cluster_missing(inst.X, 1.0, 1.0, inst.Gr, inst.Gc, snowflake, bad),
                        ValidationError);
    }
}

TEST_CASE("stronger column fusion never increases the column group count") {
    const auto inst = make_instance(8, 7, 110, 0.2);
    SolverConfig<double> cfg;
    const BiclusterWorkspace<double> ws(inst.Gr, inst.Gc);
    Index prev = std::numeric_limits<Index>::max();
    for (int k = -2; k <= 8; k += 2) {
        const double gamma_c = std::ldexp(1.0, k);
        const auto fit =
            co_cluster_missing(inst.X, 0.25, gamma_c, inst.Gr, inst.Gc, snowflake, cfg, ws);
        CHECK(fit.n_c <= prev);
        prev = fit.n_c;
    }
}
