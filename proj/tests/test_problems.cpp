#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "monosplit/driver.hpp"
#include "monosplit/problems.hpp"
#include "test_support.hpp"

using namespace monosplit;
using testsupport::expect_vec_near;
using testsupport::Gen;

namespace {

/// KKT residual of 0 in N_[lo,hi](x) + Mx + c, computed componentwise.
double box_kkt_violation(const Eigen::MatrixXd& m, const Eigen::VectorXd& c, const Vector& x, double lo, double hi) {
    const Eigen::VectorXd g = m * x.eigen() + c;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        worst = std::max(worst, std::max(lo - xi, xi - hi));
        const bool at_lo = std::abs(xi - lo) <= 1e-12, at_hi = std::abs(xi - hi) <= 1e-12;
        if (at_lo && at_hi) continue;
        if (at_lo) worst = std::max(worst, -g[i]);
        else if (at_hi) worst = std::max(worst, g[i]);
        else worst = std::max(worst, std::abs(g[i]));
    }
    return worst;
}

} // namespace

TEST(MakeSkewVi, RotationInstance) {
    const ProblemInstance p = make_skew_vi(2, 1.0, 0);
    expect_vec_near(*p.solution, {0, 0}, 0);
    EXPECT_EQ(p.lipschitz(), 1.0);
    expect_vec_near((*p.b)(Vector{1, 0}), {0, -1}, 0);
    EXPECT_TRUE(p.a.is_identity());
}

TEST(MakeSkewVi, BoxAwayFromOriginNeedsFaceSearch) {
    SkewViOptions o;
    o.constraint = ViConstraint::box;
    o.box_lo = 1.0;
    o.box_hi = 2.0;
    const ProblemInstance p = make_skew_vi(2, 1.0, 0, o);
    Eigen::Matrix2d m;
    m << 0, 1, -1, 0;
    // The corner (1, 1) is not a solution: -B(1,1) = (-1, 1) is outside the normal cone.
    EXPECT_GT(box_kkt_violation(m, Eigen::Vector2d::Zero(), Vector{1, 1}, 1, 2), 0.5);
    EXPECT_LE(box_kkt_violation(m, Eigen::Vector2d::Zero(), *p.solution, 1, 2), 1e-10);
    expect_vec_near(*p.solution, {1, 2}, 1e-12);
    EXPECT_LE(inclusion_residual(*p.solution, p, 1.0), 1e-8);
}

TEST(MakeSkewVi, ZeroScaleReturnsProjectionOfOrigin) {
    SkewViOptions o;
    o.constraint = ViConstraint::box;
    o.box_lo = 0.5;
    o.box_hi = 3.0;
    const ProblemInstance p = make_skew_vi(4, 0.0, 1, o);
    expect_vec_near(*p.solution, {0.5, 0.5, 0.5, 0.5}, 0);
    EXPECT_TRUE(p.b->is_zero());
    EXPECT_FALSE(p.unique_solution);
}

TEST(MakeSkewVi, Errors) {
    EXPECT_THROW(make_skew_vi(3, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(make_skew_vi(2, -1.0, 0), std::invalid_argument);
}

TEST(MakeSkewViProperty, GeneratedOperatorIsSkewWithDeclaredL) {
    Gen g(51);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = g.even_dim(2, 40);
        const double scale = g.real(0.2, 3.0);
        const ProblemInstance p = make_skew_vi(n, scale, static_cast<std::uint64_t>(t));
        const Eigen::MatrixXd& m = p.b->affine()->matrix.matrix();
        EXPECT_LE((m + m.transpose()).norm(), 1e-12 * scale);
        EXPECT_NEAR(LinearMap::exact_spectral_norm(m), scale, 1e-10 * scale);
        EXPECT_NEAR(p.lipschitz(), scale, 1e-10 * scale);
    }
}

TEST(MakeSkewViProperty, ConstrainedVariantsAreCertified) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        for (auto c : {ViConstraint::box, ViConstraint::hyperplane}) {
            for (auto op : {ViOperator::skew, ViOperator::linear_monotone}) {
                SkewViOptions o;
                o.constraint = c;
                o.op = op;
                o.box_lo = 0.2;
                o.box_hi = 1.5;
                const ProblemInstance p = make_skew_vi(6, 1.0, seed, o);
                EXPECT_LE(inclusion_residual(*p.solution, p, 1.0), 1e-8);
                EXPECT_LE(inclusion_residual(*p.solution, p, 0.1), 1e-8);
            }
        }
    }
}

TEST(GeneratorProperty, SameSeedSameInstance) {
    for (std::uint64_t seed : {0ULL, 7ULL, 12345ULL}) {
        EXPECT_TRUE(make_skew_vi(8, 1.0, seed).x0 == make_skew_vi(8, 1.0, seed).x0);
        EXPECT_TRUE(make_skew_vi(8, 1.0, seed).b->affine()->matrix.matrix() ==
                    make_skew_vi(8, 1.0, seed).b->affine()->matrix.matrix());
        EXPECT_TRUE(*make_composite(10, 12, 0.2, 0.1, seed).solution ==
                    *make_composite(10, 12, 0.2, 0.1, seed).solution);
        EXPECT_TRUE(make_saddle(3, 4, seed).saddle->u_star == make_saddle(3, 4, seed).saddle->u_star);
        EXPECT_TRUE(make_feasibility(5, seed).x0 == make_feasibility(5, seed).x0);
    }
    EXPECT_FALSE(make_skew_vi(8, 1.0, 1).x0 == make_skew_vi(8, 1.0, 2).x0);
}

TEST(MakeComposite, LargeMuGivesZero) {
    const ProblemInstance base = make_composite(10, 15, 0.3, 0.1, 4);
    Gen g(52);
    Eigen::MatrixXd design(10, 15);
    for (auto& e : design.reshaped()) e = g.gauss();
    Eigen::VectorXd rhs(10);
    for (auto& e : rhs) e = g.gauss();
    const double mu = (design.transpose() * rhs).cwiseAbs().maxCoeff();
    const ProblemInstance p = make_composite_from(design, rhs, mu);
    EXPECT_EQ(norm(*p.solution), 0.0);
    EXPECT_LE(inclusion_residual(*base.solution, base, 1.0), 1e-8);
}

TEST(MakeComposite, IdentityDesignWithoutRegularization) {
    const ProblemInstance p = make_composite_from(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(3, -1), 0.0);
    expect_vec_near(*p.solution, {3, -1}, 1e-12);
}

TEST(MakeComposite, OracleSatisfiesOptimality) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ProblemInstance p = make_composite(20, 50, 0.1, 0.1, seed);
        const auto& aff = *p.b->affine();
        const Eigen::VectorXd grad = aff.matrix.matrix() * p.solution->eigen() + aff.offset.eigen();
        for (Eigen::Index i = 0; i < grad.size(); ++i) {
            const double xi = (*p.solution)[static_cast<std::size_t>(i)];
            if (xi != 0.0) EXPECT_NEAR(grad[i], -0.1 * (xi > 0 ? 1 : -1), 1e-9);
            else EXPECT_LE(std::abs(grad[i]), 0.1 + 1e-9);
        }
    }
}

TEST(MakeComposite, Errors) {
    EXPECT_THROW(make_composite(0, 5, 0.1, 0.1, 0), std::invalid_argument);
    EXPECT_THROW(make_composite(5, 5, 1.5, 0.1, 0), std::invalid_argument);
    EXPECT_THROW(make_composite_from(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector3d::Zero(), 0.1), DimensionError);
}

TEST(MakeSaddle, ZeroCouplingDecouples) {
    const ProblemInstance p =
        make_saddle_from(LinearMap::zero(2, 3), Vector{1, 2, 3}, Vector{-1, 4}, Vector{0, 0, 0}, Vector{0, 0});
    expect_vec_near(p.saddle->u_star, {1, 2, 3}, 1e-15);
    expect_vec_near(p.saddle->v_star, {-1, 4}, 1e-15);
}

TEST(MakeSaddle, ScalarInstance) {
    const ProblemInstance p =
        make_saddle_from(LinearMap::identity(1), Vector{0.0}, Vector{0.0}, Vector{1.0}, Vector{1.0});
    expect_vec_near(p.saddle->u_star, {0}, 1e-15);
    expect_vec_near(p.saddle->v_star, {0}, 1e-15);
}

TEST(MakeSaddle, RandomInstanceMatchesIndependentSolve) {
    Gen g(53);
    for (int t = 0; t < 5; ++t) {
        Eigen::MatrixXd k(7, 5);
        for (auto& e : k.reshaped()) e = g.gauss();
        const Vector a = g.vec(5), c = g.vec(7);
        const ProblemInstance p = make_saddle_from(LinearMap(k), a, c, g.vec(5), g.vec(7));
        // Eliminate v: (I + K^T K) u = a - K^T c, then v = c + K u.
        const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(5, 5) + k.transpose() * k;
        const Eigen::VectorXd u = lhs.ldlt().solve(a.eigen() - k.transpose() * c.eigen());
        const Eigen::VectorXd v = c.eigen() + k * u;
        EXPECT_LE((u - p.saddle->u_star.eigen()).norm(), 1e-9);
        EXPECT_LE((v - p.saddle->v_star.eigen()).norm(), 1e-9);
    }
    EXPECT_THROW(make_saddle(0, 3, 0), std::invalid_argument);
}

TEST(MakeFeasibility, PlantedPointSolves) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ProblemInstance p = make_feasibility(4, seed);
        EXPECT_LE(inclusion_residual(*p.solution, p, 1.0), 1e-12);
    }
    EXPECT_THROW(make_feasibility(1, 0), std::invalid_argument);
}

TEST(MakeFeasibility, IdenticalPlanesConvergeToProjection) {
    const Vector n{1, 2, -1};
    const Vector planted{1, 0, 1};
    const Vector x0{3, -1, 2};
    const ProblemInstance p = make_feasibility_from(n, inner(n, planted), n, inner(n, planted), planted, x0);
    SolverConfig cfg;
    cfg.lambda = 1.0;
    const RunResult r = run(Method::dr, p, cfg);
    EXPECT_EQ(r.termination, Termination::converged);
    EXPECT_LE(distance(r.final_state.x_curr, project_hyperplane(x0, n, inner(n, planted))), 1e-8);
}

TEST(MakeFeasibility, TwoLinesDrShadowReachesOrigin) {
    const ProblemInstance p = make_two_lines();
    SolverState s = init_dr(Vector{1, 0}, *p.b_resolvent, 1.0);
    for (int k = 0; k < 200; ++k) s = step_dr(s, p.a, *p.b_resolvent, 1.0);
    EXPECT_LE(norm(s.x_curr), 1e-8);
}

TEST(InclusionResidual, Examples) {
    const ProblemInstance p = make_skew_vi(2, 1.0, 0);
    EXPECT_EQ(inclusion_residual(Vector{0, 0}, p, 0.2), 0.0);
    EXPECT_NEAR(inclusion_residual(Vector{1, 0}, p, 0.2), 0.2, 1e-15);
    EXPECT_THROW(inclusion_residual(Vector{1, 0}, p, 0.0), std::invalid_argument);
}

TEST(BoxFaceSearch, RejectsLargeDimension) {
    EXPECT_THROW(box_face_search(Eigen::MatrixXd::Identity(13, 13), Eigen::VectorXd::Zero(13),
                                 Eigen::VectorXd::Constant(13, 1), Eigen::VectorXd::Constant(13, 2)),
                 std::invalid_argument);
}
