#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "monosplit/dynamics.hpp"
#include "monosplit/problems.hpp"
#include "monosplit/solvers.hpp"
#include "test_support.hpp"

using namespace monosplit;
using testsupport::expect_vec_near;

namespace {

IntegratorOptions opts(double h, double horizon, Scheme s = Scheme::euler) {
    IntegratorOptions o;
    o.h = h;
    o.horizon = horizon;
    o.scheme = s;
    return o;
}

void expect_well_formed(const Trajectory& t) {
    ASSERT_EQ(t.times.size(), t.points.size());
    ASSERT_EQ(t.times.size(), t.dz_norm.size());
    ASSERT_FALSE(t.times.empty());
    EXPECT_EQ(t.times.front(), 0.0);
    for (std::size_t i = 1; i < t.times.size(); ++i) ASSERT_GT(t.times[i], t.times[i - 1]);
}

} // namespace

TEST(DrFlow, ZeroOperatorsGiveConstantTrajectory) {
    const Trajectory t = integrate_dr_flow(zero_resolvent(), zero_resolvent(), 1.0, Vector{2, -3}, opts(0.01, 1));
    expect_well_formed(t);
    for (const auto& p : t.points) EXPECT_TRUE(p == (Vector{2, -3}));
}

TEST(DrFlow, TwoLinesApproachFixedSet) {
    const ProblemInstance p = make_two_lines();
    const Trajectory t = integrate_dr_flow(p.a, *p.b_resolvent, 1.0, Vector{1, 0}, opts(1e-3, 20));
    expect_well_formed(t);
    const Vector z0 = sample_at(t, 0), z10 = sample_at(t, 10), z20 = sample_at(t, 20);
    EXPECT_LT(distance(z10, z20), distance(z0, z10));
    EXPECT_EQ(t.times.back(), 20.0);
}

TEST(DrFlow, EulerIsFirstOrder) {
    const ProblemInstance p = make_two_lines();
    auto endpoint = [&](double h) {
        return integrate_dr_flow(p.a, *p.b_resolvent, 1.0, Vector{1, 0}, opts(h, 2)).points.back();
    };
    EXPECT_NEAR(self_convergence_order(endpoint, 0.02), 1.0, 0.1);
}

TEST(DrFlow, Rk4IsHigherOrder) {
    const ForwardOp b = skew_operator(2);
    const ResolventOp jb = resolvent_of_forward(b);
    auto endpoint = [&](double h) {
        return integrate_dr_flow(l1_resolvent(0.1), jb, 1.0, Vector{1, 0.5}, opts(h, 1, Scheme::rk4)).points.back();
    };
    EXPECT_GT(self_convergence_order(endpoint, 0.1), 3.0);
}

TEST(DrFlow, StepGuard) {
    const ProblemInstance p = make_two_lines();
    EXPECT_THROW(integrate_dr_flow(p.a, *p.b_resolvent, 0.1, Vector{1, 0}, opts(0.02, 1)), std::invalid_argument);
    IntegratorOptions o = opts(0.02, 1);
    o.enforce_step_guard = false;
    EXPECT_NO_THROW(integrate_dr_flow(p.a, *p.b_resolvent, 0.1, Vector{1, 0}, o));
    EXPECT_THROW(integrate_dr_flow(p.a, *p.b_resolvent, 1.0, Vector{1, 0}, opts(0.0, 1)), std::invalid_argument);
    EXPECT_THROW(integrate_dr_flow(p.a, *p.b_resolvent, 1.0, Vector{1, 0}, opts(0.01, -1)), std::invalid_argument);
}

TEST(ShadowFlow, ZeroBIsProximalFlow) {
    const ResolventOp a = l1_resolvent(0.5);
    const double lambda = 0.8, h = 0.01;
    const Trajectory t = integrate_shadow_flow(a, zero_forward(2), lambda, Vector{2, -1}, opts(h, 1));
    // Independent Euler integration of x' = J_{lambda A}(x) - x with a plain loop.
    std::vector<double> x{2, -1};
    for (int n = 0; n < 100; ++n) {
        for (auto& e : x) {
            const double shrunk = std::abs(e) > lambda * 0.5 ? e - std::copysign(lambda * 0.5, e) : 0.0;
            e += h * (shrunk - e);
        }
    }
    expect_vec_near(t.points.back(), x, 1e-12);
}

TEST(ShadowFlow, SkewNormDecreases) {
    const Trajectory t = integrate_shadow_flow(zero_resolvent(), skew_operator(2), 0.2, Vector{1, 0}, opts(1e-3, 5));
    expect_well_formed(t);
    for (std::size_t i = 1; i < t.points.size(); ++i) ASSERT_LT(norm(t.points[i]), norm(t.points[i - 1]));
}

TEST(ShadowFlow, MatchesShadowOfDrFlow) {
    const ForwardOp b = skew_operator(2);
    const double lambda = 0.2;
    const Vector x0{1, 0};
    const Vector z0 = axpy(lambda, b(x0), x0);
    const ResolventOp a = box_resolvent(Vector{-0.5, -0.5}, Vector{0.5, 0.5});
    const Trajectory shadow = integrate_shadow_flow(a, b, lambda, x0, opts(1e-3, 2));
    const Trajectory dr = shadow_of(integrate_dr_flow(a, resolvent_of_forward(b), lambda, z0, opts(1e-3, 2)),
                                    resolvent_of_forward(b), lambda);
    double worst = 0.0;
    for (std::size_t i = 0; i < shadow.points.size(); ++i)
        worst = std::max(worst, distance(shadow.points[i], dr.points[i]));
    EXPECT_LE(worst, 1e-3);
    const std::vector<Vector> ys = companion_y(shadow, b, lambda);
    EXPECT_LE(distance(ys.front(), lambda * b(x0)), 1e-12);
}

TEST(ShadowFlow, RequiresContraction) {
    EXPECT_THROW(integrate_shadow_flow(zero_resolvent(), skew_operator(2), 1.0, Vector{1, 0}, opts(0.01, 1)),
                 ContractionError);
}

TEST(Dyn4Flow, ZeroBIsProximalFlow) {
    const ResolventOp a = l1_resolvent(0.5);
    const Trajectory d = integrate_dyn4_flow(a, zero_forward(2), 0.8, Vector{2, -1}, opts(0.01, 1));
    const Trajectory s = integrate_shadow_flow(a, zero_forward(2), 0.8, Vector{2, -1}, opts(0.01, 1));
    EXPECT_TRUE(d.experimental);
    ASSERT_EQ(d.points.size(), s.points.size());
    for (std::size_t i = 0; i < d.points.size(); ++i) EXPECT_LE(distance(d.points[i], s.points[i]), 1e-12);
}

TEST(Dyn4Flow, SkewNormDecreases) {
    const Trajectory t = integrate_dyn4_flow(zero_resolvent(), skew_operator(2), 0.2, Vector{1, 0}, opts(1e-3, 5));
    for (std::size_t i = 2; i < t.points.size(); ++i) ASSERT_LT(norm(t.points[i]), norm(t.points[i - 1]));
}

TEST(Dyn4Flow, AgreesWithShadowFlowToFirstOrder) {
    const ForwardOp b = skew_operator(2);
    auto gap = [&](double h) {
        const Vector d = integrate_dyn4_flow(zero_resolvent(), b, 0.2, Vector{1, 0}, opts(h, 1)).points.back();
        const Vector s = integrate_shadow_flow(zero_resolvent(), b, 0.2, Vector{1, 0}, opts(h, 1)).points.back();
        return distance(d, s);
    };
    const double g1 = gap(0.01), g2 = gap(0.005);
    EXPECT_LT(g1, 0.05);
    EXPECT_LT(g2, 0.7 * g1);
}

TEST(ForwardFlow, SkewPreservesNormUnderRk4) {
    const Trajectory t = integrate_forward_flow(skew_operator(2), Vector{1, 0}, opts(0.01, 3, Scheme::rk4));
    EXPECT_NEAR(norm(t.points.back()), 1.0, 1e-8);
    expect_vec_near(t.points.back(), {std::cos(3.0), std::sin(3.0)}, 1e-8);
}

TEST(TrajectoryVsIterates, ConstantCaseIsZero) {
    const Trajectory t = integrate_forward_flow(zero_forward(2), Vector{1, 2}, opts(0.1, 1));
    EXPECT_EQ(trajectory_vs_iterates(t, {Vector{1, 2}, Vector{1, 2}, Vector{1, 2}}, 0.5), 0.0);
    EXPECT_EQ(trajectory_vs_iterates(t, {Vector{1, 2}}, 0.5), 0.0);
}

TEST(TrajectoryVsIterates, DeviationShrinksWithStep) {
    const ForwardOp b = skew_operator(2);
    const double horizon = 2.0;
    const Trajectory flow = integrate_forward_flow(b, Vector{1, 0}, opts(1e-4, horizon, Scheme::rk4));
    std::vector<double> devs;
    for (double lambda : {0.2, 0.1, 0.05}) {
        SolverState s = init_primal(Vector{1, 0});
        std::vector<Vector> iterates{s.x_curr};
        const auto steps = static_cast<int>(std::lround(horizon / lambda));
        for (int k = 0; k < steps; ++k) {
            s = step_gradient(s, b, lambda);
            iterates.push_back(s.x_curr);
        }
        devs.push_back(trajectory_vs_iterates(flow, iterates, lambda));
    }
    EXPECT_GT(devs[0], devs[1]);
    EXPECT_GT(devs[1], devs[2]);
}

TEST(SampleAt, InterpolatesAndRejectsOutOfRange) {
    const Trajectory t = integrate_forward_flow(affine_forward("id", LinearMap::identity(1)), Vector{1},
                                                opts(0.5, 1.0));
    // Euler: 1, 0.5, 0.25 at t = 0, 0.5, 1.
    expect_vec_near(sample_at(t, 0.25), {0.75}, 1e-15);
    expect_vec_near(sample_at(t, 1.0), {0.25}, 1e-15);
    EXPECT_THROW(sample_at(t, 1.5), std::out_of_range);
    EXPECT_THROW(sample_at(t, -0.1), std::out_of_range);
}

TEST(Trajectory, LastStepLandsOnHorizon) {
    const Trajectory t = integrate_forward_flow(skew_operator(2), Vector{1, 0}, opts(0.3, 1.0));
    EXPECT_EQ(t.times.back(), 1.0);
    EXPECT_EQ(t.times.size(), 5u);
}

TEST(Trajectory, RecordEveryThinsOutput) {
    IntegratorOptions o = opts(0.01, 1.0);
    o.record_every = 10;
    const Trajectory t = integrate_forward_flow(skew_operator(2), Vector{1, 0}, o);
    EXPECT_EQ(t.points.size(), 11u);
}

TEST(Trajectory, SquaredSpeedIntegral) {
    // x' = -x from 1: |x'|^2 = e^{-2t}, integral over [0, 1] is (1 - e^{-2}) / 2.
    const Trajectory t =
        integrate_forward_flow(affine_forward("id", LinearMap::identity(1)), Vector{1}, opts(1e-3, 1.0, Scheme::rk4));
    EXPECT_NEAR(integral_of_squared_speed(t), 0.5 * (1 - std::exp(-2.0)), 1e-6);
}

TEST(Trajectory, CsvHeader) {
    const Trajectory t = integrate_forward_flow(skew_operator(2), Vector{1, 0}, opts(0.5, 0.5));
    std::ostringstream out;
    write_trajectory_csv(out, t);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "t,x1,x2,dz_norm");
}
