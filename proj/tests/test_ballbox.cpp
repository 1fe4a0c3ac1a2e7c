#include "ccgeo/ballbox.hpp"

#include "ccgeo/systems.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ccgeo;

namespace {

// Hand-built sample: a single constant control in slot j for duration T.
CcSample single_control_sample(const Frame& frame, const Vec& x, int slot, double T,
                               const IntegratorConfig& cfg = {}) {
    CcSample s;
    s.length_bound = T;
    s.control_times = {0.0, T};
    s.controls = Mat::Zero(1, frame.q());
    s.controls(0, slot) = 1.0;
    const int nodes = 16;
    Vec y = x;
    s.times.push_back(0.0);
    s.trace.push_back(y);
    auto rhs = [&frame, slot](double, const Vec& p) { return frame.fields[std::size_t(slot)].eval(p); };
    for (int m = 1; m <= nodes; ++m) {
        y = integrate(rhs, y, T * (m - 1) / nodes, T * m / nodes, cfg);
        s.times.push_back(T * m / nodes);
        s.trace.push_back(y);
    }
    s.target = y;
    return s;
}

CcSample trivial_sample(const Frame& frame, const Vec& x) {
    CcSample s;
    s.length_bound = 1e-6;
    s.control_times = {0.0, 1e-6};
    s.controls = Mat::Zero(1, frame.q());
    s.times = {0.0, 1e-6};
    s.trace = {x, x};
    s.target = x;
    return s;
}

}  // namespace

TEST(BallBox, SampleEndpointsMatchDirectIntegration) {
    // Grushin: switching control (e1 then the bracket slot) against one
    // unsegmented integration of the same non-autonomous system.
    SystemSpec spec = builtin("grushin");
    Frame f = spec.frame();
    Vec x = Vec::Zero(2);
    auto samples = sample_cc_ball(f, x, 0.4, 5, {}, 7);
    ASSERT_EQ(samples.size(), 5u);
    for (const CcSample& s : samples) {
        EXPECT_LT(s.length_bound, 0.4);
        // repeat the whole integration in one sweep as the oracle
        auto rhs = [&f, &s](double t, const Vec& y) -> Vec {
            const Vec b = s.control_at(t);
            Vec v = Vec::Zero(2);
            for (int j = 0; j < f.q(); ++j)
                if (b[j] != 0.0) v += b[j] * f.fields[std::size_t(j)].eval(y);
            return v;
        };
        // integrate segment-aligned to keep RK order across control jumps
        Vec y = x;
        for (std::size_t k = 0; k + 1 < s.control_times.size(); ++k)
            y = integrate(rhs, y, s.control_times[k], s.control_times[k + 1]);
        EXPECT_LT((y - s.target).norm(), 1e-8);
        // subunit controls
        for (long r = 0; r < s.controls.rows(); ++r)
            EXPECT_LE(s.controls.row(r).norm(), 1.0 + 1e-12);
    }
}

TEST(BallBox, SingleControlIsPlainFlow) {
    SystemSpec spec = builtin("heisenberg");
    Frame f = spec.frame();
    Vec x = Vec::Zero(3);
    CcSample s = single_control_sample(f, x, 0, 0.3);
    EXPECT_LT((s.target - flow(f.fields[0], x, 0.3)).norm(), 1e-9);
}

TEST(BallBox, SolveTrivialTarget) {
    SystemSpec spec = builtin("grushin");
    Frame f = spec.frame();
    Vec x(2);
    x << 0.7, -0.1;
    EMapSolve sol = solve_e_map(f, x, trivial_sample(f, x), 0.5);
    ASSERT_TRUE(sol.success);
    EXPECT_LT(sol.h.norm(), 1e-7);
    EXPECT_LT(sol.residual, 1e-9);
}

TEST(BallBox, SolveFlowTargetNearFirstOrder) {
    // target = flow(Y_1, x, t): h = t e_1 solves exactly; the lift tracks it.
    SystemSpec spec = builtin("grushin");
    Frame f = spec.frame();
    Vec x(2);
    x << 0.8, 0.2;
    const double t = 0.05;
    CcSample s = single_control_sample(f, x, 0, t);
    EMapSolve sol = solve_e_map(f, x, s, 0.5);
    ASSERT_TRUE(sol.success);
    EXPECT_LT(sol.residual, 1e-6);
    Vec expected = Vec::Zero(f.q());
    expected[0] = t;
    EXPECT_LT((sol.h - expected).norm(), 1e-2);
}

TEST(BallBox, SolveHeisenbergBracketTarget) {
    SystemSpec spec = builtin("heisenberg");
    Frame f = spec.frame();
    Vec x = Vec::Zero(3);
    auto samples = sample_cc_ball(f, x, 0.1, 8, {}, 3);
    for (const CcSample& s : samples) {
        EMapSolve sol = solve_e_map(f, x, s, 0.5);
        ASSERT_TRUE(sol.success) << to_string(sol.failure);
        EXPECT_LT(sol.residual, 1e-6);
        EXPECT_LT(sol.h.norm(), 0.5);
    }
}

TEST(BallBox, AbelianVerifyRecoversDisplacements) {
    Polynomial one = Polynomial::constant(2, 1.0), zero(2);
    Frame f = enumerate_frame({VectorField::from_polynomials({one, zero}),
                               VectorField::from_polynomials({zero, one})},
                              2);
    Vec x(2);
    x << 0.3, 0.5;
    BallBoxReport rep = ball_box_verify(f, x, 0.5, 0.4, 20, {}, 11);
    EXPECT_EQ(rep.success_rate, 1.0);
    for (const auto& row : rep.rows) {
        ASSERT_TRUE(row.solved);
        // E(h) = x + (h1 + ..., h2 + ...); the degree-1 slots carry the
        // displacement up to the least-norm split with zero bracket columns.
        Vec disp = row.target - x;
        Vec eh = e_map(f, x, row.h);
        EXPECT_LT((eh - row.target).norm(), 1e-6);
        EXPECT_NEAR(row.h_norm, row.h.norm(), 1e-14);
        EXPECT_LT(row.h_norm, 0.5);
        EXPECT_GT(disp.norm(), 0.0);
    }
}

TEST(BallBox, GrushinRegularAndDegenerateBasePoints) {
    SystemSpec spec = builtin("grushin");
    Frame f = spec.frame();
    Vec regular(2), degenerate(2);
    regular << 1.0, 0.0;
    degenerate << 0.0, 0.0;
    BallBoxReport r1 = ball_box_verify(f, regular, 0.6, 0.25, 15, {}, 5);
    EXPECT_EQ(r1.success_rate, 1.0) << "regular point";
    BallBoxReport r0 = ball_box_verify(f, degenerate, 0.6, 0.25, 15, {}, 5);
    EXPECT_EQ(r0.success_rate, 1.0) << "degenerate point";
    // Anisotropic scaling at the degenerate point: |h| stays within the
    // homogeneous ball of radius ~ delta.
    for (const auto& row : r0.rows) {
        HVector hv{row.h, f.degrees};
        EXPECT_LT(homogeneous_norm(hv), 3.0 * r0.delta);
    }
}

TEST(BallBox, MonotonicityInDelta) {
    SystemSpec spec = builtin("grushin");
    Frame f = spec.frame();
    Vec x(2);
    x << 0.5, 0.0;
    BallBoxReport big = ball_box_verify(f, x, 0.45, 0.8, 20, {}, 13);
    BallBoxReport small = ball_box_verify(f, x, 0.45, 0.2, 20, {}, 13);
    EXPECT_GE(small.success_rate, big.success_rate);
    EXPECT_EQ(small.success_rate, 1.0);
}

TEST(BallBox, CrSphereReducedRankSolve) {
    // Orbit dimension 3 in ambient R^4: the solve runs in the tangent basis
    // and the residual is measured in the ambient norm.
    SystemSpec spec = builtin("cr-sphere");
    Frame f = spec.frame();
    Vec x(4);
    x << 1, 0, 0, 0;
    auto samples = sample_cc_ball(f, x, 0.1, 6, {}, 17);
    for (const CcSample& s : samples) {
        EMapSolve sol = solve_e_map(f, x, s, 0.6);
        ASSERT_TRUE(sol.success) << to_string(sol.failure);
        EXPECT_LT(sol.residual, 1e-6);
    }
}

TEST(BallBox, CalibrationFindsWorkableDelta) {
    SystemSpec spec = builtin("heisenberg");
    Frame f = spec.frame();
    auto [eps, delta] = calibrate_ballbox(f, spec.base_point, 0.5, 0.8, 16, {}, 19);
    EXPECT_GT(delta, 0.0);
    BallBoxReport rep = ball_box_verify(f, spec.base_point, eps, delta, 30, {}, 23);
    EXPECT_EQ(rep.success_rate, 1.0);
}

TEST(BallBox, CrSphereUniformityAcrossBasePoints) {
    // The same (eps, delta) works at widely separated base points of the
    // sphere orbit; solved h stay inside the box and residuals are ambient.
    SystemSpec spec = builtin("cr-sphere");
    Frame f = spec.frame();
    const double eps = 0.6, delta = 0.15;
    SplitMix64 rng(303);
    for (int p = 0; p < 20; ++p) {
        Vec x(4);
        for (int i = 0; i < 4; ++i) x[i] = rng.uniform(-1.0, 1.0);
        if (x.norm() < 0.3) x[0] += 1.0;
        x.normalize();  // base point on the unit sphere
        BallBoxReport rep = ball_box_verify(f, x, eps, delta, 15, {}, 400 + p);
        EXPECT_EQ(rep.success_rate, 1.0) << "base point " << p;
        for (const auto& row : rep.rows) {
            if (!row.solved) continue;
            EXPECT_LT(row.h_norm, eps);
            EXPECT_LE(row.residual, 1e-6);
        }
    }
}

TEST(BallBox, CalibrationDescendsWhenEpsIsTight) {
    // With a small h-box the largest workable delta is well below delta_max,
    // so the bisection has to descend before refining.
    SystemSpec spec = builtin("heisenberg");
    Frame f = spec.frame();
    auto [eps, delta] = calibrate_ballbox(f, spec.base_point, 0.12, 0.8, 12, {}, 29);
    EXPECT_EQ(eps, 0.12);
    EXPECT_GT(delta, 0.0);
    EXPECT_LT(delta, 0.56);  // the immediate-pass branch would give 0.56
    BallBoxReport rep = ball_box_verify(f, spec.base_point, eps, delta, 25, {}, 31);
    EXPECT_EQ(rep.success_rate, 1.0);
}

TEST(BallBox, SiegelDegenerateOrigin) {
    // Step-4 system at the degenerate axis: the vertical direction needs the
    // length-4 bracket slots, and the solve still succeeds.
    SystemSpec spec = builtin("siegel-degenerate");
    Frame f = spec.frame();
    BallBoxReport rep = ball_box_verify(f, spec.base_point, 0.6, 0.1, 6, {}, 5);
    EXPECT_EQ(rep.success_rate, 1.0);
    for (const auto& row : rep.rows) EXPECT_LE(row.residual, 1e-6);
}
