#pragma once

#include "ccgeo/common.hpp"
#include "ccgeo/fields.hpp"
#include "ccgeo/flow.hpp"
#include "ccgeo/frame.hpp"
#include "ccgeo/lifting.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ccgeo {

/// One target generated by integrating a subunit path from the base point:
/// a piecewise-constant control b with |b(t)|_2 <= 1 run for time T < delta,
/// so T bounds the Carnot-Caratheodory distance to the target from above.
struct CcSample {
    Vec target;
    double length_bound = 0.0;          // duration T
    std::vector<double> control_times;  // K+1 breakpoints in [0, T]
    Mat controls;                       // K x q constant control rows
    std::vector<double> times;          // trace grid (breakpoint-aligned)
    std::vector<Vec> trace;             // integrated subunit path

    Vec control_at(double t) const {
        std::size_t k = 0;
        while (k + 2 < control_times.size() && control_times[k + 1] <= t) ++k;
        return controls.row(long(k)).transpose();
    }
};

/// Integrate `count` random subunit paths of duration < delta from x and
/// return their endpoints with CC-length bounds. Controls are piecewise
/// constant over `segments` pieces with |b|_2 <= 1; the trace is recorded on
/// a breakpoint-aligned grid for later lifting.
inline std::vector<CcSample> sample_cc_ball(const Frame& frame, const Vec& x, double delta,
                                            int count, const IntegratorConfig& cfg = {},
                                            std::uint64_t seed = 1, int segments = 4,
                                            int nodes_per_segment = 6) {
    if (delta <= 0.0) throw SpecError("sample_cc_ball: delta must be positive");
    const int q = frame.q();
    SplitMix64 rng(seed);
    std::vector<CcSample> out;
    out.reserve(std::size_t(count));
    for (int c = 0; c < count; ++c) {
        CcSample s;
        s.length_bound = delta * rng.uniform(0.3, 0.95);
        s.controls = Mat(segments, q);
        for (int k = 0; k < segments; ++k) {
            Vec b(q);
            for (int j = 0; j < q; ++j) b[j] = rng.uniform(-1.0, 1.0);
            const double mag = rng.uniform(0.6, 1.0);
            if (b.norm() > 0.0) b *= mag / b.norm();
            s.controls.row(k) = b.transpose();
        }
        s.control_times.resize(std::size_t(segments) + 1);
        for (int k = 0; k <= segments; ++k)
            s.control_times[std::size_t(k)] = s.length_bound * double(k) / segments;

        auto rhs = [&frame, &s](double t, const Vec& y) -> Vec {
            const Vec b = s.control_at(t);
            Vec v = Vec::Zero(y.size());
            for (int j = 0; j < frame.q(); ++j)
                if (b[j] != 0.0) v += b[j] * frame.fields[std::size_t(j)].eval(y);
            return v;
        };

        Vec y = x;
        s.times.push_back(0.0);
        s.trace.push_back(y);
        for (int k = 0; k < segments; ++k) {
            const double t0 = s.control_times[std::size_t(k)];
            const double t1 = s.control_times[std::size_t(k) + 1];
            for (int m = 1; m <= nodes_per_segment; ++m) {
                const double ta = t0 + (t1 - t0) * (m - 1) / nodes_per_segment;
                const double tb = t0 + (t1 - t0) * m / nodes_per_segment;
                y = integrate(rhs, y, ta, tb, cfg);
                s.times.push_back(tb);
                s.trace.push_back(y);
            }
        }
        s.target = y;
        out.push_back(std::move(s));
    }
    return out;
}

struct EMapSolve {
    bool success = false;
    Vec h;
    double residual = std::numeric_limits<double>::infinity();  // ambient |E_x(h) - target|
    enum class Failure { none, left_ball, rank_deficient, blowup, residual } failure =
        Failure::none;
};

inline const char* to_string(EMapSolve::Failure f) {
    switch (f) {
        case EMapSolve::Failure::none: return "none";
        case EMapSolve::Failure::left_ball: return "left-ball";
        case EMapSolve::Failure::rank_deficient: return "rank-deficient";
        case EMapSolve::Failure::blowup: return "blow-up";
        case EMapSolve::Failure::residual: return "residual";
    }
    return "?";
}

/// Solve E_x(h) = target with |h| < eps by horizontal lifting of the
/// generating subunit trace through the submersion h -> E_x(h) (differential
/// from e_jacobian, chord continuation). When the frame rank p at x is below
/// the ambient dimension (targets generated on the orbit), the lift runs in
/// an orthonormal basis of the tangent span at x; the residual is always
/// measured in the ambient norm.
inline EMapSolve solve_e_map(const Frame& frame, const Vec& x, const CcSample& sample, double eps,
                             const IntegratorConfig& cfg = {}, double residual_tol = 1e-6,
                             double fd_step = 1e-6) {
    const int q = frame.q();
    const int n = frame.dim();
    EMapSolve out;
    out.h = Vec::Zero(q);

    const auto rb = detail::range_basis(frame.values_at(x), 1e-9);
    const bool reduced = rb.rank < n;
    const Mat U = rb.U;  // n x p

    Submersion E;
    E.dom_dim = q;
    E.codom_dim = reduced ? rb.rank : n;
    E.center = Vec::Zero(q);
    E.radius = 3.0 * eps;  // runaway guard; the |h| < eps check is at the end
    E.eval = [&frame, &x, &cfg, reduced, U](const Vec& h) -> Vec {
        const Vec v = e_map(frame, x, h, cfg);
        return reduced ? Vec(U.transpose() * v) : v;
    };
    E.jacobian = [&frame, &x, &cfg, reduced, U, fd_step](const Vec& h) -> Mat {
        const Mat J = e_jacobian(frame, x, h, fd_step, cfg, /*tight_tol=*/false);
        return reduced ? Mat(U.transpose() * J) : J;
    };

    TargetPath path;
    path.times.reserve(sample.times.size());
    path.values.reserve(sample.times.size());
    const double T = sample.length_bound;
    for (std::size_t i = 0; i < sample.times.size(); ++i) {
        path.times.push_back(sample.times[i] / T);
        path.values.push_back(reduced ? Vec(U.transpose() * sample.trace[i]) : sample.trace[i]);
    }
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i)
        path.speed_bound = std::max(path.speed_bound,
                                    (path.values[i + 1] - path.values[i]).norm() /
                                        (path.times[i + 1] - path.times[i]));

    LiftOptions opt;
    opt.chord = true;
    opt.chord_refresh = 2;
    opt.projection_tol = 1e-9;
    LiftResult lift = horizontal_lift(E, path, Vec::Zero(q), cfg, opt);
    switch (lift.exit) {
        case LiftExit::completed: break;
        case LiftExit::left_domain:
            out.failure = EMapSolve::Failure::left_ball;
            return out;
        case LiftExit::rank_deficient:
            out.failure = EMapSolve::Failure::rank_deficient;
            return out;
        case LiftExit::blowup:
            out.failure = EMapSolve::Failure::blowup;
            return out;
    }

    Vec h = lift.theta.back();
    // ambient polish
    double resid = (e_map(frame, x, h, cfg) - sample.target).norm();
    for (int it = 0; it < 4 && resid > 0.1 * residual_tol; ++it) {
        try {
            const Mat J = E.jacobian(h);
            const Vec r = E.eval(h) - path.values.back();
            h -= least_norm_solve(J, r);
        } catch (const RankDeficientError&) {
            break;
        }
        resid = (e_map(frame, x, h, cfg) - sample.target).norm();
    }

    out.h = h;
    out.residual = resid;
    if (h.norm() >= eps) {
        out.failure = EMapSolve::Failure::left_ball;
        return out;
    }
    if (!(resid <= residual_tol)) {
        out.failure = EMapSolve::Failure::residual;
        return out;
    }
    out.success = true;
    return out;
}

struct BallBoxReport {
    Vec x;
    double eps = 0.0, delta = 0.0;
    struct Row {
        Vec target;
        double length_bound = 0.0;
        bool solved = false;
        Vec h;
        double h_norm = 0.0;
        double residual = 0.0;
        std::string failure = "none";
    };
    std::vector<Row> rows;
    double success_rate = 0.0;
    bool passed() const { return success_rate == 1.0; }
};

/// Generate `count` CC-reachable targets within distance delta of x and try
/// to solve E_x(h) = target with |h| < eps for each; the verification passes
/// when every target is solved.
inline BallBoxReport ball_box_verify(const Frame& frame, const Vec& x, double eps, double delta,
                                     int count, const IntegratorConfig& cfg = {},
                                     std::uint64_t seed = 1) {
    BallBoxReport rep;
    rep.x = x;
    rep.eps = eps;
    rep.delta = delta;
    int solved = 0;
    for (CcSample& s : sample_cc_ball(frame, x, delta, count, cfg, seed)) {
        BallBoxReport::Row row;
        row.target = s.target;
        row.length_bound = s.length_bound;
        EMapSolve sol = solve_e_map(frame, x, s, eps, cfg);
        row.solved = sol.success;
        row.h = sol.h;
        row.h_norm = sol.h.norm();
        row.residual = sol.residual;
        row.failure = to_string(sol.failure);
        solved += row.solved ? 1 : 0;
        rep.rows.push_back(std::move(row));
    }
    rep.success_rate = count > 0 ? double(solved) / count : 1.0;
    return rep;
}

/// Calibrate delta for a fixed eps at one base point by bisection: find the
/// largest delta in (0, delta_max] whose verification passes, then apply a
/// safety factor. The returned pair (eps, delta) is meant to be frozen and
/// reused at every other base point of the same system.
inline std::pair<double, double> calibrate_ballbox(const Frame& frame, const Vec& x,
                                                   double eps = 0.5, double delta_max = 0.8,
                                                   int count = 32,
                                                   const IntegratorConfig& cfg = {},
                                                   std::uint64_t seed = 1) {
    auto passes = [&](double delta) {
        return ball_box_verify(frame, x, eps, delta, count, cfg, seed).passed();
    };
    double hi = delta_max;
    double lo = 0.0;
    if (passes(hi)) return {eps, 0.7 * hi};
    for (int it = 0; it < 8 && lo == 0.0; ++it) {
        hi *= 0.5;
        if (hi < 1e-4) throw SpecError("calibrate_ballbox: no workable delta found");
        if (passes(hi)) lo = hi;
    }
    double fail = 2.0 * lo;
    for (int it = 0; it < 4; ++it) {
        const double mid = 0.5 * (lo + fail);
        if (passes(mid))
            lo = mid;
        else
            fail = mid;
    }
    // The bisection had to descend, so the feasibility boundary is nearby
    // and sample-to-sample variation matters; take a stronger margin than in
    // the immediate-pass branch.
    return {eps, 0.5 * lo};
}

}  // namespace ccgeo
