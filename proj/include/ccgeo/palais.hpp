#pragma once

#include "ccgeo/common.hpp"
#include "ccgeo/fields.hpp"
#include "ccgeo/flow.hpp"

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace ccgeo {

/// Piecewise-constant control b: [0,T] -> R^q with |b(t)|_inf <= bound.
struct ControlSchedule {
    std::vector<double> breakpoints;  // increasing, starts at 0
    std::vector<Vec> values;          // values[k] on [breakpoints[k], breakpoints[k+1])
    double bound = 1.0;

    static ControlSchedule constant(Vec b, double T, double bound = 1.0) {
        ControlSchedule s;
        s.breakpoints = {0.0, T};
        s.values = {std::move(b)};
        s.bound = bound;
        s.validate();
        return s;
    }

    /// Alternate between two coordinate controls e_i and e_j with the given
    /// period (half period each) up to time T.
    static ControlSchedule square_wave(int q, int i, int j, double period, double T,
                                       double bound = 1.0) {
        ControlSchedule s;
        s.bound = bound;
        const double half = 0.5 * period;
        s.breakpoints.push_back(0.0);
        for (long k = 1; s.breakpoints.back() < T; ++k) {
            const double next = std::min(T, half * double(k));
            if (next <= s.breakpoints.back()) break;
            Vec b = Vec::Zero(q);
            b[(k % 2 == 1) ? i : j] = bound;
            s.values.push_back(std::move(b));
            s.breakpoints.push_back(next);
        }
        return s;
    }

    void validate() const {
        if (breakpoints.size() != values.size() + 1 || breakpoints.empty())
            throw SpecError("ControlSchedule: breakpoints/values mismatch");
        for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
            if (breakpoints[k + 1] <= breakpoints[k])
                throw SpecError("ControlSchedule: breakpoints not increasing");
            if (values[k].lpNorm<Eigen::Infinity>() > bound + 1e-12)
                throw SpecError("ControlSchedule: |b|_inf exceeds the bound");
        }
    }

    double horizon() const { return breakpoints.back(); }

    const Vec& at(double t) const {
        std::size_t k = 0;
        while (k + 2 < breakpoints.size() && breakpoints[k + 1] <= t) ++k;
        return values[k];
    }
};

enum class IntegrationMode { direct, renewal };

inline const char* to_string(IntegrationMode m) {
    return m == IntegrationMode::direct ? "direct" : "renewal";
}

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> points;
    std::vector<double> step_sizes;
    IntegrationMode mode = IntegrationMode::direct;
    std::optional<double> blowup_time;
    std::vector<double> renewal_anchors;  // chunk re-anchor times (renewal mode)
};

/// Integrate the non-autonomous Cauchy problem dgamma/dt = sum_j b_j(t)
/// Y_j(gamma) from x up to time T. Steps never straddle control breakpoints,
/// so the RK order survives the discontinuous controls. Renewal mode
/// advances in chunks of duration renewal_delta/2 and re-anchors the
/// integration at each chunk end; on systems with globally bounded structure
/// coefficients the renewal iteration must not blow up, so a set blowup_time
/// on a renewal trajectory reports a hypothesis violation.
inline Trajectory integrate_cauchy(const Frame& frame, const Vec& x,
                                   const ControlSchedule& schedule, double T, IntegrationMode mode,
                                   const IntegratorConfig& cfg = {}, double renewal_delta = 0.5) {
    schedule.validate();
    if (T > schedule.horizon() + 1e-12)
        throw SpecError("integrate_cauchy: schedule shorter than requested horizon");
    if (renewal_delta <= 0.0) throw SpecError("integrate_cauchy: renewal delta must be positive");

    Trajectory traj;
    traj.mode = mode;
    traj.times.push_back(0.0);
    traj.points.push_back(x);
    traj.step_sizes.push_back(0.0);

    auto rhs = [&frame, &schedule](double t, const Vec& y) -> Vec {
        const Vec& b = schedule.at(t);
        Vec v = Vec::Zero(y.size());
        for (int j = 0; j < frame.q(); ++j)
            if (b[j] != 0.0) v += b[j] * frame.fields[std::size_t(j)].eval(y);
        return v;
    };

    // segment ends: control breakpoints, chunk ends (renewal), and T
    std::vector<std::pair<double, bool>> cuts;  // (time, is a renewal chunk end)
    for (double b : schedule.breakpoints)
        if (b > 0.0 && b < T) cuts.emplace_back(b, false);
    if (mode == IntegrationMode::renewal) {
        const double half = 0.5 * renewal_delta;
        for (long k = 1; half * double(k) < T; ++k) cuts.emplace_back(half * double(k), true);
    }
    cuts.emplace_back(T, true);
    std::sort(cuts.begin(), cuts.end());

    Vec y = x;
    double t = 0.0;
    StepObserver obs = [&traj](double tt, const Vec& yy, double h) {
        traj.times.push_back(tt);
        traj.points.push_back(yy);
        traj.step_sizes.push_back(h);
    };
    try {
        for (std::size_t c = 0; c < cuts.size(); ++c) {
            const double cut = cuts[c].first;
            bool chunk_end = cuts[c].second;
            // merge cuts too close to step between
            while (c + 1 < cuts.size() &&
                   cuts[c + 1].first <= cut + 1e-10 * (1.0 + std::abs(T))) {
                ++c;
                chunk_end = chunk_end || cuts[c].second;
            }
            if (cut <= t + 1e-10 * (1.0 + std::abs(T))) continue;
            y = integrate(rhs, y, t, cut, cfg, obs);
            t = cut;
            // re-anchor: fresh step-size control from the new point
            if (mode == IntegrationMode::renewal && chunk_end)
                traj.renewal_anchors.push_back(t);
        }
    } catch (const BlowUpError& e) {
        traj.blowup_time = e.t_star;
    } catch (const StepBudgetError& e) {
        traj.blowup_time = e.t_reached;
    }
    return traj;
}

/// First escape time of the integral curve of X from x, refined by bisection
/// to a bracket of width 1e-3; std::nullopt when the curve survives to
/// T_max. Escape means the blow-up norm threshold or a step-size underflow.
inline std::optional<double> detect_blowup(const VectorField& X, const Vec& x, double T_max,
                                           const IntegratorConfig& cfg = {}) {
    auto survives = [&](double t) -> bool {
        if (t <= 0.0) return true;
        try {
            flow(X, x, t, cfg);
            return true;
        } catch (const BlowUpError&) {
            return false;
        } catch (const StepBudgetError&) {
            return false;
        }
    };
    double hi;
    try {
        flow(X, x, T_max, cfg);
        return std::nullopt;
    } catch (const BlowUpError& e) {
        hi = std::min(std::abs(e.t_star), T_max);
    } catch (const StepBudgetError& e) {
        hi = std::min(std::abs(e.t_reached), T_max);
    }
    double lo = 0.0;
    while (hi - lo > 1e-3) {
        const double mid = 0.5 * (lo + hi);
        if (survives(mid))
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace ccgeo
