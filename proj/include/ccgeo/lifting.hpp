#pragma once

#include "ccgeo/common.hpp"
#include "ccgeo/flow.hpp"
#include "ccgeo/linalg.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ccgeo {

/// A C^1 map f: R^q -> R^p (p <= q) with full-row-rank Jacobian on its
/// domain ball (checked lazily at visited points).
struct Submersion {
    int dom_dim = 0;
    int codom_dim = 0;
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jacobian;
    Vec center;
    double radius = std::numeric_limits<double>::infinity();
};

/// A target path gamma: [0,1] -> R^p on a sample grid, with a derivative
/// oracle (closed form preferred, finite differences on the grid otherwise).
struct TargetPath {
    std::vector<double> times;
    std::vector<Vec> values;
    std::function<Vec(double)> value_fn;       // optional
    std::function<Vec(double)> derivative_fn;  // optional
    double speed_bound = 0.0;                  // r1 = max |dgamma/dt| seen on the grid

    static TargetPath from_closure(std::function<Vec(double)> gamma,
                                   std::function<Vec(double)> dgamma, int n_grid = 1024) {
        TargetPath p;
        p.value_fn = gamma;
        p.derivative_fn = dgamma;
        p.times.resize(std::size_t(n_grid) + 1);
        p.values.resize(std::size_t(n_grid) + 1);
        for (int i = 0; i <= n_grid; ++i) {
            p.times[std::size_t(i)] = double(i) / n_grid;
            p.values[std::size_t(i)] = gamma(p.times[std::size_t(i)]);
            p.speed_bound = std::max(p.speed_bound, dgamma(p.times[std::size_t(i)]).norm());
        }
        return p;
    }

    static TargetPath from_samples(std::vector<double> times, std::vector<Vec> values) {
        TargetPath p;
        p.times = std::move(times);
        p.values = std::move(values);
        if (p.times.size() < 2 || p.times.size() != p.values.size())
            throw SpecError("TargetPath::from_samples: bad grid");
        for (std::size_t i = 0; i + 1 < p.times.size(); ++i) {
            const double dt = p.times[i + 1] - p.times[i];
            if (dt <= 0.0) throw SpecError("TargetPath::from_samples: grid not increasing");
            p.speed_bound = std::max(p.speed_bound, (p.values[i + 1] - p.values[i]).norm() / dt);
        }
        return p;
    }

    std::size_t segment_of(double t) const {
        std::size_t i = 0;
        while (i + 2 < times.size() && times[i + 1] <= t) ++i;
        return i;
    }

    Vec value_at(double t) const {
        if (value_fn) return value_fn(t);
        const std::size_t i = segment_of(t);
        const double u = (t - times[i]) / (times[i + 1] - times[i]);
        return (1.0 - u) * values[i] + u * values[i + 1];
    }

    Vec derivative_at(double t) const {
        if (derivative_fn) return derivative_fn(t);
        const std::size_t i = segment_of(t);
        return (values[i + 1] - values[i]) / (times[i + 1] - times[i]);
    }
};

enum class LiftExit { completed, left_domain, rank_deficient, blowup };

inline const char* to_string(LiftExit e) {
    switch (e) {
        case LiftExit::completed: return "completed";
        case LiftExit::left_domain: return "left-domain";
        case LiftExit::rank_deficient: return "rank-deficient";
        case LiftExit::blowup: return "blow-up";
    }
    return "?";
}

struct LiftResult {
    std::vector<double> times;
    std::vector<Vec> theta;
    std::vector<Vec> theta_dot;
    double max_residual = 0.0;        // sup_i |f(theta(t_i)) - gamma(t_i)|
    double lipschitz_observed = 0.0;  // max_i |theta_dot(t_i)|
    LiftExit exit = LiftExit::completed;
    double exit_time = 1.0;
};

struct LiftOptions {
    /// false: integrate the lifting ODE with the adaptive RK pair between
    /// grid nodes. true: chord continuation - one Jacobian per grid interval,
    /// Euler predictor J^+ (gamma_{i+1} - gamma_i), Newton corrector with the
    /// frozen pseudoinverse. The chord mode is for expensive Jacobians
    /// (finite-difference differentials of composite flows).
    bool chord = false;
    int newton_iters = 3;
    double projection_tol = 1e-11;
    /// refresh the chord Jacobian every k-th interval
    int chord_refresh = 1;
};

/// Horizontal lift of gamma through f from theta0: integrates
///   dtheta/dt = J_f(theta)^+ dgamma/dt
/// with the adaptive RK pair, then restores f(theta) = gamma(t) at every
/// grid node with Newton corrections J^+(f(theta) - gamma(t)). The
/// correction acts along the row space, so the minimality condition
/// (theta_dot orthogonal to ker df) is preserved.
inline LiftResult horizontal_lift(const Submersion& f, const TargetPath& gamma, const Vec& theta0,
                                  const IntegratorConfig& cfg = {}, const LiftOptions& opt = {}) {
    if (theta0.size() != f.dom_dim) throw DimensionMismatchError("horizontal_lift: theta0 size");
    LiftResult out;
    Vec theta = theta0;
    {
        const double r0 = (f.eval(theta0) - gamma.value_at(gamma.times.front())).norm();
        if (r0 > 1e-6)
            throw SpecError("horizontal_lift: f(theta0) != gamma(0) (|r| = " + std::to_string(r0) +
                            ")");
    }

    auto rhs = [&f, &gamma](double t, const Vec& th) -> Vec {
        return least_norm_solve(f.jacobian(th), gamma.derivative_at(t));
    };

    Mat chord_pinv;  // frozen pseudoinverse in chord mode

    auto record = [&](double t) {
        out.times.push_back(t);
        out.theta.push_back(theta);
        Vec td = opt.chord ? Vec(chord_pinv * gamma.derivative_at(t))
                           : least_norm_solve(f.jacobian(theta), gamma.derivative_at(t));
        out.lipschitz_observed = std::max(out.lipschitz_observed, td.norm());
        out.theta_dot.push_back(std::move(td));
        out.max_residual =
            std::max(out.max_residual, (f.eval(theta) - gamma.value_at(t)).norm());
    };

    try {
        if (opt.chord) chord_pinv = pseudoinverse(f.jacobian(theta)).pinv;
        record(gamma.times.front());
        for (std::size_t i = 0; i + 1 < gamma.times.size(); ++i) {
            const double t0 = gamma.times[i], t1 = gamma.times[i + 1];
            if (opt.chord) {
                if (i > 0 && int(i) % std::max(1, opt.chord_refresh) == 0)
                    chord_pinv = pseudoinverse(f.jacobian(theta)).pinv;
                theta += chord_pinv * (gamma.value_at(t1) - gamma.value_at(t0));
                for (int it = 0; it < opt.newton_iters; ++it) {
                    const Vec r = f.eval(theta) - gamma.value_at(t1);
                    if (r.norm() <= opt.projection_tol * (1.0 + gamma.value_at(t1).norm())) break;
                    theta -= chord_pinv * r;
                }
            } else {
                theta = integrate(rhs, theta, t0, t1, cfg);
                // drift control
                for (int it = 0; it < opt.newton_iters; ++it) {
                    const Vec r = f.eval(theta) - gamma.value_at(t1);
                    if (r.norm() <= opt.projection_tol * (1.0 + gamma.value_at(t1).norm())) break;
                    theta -= least_norm_solve(f.jacobian(theta), r);
                }
            }
            if ((theta - f.center).norm() >= f.radius) {
                out.exit = LiftExit::left_domain;
                out.exit_time = t1;
                record(t1);
                return out;
            }
            record(t1);
        }
        out.exit = LiftExit::completed;
        out.exit_time = gamma.times.back();
    } catch (const RankDeficientError&) {
        out.exit = LiftExit::rank_deficient;
        out.exit_time = out.times.empty() ? gamma.times.front() : out.times.back();
    } catch (const BlowUpError& e) {
        out.exit = LiftExit::blowup;
        out.exit_time = e.t_star;
    } catch (const StepBudgetError& e) {
        out.exit = LiftExit::blowup;
        out.exit_time = e.t_reached;
    }
    return out;
}

struct HorizontalityReport {
    double residual_to_target = 0.0;
    double orthogonality_defect = 0.0;
};

/// Check a sampled path for horizontality: the residual sup |f(theta) -
/// gamma| on the grid, and the defect max_i |P_ker(theta_dot_i)| with
/// theta_dot from central differences at interior nodes (P_ker = I - J^+ J).
inline HorizontalityReport verify_horizontal(const Submersion& f,
                                             const std::vector<double>& times,
                                             const std::vector<Vec>& theta,
                                             const TargetPath* target = nullptr) {
    if (times.size() != theta.size() || times.size() < 3)
        throw SpecError("verify_horizontal: need a sampled path with >= 3 nodes");
    HorizontalityReport rep;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (target)
            rep.residual_to_target = std::max(
                rep.residual_to_target, (f.eval(theta[i]) - target->value_at(times[i])).norm());
        if (i == 0 || i + 1 == times.size()) continue;
        const Vec td = (theta[i + 1] - theta[i - 1]) / (times[i + 1] - times[i - 1]);
        const Mat J = f.jacobian(theta[i]);
        const Vec defect = td - pseudoinverse(J).pinv * (J * td);
        rep.orthogonality_defect = std::max(rep.orthogonality_defect, defect.norm());
    }
    return rep;
}

struct OpenMapResult {
    std::optional<Vec> preimage;
    bool in_certified_ball = false;
    LiftResult lift;
};

/// Solve f(x) = y by lifting the straight segment from f(center) to y. The
/// certificate: every y with |y - f(center)| < radius/(2 C0) has a preimage
/// inside the domain ball. Outside the certified ball the solve is still
/// attempted and flagged.
inline OpenMapResult open_map_solve(const Submersion& f, const Vec& y, double C0,
                                    const IntegratorConfig& cfg = {}, int grid_n = 512) {
    OpenMapResult res;
    const Vec y0 = f.eval(f.center);
    const double r1 = (y - y0).norm();
    res.in_certified_ball = r1 < f.radius / (2.0 * C0);
    TargetPath segment = TargetPath::from_closure(
        [&y0, &y](double t) -> Vec { return (1.0 - t) * y0 + t * y; },
        [&y0, &y](double) -> Vec { return y - y0; }, grid_n);
    res.lift = horizontal_lift(f, segment, f.center, cfg);
    if (res.lift.exit == LiftExit::completed) {
        Vec x = res.lift.theta.back();
        // final polish
        for (int it = 0; it < 4; ++it) {
            const Vec r = f.eval(x) - y;
            if (r.norm() <= 1e-12 * (1.0 + y.norm())) break;
            x -= least_norm_solve(f.jacobian(x), r);
        }
        if ((f.eval(x) - y).norm() <= 1e-8 * (1.0 + y.norm())) res.preimage = x;
    }
    return res;
}

/// Sampled estimate of C0 = sup |J_f(x)^+| over the domain ball: a
/// quasi-random scan (box capped at radius 1e3 when the ball is unbounded)
/// followed by a compass-search polish from the best point. The result is an
/// under-estimate of the true supremum.
inline double estimate_C0(const Submersion& f, int sample_count = 2048, std::uint64_t seed = 1) {
    const double cap = 1e3;
    const double R = std::min(f.radius, cap);
    QuasiRandom qr(f.dom_dim, seed);
    auto value = [&f](const Vec& x) { return pseudoinverse(f.jacobian(x)).op_norm_pinv; };

    Vec best = f.center;
    double best_val = value(best);
    int accepted = 0;
    long guard = 0;
    while (accepted < sample_count && guard++ < 64L * sample_count) {
        Vec x = f.center + qr.next_in_cube(R);
        if ((x - f.center).norm() > f.radius) continue;
        ++accepted;
        const double v = value(x);
        if (v > best_val) {
            best_val = v;
            best = x;
        }
    }
    // compass-search polish (stays inside the ball; the cap only limits the
    // initial scan, not the polish)
    const double hard_radius = std::min(f.radius, 1e6);
    double step = 0.1 * (1.0 + best.norm());
    for (int it = 0; it < 400 && step > 1e-9 * (1.0 + best.norm()); ++it) {
        bool improved = false;
        for (int d = 0; d < f.dom_dim && !improved; ++d) {
            for (double sgn : {1.0, -1.0}) {
                Vec x = best;
                x[d] += sgn * step;
                if ((x - f.center).norm() > hard_radius) continue;
                const double v = value(x);
                if (v > best_val) {
                    best_val = v;
                    best = x;
                    improved = true;
                    break;
                }
            }
        }
        step *= improved ? 2.0 : 0.5;
    }
    return best_val;
}

/// Named test submersions.
inline Submersion builtin_submersion(const std::string& name) {
    Submersion s;
    if (name == "arctan-example") {
        s.dom_dim = 2;
        s.codom_dim = 1;
        s.center = Vec::Zero(2);
        s.radius = 10.0;
        s.eval = [](const Vec& x) {
            Vec y(1);
            y << x[0] + std::atan(x[1]);
            return y;
        };
        s.jacobian = [](const Vec& x) {
            Mat J(1, 2);
            J << 1.0, 1.0 / (1.0 + x[1] * x[1]);
            return J;
        };
        return s;
    }
    if (name == "nonuni") {
        s.dom_dim = 3;
        s.codom_dim = 1;
        s.center = Vec::Zero(3);
        s.radius = 6.0;
        s.eval = [](const Vec& x) {
            Vec y(1);
            y << (2.0 / 3.0) * x[0] * std::sqrt(std::abs(x[0])) +
                     (2.0 / 3.0) * x[1] * std::sqrt(std::abs(x[1])) + x[2];
            return y;
        };
        s.jacobian = [](const Vec& x) {
            Mat J(1, 3);
            J << std::sqrt(std::abs(x[0])), std::sqrt(std::abs(x[1])), 1.0;
            return J;
        };
        return s;
    }
    if (name == "xyz-linear") {
        s.dom_dim = 3;
        s.codom_dim = 2;
        s.center = Vec::Zero(3);
        s.radius = 8.0;
        Mat A(2, 3);
        A << 1, 0, 1, 0, 1, 1;
        s.eval = [A](const Vec& x) -> Vec { return A * x; };
        s.jacobian = [A](const Vec&) { return A; };
        return s;
    }
    if (name == "kernel-example") {
        // f(x,y,z) = (x + yz, y): the orthogonal complement of ker df is a
        // non-involutive plane field.
        s.dom_dim = 3;
        s.codom_dim = 2;
        s.center = Vec::Zero(3);
        s.radius = 2.0;
        s.eval = [](const Vec& x) {
            Vec y(2);
            y << x[0] + x[1] * x[2], x[1];
            return y;
        };
        s.jacobian = [](const Vec& x) {
            Mat J(2, 3);
            J << 1.0, x[2], x[1], 0.0, 1.0, 0.0;
            return J;
        };
        return s;
    }
    throw UnknownSystemError("submersion: " + name);
}

}  // namespace ccgeo
