#pragma once

#include "ccgeo/common.hpp"
#include "ccgeo/fields.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace ccgeo {

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    long max_steps = 1000000;
    double blowup_norm = 1e8;
};

using Rhs = std::function<Vec(double, const Vec&)>;
using StepObserver = std::function<void(double t, const Vec& y, double h)>;

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

}  // namespace detail

/// Adaptive embedded Runge-Kutta 5(4) (Dormand-Prince) with PI step control.
/// Integrates dy/dt = rhs(t,y) from t0 to t1 (either direction).
///
/// Throws BlowUpError when |y| exceeds cfg.blowup_norm or the step size
/// underflows, and StepBudgetError past cfg.max_steps.
inline Vec integrate(const Rhs& rhs, Vec y, double t0, double t1, const IntegratorConfig& cfg = {},
                     const StepObserver& observer = nullptr) {
    using T = detail::Dopri5;
    if (t0 == t1) return y;
    // Intervals at roundoff scale cannot be stepped; one Euler increment is
    // below every tolerance there.
    if (std::abs(t1 - t0) <
        64.0 * std::numeric_limits<double>::epsilon() * std::max({std::abs(t0), std::abs(t1), 1.0}))
        return y + (t1 - t0) * rhs(t0, y);
    const double dir = (t1 > t0) ? 1.0 : -1.0;
    const long n = y.size();
    double t = t0;

    auto scaled_norm = [&](const Vec& err, const Vec& y0, const Vec& y1) {
        double s = 0.0;
        for (long i = 0; i < n; ++i) {
            const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
            const double e = err[i] / sc;
            s += e * e;
        }
        return std::sqrt(s / double(n));
    };

    Vec k1 = rhs(t, y);

    // Initial step size (Hairer-style heuristic).
    double h;
    {
        double d0 = 0.0, d1 = 0.0;
        for (long i = 0; i < n; ++i) {
            const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / double(n));
        d1 = std::sqrt(d1 / double(n));
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, std::abs(t1 - t0));
        Vec y1 = y + h0 * dir * k1;
        Vec k2 = rhs(t + h0 * dir, y1);
        double d2 = 0.0;
        for (long i = 0; i < n; ++i) {
            const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
            const double dd = (k2[i] - k1[i]) / sc;
            d2 += dd * dd;
        }
        d2 = std::sqrt(d2 / double(n)) / h0;
        const double dm = std::max(d1, d2);
        double h1 = (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        h = std::min({100.0 * h0, h1, std::abs(t1 - t0), cfg.max_step});
        // The d0/d1 heuristic collapses near stationary scales (|y| ~ 0 with
        // tight absolute tolerances); the controller recovers from a floor in
        // a few steps but cannot recover from an underflow abort.
        h = std::max(h, std::min(1e-6 * std::abs(t1 - t0), cfg.max_step));
    }

    double err_old = 1e-4;
    long steps = 0;
    bool last = false;
    while (true) {
        if (steps++ > cfg.max_steps) throw StepBudgetError(t);
        if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0))
            throw BlowUpError(t, true);
        if ((t + dir * h - t1) * dir >= 0.0) {
            h = std::abs(t1 - t);
            last = true;
        }
        const double hd = dir * h;

        Vec k2 = rhs(t + T::c2 * hd, y + hd * (T::a21 * k1));
        Vec k3 = rhs(t + T::c3 * hd, y + hd * (T::a31 * k1 + T::a32 * k2));
        Vec k4 = rhs(t + T::c4 * hd, y + hd * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3));
        Vec k5 = rhs(t + T::c5 * hd, y + hd * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4));
        Vec k6 = rhs(t + hd, y + hd * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 +
                                       T::a65 * k5));
        Vec y5 = y + hd * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
        Vec k7 = rhs(t + hd, y5);
        Vec err = hd * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);

        const double err_norm = scaled_norm(err, y, y5);
        if (err_norm <= 1.0) {
            t += hd;
            y = std::move(y5);
            k1 = std::move(k7);  // FSAL
            if (!y.allFinite() || y.norm() > cfg.blowup_norm) throw BlowUpError(t, false);
            if (observer) observer(t, y, hd);
            if (last || t == t1) return y;
            // PI controller (Hairer's dopri5 constants).
            const double beta = 0.04, alpha = 0.2 - 0.75 * beta;
            double fac = std::pow(std::max(err_norm, 1e-32), -alpha) *
                         std::pow(std::max(err_old, 1e-32), beta);
            fac = std::clamp(0.9 * fac, 0.2, 10.0);
            h = std::min(h * fac, cfg.max_step);
            err_old = std::max(err_norm, 1e-32);
        } else {
            last = false;
            const double fac = std::clamp(0.9 * std::pow(err_norm, -0.2), 0.1, 1.0);
            h *= fac;
        }
    }
}

/// Point of the integral curve of X after time t: exp(tX)x.
inline Vec flow(const VectorField& X, const Vec& x, double t, const IntegratorConfig& cfg = {}) {
    if (t == 0.0) return x;
    return integrate([&X](double, const Vec& y) { return X.eval(y); }, x, 0.0, t, cfg);
}

// ---------------------------------------------------------------------------
// Commutator compositions and approximate exponentials
// ---------------------------------------------------------------------------

/// One elementary flow in a commutator composition: exp(sign*tau X_letter).
struct FlowElem {
    int letter;   // 1-based generator index
    double sign;  // +1 or -1
};

/// Elementary flows of C_tau(X_{w1},...,X_{wl}) in application order (first
/// entry applied first). The recursion
///   C(w) = C(w2..wl)^{-1} exp(-tau X_{w1}) C(w2..wl) exp(tau X_{w1})
/// gives N(1)=1, N(l)=2N(l-1)+2 elementary flows.
inline std::vector<FlowElem> commutator_elems(const Word& w) {
    if (w.length() < 1) throw WordTooLongError("commutator_elems: empty word");
    std::function<std::vector<FlowElem>(std::size_t)> build =
        [&](std::size_t i) -> std::vector<FlowElem> {
        if (i + 1 == w.letters.size()) return {{w.letters[i], +1.0}};
        std::vector<FlowElem> inner = build(i + 1);
        std::vector<FlowElem> out;
        out.reserve(2 * inner.size() + 2);
        out.push_back({w.letters[i], +1.0});
        out.insert(out.end(), inner.begin(), inner.end());
        out.push_back({w.letters[i], -1.0});
        for (auto it = inner.rbegin(); it != inner.rend(); ++it)
            out.push_back({it->letter, -it->sign});
        return out;
    };
    return build(0);
}

/// The point C_tau(X_{w1},...,X_{wl}) x for tau >= 0.
inline Vec commutator_flow(const Word& w, const std::vector<VectorField>& generators, double tau,
                           const Vec& x, const IntegratorConfig& cfg = {}) {
    if (tau < 0.0) throw SpecError("commutator_flow: tau must be >= 0");
    if (tau == 0.0) return x;
    Vec y = x;
    for (const FlowElem& e : commutator_elems(w))
        y = flow(generators[std::size_t(e.letter) - 1], y, e.sign * tau, cfg);
    return y;
}

/// Approximate exponential of the nested commutator X_w:
///   t >= 0: C_{t^{1/l}}(X_{w1},...,X_{wl}) x
///   t <  0: the exact inverse composition (elementary flows applied in
///           reverse order with negated times) at tau = |t|^{1/l}.
inline Vec approx_exp(const Word& w, const std::vector<VectorField>& generators, double t,
                      const Vec& x, const IntegratorConfig& cfg = {}) {
    if (t == 0.0) return x;
    const double tau = std::pow(std::abs(t), 1.0 / double(w.length()));
    std::vector<FlowElem> elems = commutator_elems(w);
    Vec y = x;
    if (t > 0.0) {
        for (const FlowElem& e : elems)
            y = flow(generators[std::size_t(e.letter) - 1], y, e.sign * tau, cfg);
    } else {
        for (auto it = elems.rbegin(); it != elems.rend(); ++it)
            y = flow(generators[std::size_t(it->letter) - 1], y, -it->sign * tau, cfg);
    }
    return y;
}

// ---------------------------------------------------------------------------
// The composite map E_x and its numerical differential
// ---------------------------------------------------------------------------

struct HVector {
    Vec h;
    std::vector<int> degrees;
};

/// Anisotropic norm ||h|| = max_j |h_j|^{1/l_j} adapted to commutator degrees.
inline double homogeneous_norm(const HVector& hv) {
    if (hv.h.size() != long(hv.degrees.size()))
        throw DimensionMismatchError("homogeneous_norm: length mismatch");
    double m = 0.0;
    for (long j = 0; j < hv.h.size(); ++j)
        m = std::max(m, std::pow(std::abs(hv.h[j]), 1.0 / double(hv.degrees[std::size_t(j)])));
    return m;
}

/// E_x(h) = exp_ap(h_1 Y_1) o ... o exp_ap(h_q Y_q) x; the rightmost factor
/// exp_ap(h_q Y_q) is applied to x first. Zero components are exact
/// identities and are skipped.
inline Vec e_map(const Frame& frame, const Vec& x, const Vec& h, const IntegratorConfig& cfg = {}) {
    if (h.size() != frame.q()) throw DimensionMismatchError("e_map: h length != q");
    Vec y = x;
    for (int j = frame.q() - 1; j >= 0; --j) {
        if (h[j] == 0.0) continue;
        y = approx_exp(frame.words[std::size_t(j)], frame.generators, h[j], y, cfg);
    }
    return y;
}

/// Central finite-difference differential of e_map at h (n x q). E is only
/// C^{1,alpha}, so no higher-order scheme is attempted. The elementary flows
/// are integrated at tolerances floored to (1e-12, 1e-13) so the difference
/// quotient noise stays below the truncation error at the default step.
inline Mat e_jacobian(const Frame& frame, const Vec& x, const Vec& h, double fd_step = 1e-6,
                      const IntegratorConfig& cfg = {}, bool tight_tol = true) {
    IntegratorConfig jcfg = cfg;
    if (tight_tol) {
        jcfg.rel_tol = std::min(cfg.rel_tol, 1e-12);
        jcfg.abs_tol = std::min(cfg.abs_tol, 1e-13);
    }
    const int n = frame.dim(), q = frame.q();
    Mat J(n, q);
    Vec hp = h, hm = h;
    for (int k = 0; k < q; ++k) {
        const double step = fd_step;
        hp[k] += step;
        hm[k] -= step;
        J.col(k) = (e_map(frame, x, hp, jcfg) - e_map(frame, x, hm, jcfg)) / (2.0 * step);
        hp[k] = h[k];
        hm[k] = h[k];
    }
    return J;
}

}  // namespace ccgeo
