#pragma once

#include "ccgeo/common.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace ccgeo {

// ---------------------------------------------------------------------------
// Polynomials in n variables (monomial lists), exact calculus
// ---------------------------------------------------------------------------

struct Monomial {
    double coeff;
    std::vector<int> powers;
};

class Polynomial {
public:
    explicit Polynomial(int nvars = 0) : nvars_(nvars) {}

    static Polynomial constant(int nvars, double c) {
        Polynomial p(nvars);
        if (c != 0.0) p.terms_.push_back({c, std::vector<int>(nvars, 0)});
        return p;
    }

    static Polynomial monomial(int nvars, double c, std::vector<int> powers) {
        Polynomial p(nvars);
        if (int(powers.size()) != nvars)
            throw DimensionMismatchError("monomial: powers length != nvars");
        if (c != 0.0) p.terms_.push_back({c, std::move(powers)});
        return p;
    }

    int nvars() const { return nvars_; }
    const std::vector<Monomial>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    double eval(const Vec& x) const {
        double s = 0.0;
        for (const auto& t : terms_) {
            double m = t.coeff;
            for (int v = 0; v < nvars_; ++v)
                for (int k = 0; k < t.powers[v]; ++k) m *= x[v];
            s += m;
        }
        return s;
    }

    Polynomial partial(int var) const {
        Polynomial out(nvars_);
        for (const auto& t : terms_) {
            if (t.powers[var] == 0) continue;
            Monomial d = t;
            d.coeff *= d.powers[var];
            d.powers[var] -= 1;
            out.terms_.push_back(std::move(d));
        }
        out.normalize();
        return out;
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        Polynomial out(a.nvars_);
        out.terms_ = a.terms_;
        out.terms_.insert(out.terms_.end(), b.terms_.begin(), b.terms_.end());
        out.normalize();
        return out;
    }

    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) {
        return a + (-1.0) * b;
    }

    friend Polynomial operator*(double c, const Polynomial& a) {
        Polynomial out = a;
        for (auto& t : out.terms_) t.coeff *= c;
        out.normalize();
        return out;
    }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        Polynomial out(a.nvars_);
        for (const auto& ta : a.terms_)
            for (const auto& tb : b.terms_) {
                Monomial m;
                m.coeff = ta.coeff * tb.coeff;
                m.powers.resize(a.nvars_);
                for (int v = 0; v < a.nvars_; ++v) m.powers[v] = ta.powers[v] + tb.powers[v];
                out.terms_.push_back(std::move(m));
            }
        out.normalize();
        return out;
    }

private:
    void normalize() {
        std::map<std::vector<int>, double> acc;
        for (auto& t : terms_) acc[t.powers] += t.coeff;
        terms_.clear();
        for (auto& [pw, c] : acc)
            if (c != 0.0) terms_.push_back({c, pw});
    }

    int nvars_;
    std::vector<Monomial> terms_;
};

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

enum class FieldForm { polynomial, analytic, bracket_derived };

/// A C^s vector field on (an open subset of) R^n with an exact Jacobian
/// oracle. Polynomial fields carry their monomial lists and are
/// differentiated symbolically; analytic fields come from a catalog with
/// hand-coded derivatives; bracket-derived fields are produced by
/// lie_bracket. Values are immutable after construction and cheap to copy.
class VectorField {
public:
    using EvalFn = std::function<Vec(const Vec&)>;
    using JacFn = std::function<Mat(const Vec&)>;
    using HessFn = std::function<std::vector<Mat>(const Vec&)>;  // per component: (b,g) -> d2_bg

    VectorField() = default;

    static VectorField from_polynomials(std::vector<Polynomial> comps) {
        auto impl = std::make_shared<Impl>();
        impl->dim = int(comps.size());
        impl->form = FieldForm::polynomial;
        impl->poly = std::move(comps);
        for (const auto& p : impl->poly)
            if (p.nvars() != impl->dim)
                throw DimensionMismatchError("from_polynomials: component arity != dim");
        impl->jac_poly.resize(std::size_t(impl->dim) * impl->dim);
        for (int a = 0; a < impl->dim; ++a)
            for (int b = 0; b < impl->dim; ++b)
                impl->jac_poly[std::size_t(a) * impl->dim + b] = impl->poly[a].partial(b);
        return VectorField(std::move(impl));
    }

    /// Constant field (every component a constant).
    static VectorField constant(const Vec& value) {
        std::vector<Polynomial> comps;
        for (long i = 0; i < value.size(); ++i)
            comps.push_back(Polynomial::constant(int(value.size()), value[i]));
        return from_polynomials(std::move(comps));
    }

    static VectorField analytic(int dim, EvalFn eval, JacFn jac, HessFn hess = nullptr,
                                std::string name = "") {
        auto impl = std::make_shared<Impl>();
        impl->dim = dim;
        impl->form = FieldForm::analytic;
        impl->eval = std::move(eval);
        impl->jac = std::move(jac);
        impl->hess = std::move(hess);
        impl->exact_jacobian = true;
        impl->name = std::move(name);
        return VectorField(std::move(impl));
    }

    int dim() const { return impl_ ? impl_->dim : 0; }
    FieldForm form() const { return impl_->form; }
    bool is_polynomial() const { return impl_ && impl_->form == FieldForm::polynomial; }
    const std::vector<Polynomial>& polynomials() const {
        if (!is_polynomial()) throw SpecError("not a polynomial field");
        return impl_->poly;
    }
    const std::string& name() const { return impl_->name; }

    Vec eval(const Vec& x) const {
        const Impl& im = *impl_;
        if (im.form == FieldForm::polynomial) {
            Vec out(im.dim);
            for (int a = 0; a < im.dim; ++a) out[a] = im.poly[a].eval(x);
            return out;
        }
        return im.eval(x);
    }

    Vec operator()(const Vec& x) const { return eval(x); }

    /// True when the Jacobian is exact (symbolic or hand-coded), false when
    /// it falls back to central finite differences.
    bool has_exact_jacobian() const {
        return impl_->form == FieldForm::polynomial || impl_->exact_jacobian;
    }

    bool has_hessian() const {
        return impl_->form == FieldForm::polynomial || bool(impl_->hess);
    }

    Mat jacobian(const Vec& x) const {
        const Impl& im = *impl_;
        if (im.form == FieldForm::polynomial) {
            Mat J(im.dim, im.dim);
            for (int a = 0; a < im.dim; ++a)
                for (int b = 0; b < im.dim; ++b)
                    J(a, b) = im.jac_poly[std::size_t(a) * im.dim + b].eval(x);
            return J;
        }
        if (im.jac) return im.jac(x);
        return fd_jacobian(x);
    }

    std::vector<Mat> hessian(const Vec& x) const {
        const Impl& im = *impl_;
        if (im.form == FieldForm::polynomial) {
            std::vector<Mat> H(im.dim, Mat(im.dim, im.dim));
            for (int a = 0; a < im.dim; ++a)
                for (int b = 0; b < im.dim; ++b) {
                    Polynomial pb = im.poly[a].partial(b);
                    for (int g = 0; g < im.dim; ++g) H[a](b, g) = pb.partial(g).eval(x);
                }
            return H;
        }
        if (!im.hess) throw SpecError("field has no second-derivative oracle");
        return im.hess(x);
    }

    friend VectorField lie_bracket(const VectorField& X, const VectorField& Y);
    friend VectorField operator+(const VectorField& X, const VectorField& Y);
    friend VectorField operator*(double c, const VectorField& X);

private:
    struct Impl {
        int dim = 0;
        FieldForm form = FieldForm::polynomial;
        std::vector<Polynomial> poly;
        std::vector<Polynomial> jac_poly;  // row-major [a*dim+b] = d_b poly[a]
        EvalFn eval;
        JacFn jac;
        HessFn hess;
        bool exact_jacobian = false;
        std::string name;
    };

    explicit VectorField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

    Mat fd_jacobian(const Vec& x) const {
        const double h = 1e-5 * (x.norm() + 1.0);
        const int n = dim();
        Mat J(n, n);
        Vec xp = x, xm = x;
        for (int b = 0; b < n; ++b) {
            xp[b] += h;
            xm[b] -= h;
            J.col(b) = (eval(xp) - eval(xm)) / (2.0 * h);
            xp[b] = x[b];
            xm[b] = x[b];
        }
        return J;
    }

    std::shared_ptr<const Impl> impl_;
};

/// Lie bracket [X,Y] = JY.X - JX.Y. Polynomial inputs produce a polynomial
/// field (all derivatives symbolic). Otherwise the value uses the parents'
/// Jacobian oracles; the bracket's own Jacobian is exact when both parents
/// expose second derivatives and falls back to central finite differences
/// (step 1e-5 scaled by |x|+1) when not.
inline VectorField lie_bracket(const VectorField& X, const VectorField& Y) {
    if (X.dim() != Y.dim()) throw DimensionMismatchError("lie_bracket: dimension mismatch");
    const int n = X.dim();

    if (X.is_polynomial() && Y.is_polynomial()) {
        std::vector<Polynomial> comps;
        comps.reserve(n);
        for (int a = 0; a < n; ++a) {
            Polynomial c(n);
            for (int b = 0; b < n; ++b) {
                c = c + X.polynomials()[b] * Y.polynomials()[a].partial(b) -
                    Y.polynomials()[b] * X.polynomials()[a].partial(b);
            }
            comps.push_back(std::move(c));
        }
        return VectorField::from_polynomials(std::move(comps));
    }

    auto xi = X.impl_, yi = Y.impl_;
    auto impl = std::make_shared<VectorField::Impl>();
    impl->dim = n;
    impl->form = FieldForm::bracket_derived;
    VectorField xf(xi), yf(yi);
    impl->eval = [xf, yf](const Vec& p) -> Vec {
        return yf.jacobian(p) * xf.eval(p) - xf.jacobian(p) * yf.eval(p);
    };
    if (xf.has_hessian() && yf.has_hessian()) {
        impl->exact_jacobian = true;
        impl->jac = [xf, yf, n](const Vec& p) -> Mat {
            const Mat JX = xf.jacobian(p), JY = yf.jacobian(p);
            const Vec vx = xf.eval(p), vy = yf.eval(p);
            const auto HX = xf.hessian(p), HY = yf.hessian(p);
            Mat J = JY * JX - JX * JY;
            for (int a = 0; a < n; ++a)
                for (int g = 0; g < n; ++g) {
                    double s = 0.0;
                    for (int b = 0; b < n; ++b)
                        s += vx[b] * HY[a](b, g) - vy[b] * HX[a](b, g);
                    J(a, g) += s;
                }
            return J;
        };
    }
    return VectorField(std::move(impl));
}

inline VectorField operator+(const VectorField& X, const VectorField& Y) {
    if (X.dim() != Y.dim()) throw DimensionMismatchError("field sum: dimension mismatch");
    if (X.is_polynomial() && Y.is_polynomial()) {
        std::vector<Polynomial> comps;
        for (int a = 0; a < X.dim(); ++a) comps.push_back(X.polynomials()[a] + Y.polynomials()[a]);
        return VectorField::from_polynomials(std::move(comps));
    }
    auto impl = std::make_shared<VectorField::Impl>();
    impl->dim = X.dim();
    impl->form = FieldForm::bracket_derived;
    VectorField xf = X, yf = Y;
    impl->eval = [xf, yf](const Vec& p) { return Vec(xf.eval(p) + yf.eval(p)); };
    if (xf.has_exact_jacobian() && yf.has_exact_jacobian()) {
        impl->exact_jacobian = true;
        impl->jac = [xf, yf](const Vec& p) { return Mat(xf.jacobian(p) + yf.jacobian(p)); };
    }
    return VectorField(std::move(impl));
}

inline VectorField operator*(double c, const VectorField& X) {
    if (X.is_polynomial()) {
        std::vector<Polynomial> comps;
        for (int a = 0; a < X.dim(); ++a) comps.push_back(c * X.polynomials()[a]);
        return VectorField::from_polynomials(std::move(comps));
    }
    auto impl = std::make_shared<VectorField::Impl>();
    impl->dim = X.dim();
    impl->form = FieldForm::bracket_derived;
    VectorField xf = X;
    impl->eval = [xf, c](const Vec& p) { return Vec(c * xf.eval(p)); };
    if (xf.has_exact_jacobian()) {
        impl->exact_jacobian = true;
        impl->jac = [xf, c](const Vec& p) { return Mat(c * xf.jacobian(p)); };
    }
    return VectorField(std::move(impl));
}

// ---------------------------------------------------------------------------
// Bracket words and the enumerated frame
// ---------------------------------------------------------------------------

/// A bracket word w_1 ... w_l over the generator alphabet {1,...,m}.
struct Word {
    std::vector<int> letters;  // 1-based
    int length() const { return int(letters.size()); }
};

inline bool operator==(const Word& a, const Word& b) { return a.letters == b.letters; }

inline std::string to_string(const Word& w) {
    std::string s = "(";
    for (std::size_t i = 0; i < w.letters.size(); ++i)
        s += (i ? "," : "") + std::to_string(w.letters[i]);
    return s + ")";
}

/// Right-nested commutator [X_{w1},[X_{w2},...,[X_{w_{l-1}},X_{wl}]...]].
/// A length-1 word returns the generator itself.
inline VectorField nested_commutator(const Word& w, const std::vector<VectorField>& generators,
                                     int max_len = 1 << 20) {
    const int m = int(generators.size());
    if (w.length() < 1) throw WordTooLongError("nested_commutator: empty word");
    if (w.length() > max_len)
        throw WordTooLongError("nested_commutator: word length " + std::to_string(w.length()) +
                               " exceeds " + std::to_string(max_len));
    for (int letter : w.letters)
        if (letter < 1 || letter > m)
            throw WordTooLongError("nested_commutator: letter out of range");
    VectorField cur = generators[std::size_t(w.letters.back()) - 1];
    for (int i = w.length() - 2; i >= 0; --i)
        cur = lie_bracket(generators[std::size_t(w.letters[i]) - 1], cur);
    return cur;
}

/// The enumerated family Y_1...Y_q of all nested commutators of length <= s,
/// ordered by (length, then lexicographic); q = m + m^2 + ... + m^s. The
/// order is part of the contract: it fixes the meaning of the coordinates of
/// h in the composite exponential map.
struct Frame {
    std::vector<VectorField> generators;
    std::vector<Word> words;
    std::vector<VectorField> fields;
    std::vector<int> degrees;
    int s = 0;

    int q() const { return int(fields.size()); }
    int dim() const {
        if (!generators.empty()) return generators.front().dim();
        return fields.empty() ? 0 : fields.front().dim();
    }

    /// n x q matrix [Y_1(x) ... Y_q(x)]
    Mat values_at(const Vec& x) const {
        Mat V(dim(), q());
        for (int j = 0; j < q(); ++j) V.col(j) = fields[std::size_t(j)].eval(x);
        return V;
    }
};

inline Frame enumerate_frame(std::vector<VectorField> generators, int s) {
    if (s < 1) throw SpecError("enumerate_frame: need s >= 1");
    if (generators.empty()) throw SpecError("enumerate_frame: no generators");
    const int m = int(generators.size());
    Frame f;
    f.generators = std::move(generators);
    f.s = s;
    for (int len = 1; len <= s; ++len) {
        std::vector<int> letters(std::size_t(len), 1);
        while (true) {
            Word w{letters};
            f.fields.push_back(nested_commutator(w, f.generators, s));
            f.words.push_back(std::move(w));
            f.degrees.push_back(len);
            // lexicographic odometer
            int i = len - 1;
            while (i >= 0 && letters[std::size_t(i)] == m) {
                letters[std::size_t(i)] = 1;
                --i;
            }
            if (i < 0) break;
            ++letters[std::size_t(i)];
        }
    }
    return f;
}

}  // namespace ccgeo
