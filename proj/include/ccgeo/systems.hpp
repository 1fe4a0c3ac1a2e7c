#pragma once

#include "ccgeo/common.hpp"
#include "ccgeo/fields.hpp"
#include "ccgeo/flow.hpp"
#include "ccgeo/linalg.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace ccgeo {

// ---------------------------------------------------------------------------
// Registered-analytic catalog
// ---------------------------------------------------------------------------
//
// Vector fields with non-polynomial coefficients live here with hand-coded
// first derivatives, and second derivatives where brackets of brackets are
// taken. Coordinates for the *-surface fields are (x1, x2, t).

inline VectorField analytic_catalog(const std::string& name) {
    // u = 1 + x1^2 + x2^2 throughout.
    if (name == "cierre-x1") {
        // d/dx1 + x2 u^{-1/2} d/dt
        return VectorField::analytic(
            3,
            [](const Vec& x) {
                const double u = 1.0 + x[0] * x[0] + x[1] * x[1];
                Vec v(3);
                v << 1.0, 0.0, x[1] / std::sqrt(u);
                return v;
            },
            [](const Vec& x) {
                const double u = 1.0 + x[0] * x[0] + x[1] * x[1];
                const double u32 = std::pow(u, -1.5);
                Mat J = Mat::Zero(3, 3);
                J(2, 0) = -x[0] * x[1] * u32;
                J(2, 1) = (1.0 + x[0] * x[0]) * u32;
                return J;
            },
            [](const Vec& x) {
                const double x1 = x[0], x2 = x[1];
                const double u = 1.0 + x1 * x1 + x2 * x2;
                const double u32 = std::pow(u, -1.5), u52 = std::pow(u, -2.5);
                std::vector<Mat> H(3, Mat::Zero(3, 3));
                H[2](0, 0) = -x2 * u32 + 3.0 * x1 * x1 * x2 * u52;
                H[2](0, 1) = H[2](1, 0) = -x1 * u32 + 3.0 * x1 * x2 * x2 * u52;
                H[2](1, 1) = -3.0 * (1.0 + x1 * x1) * x2 * u52;
                return H;
            },
            name);
    }
    if (name == "cierre-x2") {
        // d/dx2 - x1 u^{-1/2} d/dt
        return VectorField::analytic(
            3,
            [](const Vec& x) {
                const double u = 1.0 + x[0] * x[0] + x[1] * x[1];
                Vec v(3);
                v << 0.0, 1.0, -x[0] / std::sqrt(u);
                return v;
            },
            [](const Vec& x) {
                const double u = 1.0 + x[0] * x[0] + x[1] * x[1];
                const double u32 = std::pow(u, -1.5);
                Mat J = Mat::Zero(3, 3);
                J(2, 0) = -(1.0 + x[1] * x[1]) * u32;
                J(2, 1) = x[0] * x[1] * u32;
                return J;
            },
            [](const Vec& x) {
                const double x1 = x[0], x2 = x[1];
                const double u = 1.0 + x1 * x1 + x2 * x2;
                const double u52 = std::pow(u, -2.5);
                std::vector<Mat> H(3, Mat::Zero(3, 3));
                H[2](0, 0) = 3.0 * (1.0 + x2 * x2) * x1 * u52;
                H[2](0, 1) = H[2](1, 0) = x2 * (1.0 + x2 * x2 - 2.0 * x1 * x1) * u52;
                H[2](1, 1) = x1 * (1.0 + x1 * x1 - 2.0 * x2 * x2) * u52;
                return H;
            },
            name);
    }
    if (name == "cierre-x12") {
        // -(2+|x|^2) u^{-3/2} d/dt  (the closed form of [X1, X2])
        return VectorField::analytic(
            3,
            [](const Vec& x) {
                const double r2 = x[0] * x[0] + x[1] * x[1];
                Vec v = Vec::Zero(3);
                v[2] = -(2.0 + r2) * std::pow(1.0 + r2, -1.5);
                return v;
            },
            [](const Vec& x) {
                const double r2 = x[0] * x[0] + x[1] * x[1];
                const double u52 = std::pow(1.0 + r2, -2.5);
                Mat J = Mat::Zero(3, 3);
                J(2, 0) = (4.0 + r2) * x[0] * u52;
                J(2, 1) = (4.0 + r2) * x[1] * u52;
                return J;
            },
            nullptr, name);
    }
    if (name == "cierre-x112" || name == "cierre-x212") {
        // (4+|x|^2) x_i u^{-5/2} d/dt with i = 1 resp. 2
        const int i = (name == "cierre-x112") ? 0 : 1;
        return VectorField::analytic(
            3,
            [i](const Vec& x) {
                const double r2 = x[0] * x[0] + x[1] * x[1];
                Vec v = Vec::Zero(3);
                v[2] = (4.0 + r2) * x[i] * std::pow(1.0 + r2, -2.5);
                return v;
            },
            [i](const Vec& x) {
                const double r2 = x[0] * x[0] + x[1] * x[1];
                const double u52 = std::pow(1.0 + r2, -2.5), u72 = std::pow(1.0 + r2, -3.5);
                Mat J = Mat::Zero(3, 3);
                for (int b = 0; b < 2; ++b) {
                    double d = 2.0 * x[b] * x[i] * u52 - 5.0 * (4.0 + r2) * x[i] * x[b] * u72;
                    if (b == i) d += (4.0 + r2) * u52;
                    J(2, b) = d;
                }
                return J;
            },
            nullptr, name);
    }
    throw SpecError("analytic_catalog: unknown entry '" + name + "'");
}

// ---------------------------------------------------------------------------
// System registry
// ---------------------------------------------------------------------------

/// Serializable definition of one generator: either a catalog name or
/// per-component monomial lists [coefficient, exponent-tuple].
struct GeneratorDef {
    std::string catalog;  // nonempty: registered-analytic entry
    std::vector<std::vector<std::pair<double, std::vector<int>>>> components;

    VectorField instantiate(int dim) const {
        if (!catalog.empty()) return analytic_catalog(catalog);
        if (int(components.size()) != dim)
            throw SpecError("generator: component count != dimension");
        std::vector<Polynomial> comps;
        for (const auto& comp : components) {
            Polynomial p(dim);
            for (const auto& [c, pw] : comp) p = p + Polynomial::monomial(dim, c, pw);
            comps.push_back(std::move(p));
        }
        return VectorField::from_polynomials(std::move(comps));
    }
};

/// One oracle identity carried by a system; verified at quasi-random points.
struct Relation {
    enum class Kind {
        bracket_combo,     // Y_word == sum of coeff * Y_word' (empty sum: == 0)
        bracket_constant,  // Y_word == a constant field
        bracket_catalog,   // Y_word == catalog field
        span_rank,         // listed words span every frame field; rank as given
        blowup_sum         // the sum of the generators escapes at blowup_time
    };
    Kind kind = Kind::bracket_combo;
    Word word;
    std::vector<std::pair<double, Word>> combo;
    Vec constant_value;
    std::string catalog;
    std::vector<Word> span_words;
    int expected_rank = -1;
    Vec blowup_point;
    double blowup_time = 0.0;
    double tolerance = 1e-10;
    std::string description;
};

struct SystemSpec {
    std::string name;
    int dimension = 0;
    std::vector<GeneratorDef> generator_defs;
    std::vector<VectorField> generators;
    int s = 1;
    Vec base_point;
    bool complete = true;
    std::string notes;
    std::vector<Relation> relations;
    // Ball-box radii calibrated once per system (0 = not calibrated).
    double default_eps = 0.0;
    double default_delta = 0.0;

    Frame frame() const { return enumerate_frame(generators, s); }
    Frame frame(int order) const { return enumerate_frame(generators, order); }
};

struct RelationReport {
    bool ok = true;
    double max_residual = 0.0;
    std::string detail;
};

/// Check every known relation of a system at quasi-random points.
inline RelationReport verify_relations(const SystemSpec& spec, int samples = 100,
                                       std::uint64_t seed = 1, double box_radius = 2.0) {
    RelationReport rep;
    const std::vector<VectorField>& gens = spec.generators;
    for (const Relation& rel : spec.relations) {
        double worst = 0.0;
        bool ok = true;
        switch (rel.kind) {
            case Relation::Kind::bracket_combo: {
                VectorField lhs = nested_commutator(rel.word, gens);
                std::vector<std::pair<double, VectorField>> rhs;
                for (const auto& [c, w] : rel.combo) rhs.emplace_back(c, nested_commutator(w, gens));
                QuasiRandom qr(spec.dimension, seed);
                for (int k = 0; k < samples; ++k) {
                    Vec x = qr.next_in_cube(box_radius);
                    Vec v = lhs.eval(x);
                    for (const auto& [c, f] : rhs) v -= c * f.eval(x);
                    worst = std::max(worst, v.norm());
                }
                ok = worst <= rel.tolerance;
                break;
            }
            case Relation::Kind::bracket_constant: {
                VectorField lhs = nested_commutator(rel.word, gens);
                QuasiRandom qr(spec.dimension, seed);
                for (int k = 0; k < samples; ++k) {
                    Vec x = qr.next_in_cube(box_radius);
                    worst = std::max(worst, (lhs.eval(x) - rel.constant_value).norm());
                }
                ok = worst <= rel.tolerance;
                break;
            }
            case Relation::Kind::bracket_catalog: {
                VectorField lhs = nested_commutator(rel.word, gens);
                VectorField rhs = analytic_catalog(rel.catalog);
                QuasiRandom qr(spec.dimension, seed);
                for (int k = 0; k < samples; ++k) {
                    Vec x = qr.next_in_cube(box_radius);
                    worst = std::max(worst, (lhs.eval(x) - rhs.eval(x)).norm());
                }
                ok = worst <= rel.tolerance;
                break;
            }
            case Relation::Kind::span_rank: {
                std::vector<VectorField> span_fields;
                for (const Word& w : rel.span_words)
                    span_fields.push_back(nested_commutator(w, gens));
                Frame fr = spec.frame();
                QuasiRandom qr(spec.dimension, seed);
                for (int k = 0; k < samples; ++k) {
                    Vec x = qr.next_in_cube(box_radius);
                    Mat S(spec.dimension, long(span_fields.size()));
                    for (std::size_t j = 0; j < span_fields.size(); ++j)
                        S.col(long(j)) = span_fields[j].eval(x);
                    Eigen::JacobiSVD<Mat> svd(S, Eigen::ComputeThinU);
                    int rank = 0;
                    for (long i = 0; i < svd.singularValues().size(); ++i)
                        if (svd.singularValues()(i) > 1e-9 * svd.singularValues()(0)) ++rank;
                    if (rel.expected_rank >= 0 && rank != rel.expected_rank) {
                        ok = false;
                        worst = std::max(worst, double(std::abs(rank - rel.expected_rank)));
                    }
                    // Every frame field must lie in the span of the listed ones.
                    Mat U = svd.matrixU().leftCols(rank);
                    for (int j = 0; j < fr.q(); ++j) {
                        Vec y = fr.fields[std::size_t(j)].eval(x);
                        const double resid = (y - U * (U.transpose() * y)).norm();
                        worst = std::max(worst, resid);
                        if (resid > rel.tolerance * std::max(1.0, y.norm())) ok = false;
                    }
                }
                break;
            }
            case Relation::Kind::blowup_sum: {
                VectorField sum = gens.front();
                for (std::size_t j = 1; j < gens.size(); ++j) sum = sum + gens[j];
                try {
                    flow(sum, rel.blowup_point, rel.blowup_time * 2.0);
                    ok = false;  // expected to escape before 2 t*
                    worst = std::numeric_limits<double>::infinity();
                } catch (const BlowUpError& e) {
                    worst = std::abs(e.t_star - rel.blowup_time);
                    ok = worst <= rel.tolerance;
                }
                break;
            }
        }
        rep.max_residual = std::max(rep.max_residual, worst);
        if (!ok) {
            rep.ok = false;
            rep.detail += (rep.detail.empty() ? "" : "; ") + rel.description + " failed (" +
                          std::to_string(worst) + ")";
        }
    }
    return rep;
}

namespace detail {

inline GeneratorDef poly_gen(
    std::vector<std::vector<std::pair<double, std::vector<int>>>> components) {
    GeneratorDef g;
    g.components = std::move(components);
    return g;
}

inline GeneratorDef catalog_gen(std::string name) {
    GeneratorDef g;
    g.catalog = std::move(name);
    return g;
}

inline SystemSpec finish(SystemSpec spec) {
    for (const auto& def : spec.generator_defs)
        spec.generators.push_back(def.instantiate(spec.dimension));
    return spec;
}

}  // namespace detail

inline std::vector<std::string> builtin_names() {
    return {"grushin", "heisenberg", "cr-sphere", "siegel-degenerate", "cierre", "xy-blowup"};
}

/// Built-in example systems with closed-form oracles.
inline SystemSpec builtin(const std::string& name) {
    using detail::catalog_gen;
    using detail::poly_gen;
    SystemSpec spec;
    spec.name = name;

    if (name == "grushin") {
        spec.dimension = 2;
        spec.s = 2;
        spec.base_point = Vec::Zero(2);
        spec.generator_defs = {poly_gen({{{1.0, {0, 0}}}, {}}),    // d/dx
                               poly_gen({{}, {{1.0, {1, 0}}}})};   // x d/dy
        Relation r;
        r.kind = Relation::Kind::bracket_constant;
        r.word = Word{{1, 2}};
        Vec dy(2);
        dy << 0, 1;
        r.constant_value = dy;
        r.description = "[X1,X2] = d/dy";
        spec.relations.push_back(r);
        // Constant structure coefficients: [X1,[X1,X2]] = 0 and [X2,[X1,X2]] = 0.
        Relation r2;
        r2.kind = Relation::Kind::bracket_combo;
        r2.word = Word{{1, 1, 2}};
        r2.description = "[X1,[X1,X2]] = 0";
        spec.relations.push_back(r2);
        Relation r3;
        r3.kind = Relation::Kind::bracket_combo;
        r3.word = Word{{2, 1, 2}};
        r3.description = "[X2,[X1,X2]] = 0";
        spec.relations.push_back(r3);
        spec.notes = "step-2 system; [X1,X2] = d/dy with constant structure coefficients";
        spec.default_eps = 0.5;   // frozen from bisection at the base point
        spec.default_delta = 0.56;
        spec = detail::finish(spec);
        return spec;
    }
    if (name == "heisenberg") {
        spec.dimension = 3;
        spec.s = 2;
        spec.base_point = Vec::Zero(3);
        spec.generator_defs = {
            poly_gen({{{1.0, {0, 0, 0}}}, {}, {{-0.5, {0, 1, 0}}}}),  // d/dx - y/2 d/dt
            poly_gen({{}, {{1.0, {0, 0, 0}}}, {{0.5, {1, 0, 0}}}})};  // d/dy + x/2 d/dt
        Relation r;
        r.kind = Relation::Kind::bracket_constant;
        r.word = Word{{1, 2}};
        Vec dt(3);
        dt << 0, 0, 1;
        r.constant_value = dt;
        r.description = "[X1,X2] = d/dt";
        spec.relations.push_back(r);
        Relation r2;
        r2.kind = Relation::Kind::bracket_combo;
        r2.word = Word{{1, 1, 2}};
        r2.description = "[X1,[X1,X2]] = 0";
        spec.relations.push_back(r2);
        Relation r3 = r2;
        r3.word = Word{{2, 1, 2}};
        r3.description = "[X2,[X1,X2]] = 0";
        spec.relations.push_back(r3);
        spec.notes = "Heisenberg frame; [X1,X2] = d/dt";
        spec.default_eps = 0.5;
        spec.default_delta = 0.56;
        spec = detail::finish(spec);
        return spec;
    }
    if (name == "cr-sphere") {
        spec.dimension = 4;
        spec.s = 2;
        Vec bp(4);
        bp << 1, 0, 0, 0;
        spec.base_point = bp;
        // coordinates (x1, x2, y1, y2)
        spec.generator_defs = {
            poly_gen({{{-1.0, {0, 1, 0, 0}}},
                      {{1.0, {1, 0, 0, 0}}},
                      {{1.0, {0, 0, 0, 1}}},
                      {{-1.0, {0, 0, 1, 0}}}}),
            poly_gen({{{-1.0, {0, 0, 0, 1}}},
                      {{1.0, {0, 0, 1, 0}}},
                      {{-1.0, {0, 1, 0, 0}}},
                      {{1.0, {1, 0, 0, 0}}}})};
        Relation r;
        r.kind = Relation::Kind::bracket_combo;
        r.word = Word{{1, 1, 2}};
        r.combo = {{-4.0, Word{{2}}}};
        r.description = "X_112 = -4 X_2";
        spec.relations.push_back(r);
        Relation r2;
        r2.kind = Relation::Kind::bracket_combo;
        r2.word = Word{{2, 1, 2}};
        r2.combo = {{4.0, Word{{1}}}};
        r2.description = "X_212 = 4 X_1";
        spec.relations.push_back(r2);
        Relation r3;
        r3.kind = Relation::Kind::span_rank;
        r3.span_words = {Word{{1}}, Word{{2}}, Word{{1, 2}}};
        r3.expected_rank = 3;
        r3.tolerance = 1e-9;
        r3.description = "Lie span has dimension three";
        spec.relations.push_back(r3);
        spec.notes = "CR fields on the sphere; orbits are 3-dimensional in ambient R^4";
        spec = detail::finish(spec);
        return spec;
    }
    if (name == "siegel-degenerate") {
        spec.dimension = 3;
        spec.s = 4;
        spec.base_point = Vec::Zero(3);
        // p(x) = |x|^4: X1 = d/dx1 + 4 x2 |x|^2 d/dt, X2 = d/dx2 - 4 x1 |x|^2 d/dt
        spec.generator_defs = {
            poly_gen({{{1.0, {0, 0, 0}}}, {}, {{4.0, {2, 1, 0}}, {4.0, {0, 3, 0}}}}),
            poly_gen({{}, {{1.0, {0, 0, 0}}}, {{-4.0, {3, 0, 0}}, {-4.0, {1, 2, 0}}}})};
        Relation r;
        r.kind = Relation::Kind::span_rank;
        r.span_words = {Word{{1}},       Word{{2}},       Word{{1, 2}},
                        Word{{1, 1, 2}}, Word{{2, 1, 2}}, Word{{1, 1, 1, 2}}};
        r.expected_rank = 3;
        r.tolerance = 1e-8;
        r.description = "Lie span = {X1,X2,X12,X112,X212,X1112}";
        spec.relations.push_back(r);
        spec.notes = "degenerate surface |x|^4; the vertical direction needs a length-4 bracket "
                     "on the axis x = 0";
        spec = detail::finish(spec);
        return spec;
    }
    if (name == "cierre") {
        spec.dimension = 3;
        spec.s = 2;
        spec.base_point = Vec::Zero(3);
        spec.generator_defs = {catalog_gen("cierre-x1"), catalog_gen("cierre-x2")};
        Relation r;
        r.kind = Relation::Kind::bracket_catalog;
        r.word = Word{{1, 2}};
        r.catalog = "cierre-x12";
        r.tolerance = 1e-9;
        r.description = "[X1,X2] = -(2+|x|^2)(1+|x|^2)^{-3/2} d/dt";
        spec.relations.push_back(r);
        Relation r2;
        r2.kind = Relation::Kind::bracket_catalog;
        r2.word = Word{{1, 1, 2}};
        r2.catalog = "cierre-x112";
        r2.tolerance = 1e-9;
        r2.description = "X_112 = (4+|x|^2) x1 (1+|x|^2)^{-5/2} d/dt";
        spec.relations.push_back(r2);
        Relation r3;
        r3.kind = Relation::Kind::bracket_catalog;
        r3.word = Word{{2, 1, 2}};
        r3.catalog = "cierre-x212";
        r3.tolerance = 1e-9;
        r3.description = "X_212 = (4+|x|^2) x2 (1+|x|^2)^{-5/2} d/dt";
        spec.relations.push_back(r3);
        spec.notes = "surface (1+|x|^2)^{1/2} - 1: infinite-dimensional Lie algebra with "
                     "globally bounded structure coefficients";
        spec.default_eps = 0.5;
        spec.default_delta = 0.56;
        spec = detail::finish(spec);
        return spec;
    }
    if (name == "xy-blowup") {
        spec.dimension = 2;
        spec.s = 1;
        Vec bp(2);
        bp << 1, 1;
        spec.base_point = bp;
        spec.complete = false;
        spec.generator_defs = {poly_gen({{{1.0, {1, 1}}}, {}}),   // xy d/dx
                               poly_gen({{}, {{1.0, {1, 1}}}})};  // xy d/dy
        Relation r;
        r.kind = Relation::Kind::blowup_sum;
        Vec p(2);
        p << 1, 1;
        r.blowup_point = p;
        r.blowup_time = 1.0;
        r.tolerance = 1e-2;
        r.description = "X+Y escapes from (1,1) at t = 1";
        spec.relations.push_back(r);
        spec.notes = "pair of complete fields whose sum is not complete";
        spec = detail::finish(spec);
        return spec;
    }
    throw UnknownSystemError(name);
}

}  // namespace ccgeo
