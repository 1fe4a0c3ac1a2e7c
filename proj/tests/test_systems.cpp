#include "ccgeo/systems.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ccgeo;

TEST(Systems, RegistryNamesAndUnknown) {
    for (const std::string& n : builtin_names()) {
        SystemSpec spec = builtin(n);
        EXPECT_EQ(spec.name, n);
        EXPECT_GT(spec.dimension, 0);
        EXPECT_EQ(int(spec.generators.size()), int(spec.generator_defs.size()));
        EXPECT_EQ(spec.base_point.size(), spec.dimension);
    }
    EXPECT_THROW(builtin("nonesuch"), UnknownSystemError);
    EXPECT_THROW(analytic_catalog("nonesuch"), SpecError);
}

TEST(Systems, AllKnownRelationsHold) {
    for (const std::string& n : builtin_names()) {
        SystemSpec spec = builtin(n);
        RelationReport rep = verify_relations(spec, 100, 1);
        EXPECT_TRUE(rep.ok) << n << ": " << rep.detail;
    }
}

TEST(Systems, CierreCatalogDerivativesMatchFiniteDifferences) {
    for (const char* name :
         {"cierre-x1", "cierre-x2", "cierre-x12", "cierre-x112", "cierre-x212"}) {
        VectorField F = analytic_catalog(name);
        QuasiRandom qr(3, 7);
        for (int t = 0; t < 20; ++t) {
            Vec x = qr.next_in_cube(2.0);
            Mat J = F.jacobian(x);
            const double h = 1e-6;
            Mat Jfd(3, 3);
            for (int b = 0; b < 3; ++b) {
                Vec xp = x, xm = x;
                xp[b] += h;
                xm[b] -= h;
                Jfd.col(b) = (F.eval(xp) - F.eval(xm)) / (2 * h);
            }
            EXPECT_LT((J - Jfd).cwiseAbs().maxCoeff(), 1e-8) << name;
            if (F.has_hessian()) {
                auto H = F.hessian(x);
                for (int b = 0; b < 3; ++b) {
                    Vec xp = x, xm = x;
                    xp[b] += h;
                    xm[b] -= h;
                    Mat dJ = (F.jacobian(xp) - F.jacobian(xm)) / (2 * h);
                    for (int a = 0; a < 3; ++a)
                        for (int g = 0; g < 3; ++g)
                            EXPECT_NEAR(H[std::size_t(a)](g, b), dJ(a, g), 1e-8) << name;
                }
            }
        }
    }
}

TEST(Systems, CierreStructureCoefficientClosedForm) {
    // X_112 = c(x) X_12 with c = -(4+|x|^2) x1 / ((2+|x|^2)(1+|x|^2)),
    // obtained by dividing the two displayed coefficients.
    SystemSpec spec = builtin("cierre");
    VectorField x12 = nested_commutator(Word{{1, 2}}, spec.generators);
    VectorField x112 = nested_commutator(Word{{1, 1, 2}}, spec.generators);
    QuasiRandom qr(3, 11);
    for (int t = 0; t < 50; ++t) {
        Vec x = qr.next_in_cube(3.0);
        const double r2 = x[0] * x[0] + x[1] * x[1];
        const double c = -(4.0 + r2) * x[0] / ((2.0 + r2) * (1.0 + r2));
        EXPECT_LT((x112.eval(x) - c * x12.eval(x)).norm(), 1e-9);
    }
}

TEST(Systems, SiegelSpanDropsOnAxis) {
    // On the degenerate axis x1 = x2 = 0 the brackets up to length 3 vanish
    // and only the length-4 bracket restores the vertical direction.
    SystemSpec spec = builtin("siegel-degenerate");
    Vec axis(3);
    axis << 0, 0, 0.7;
    VectorField x12 = nested_commutator(Word{{1, 2}}, spec.generators);
    VectorField x112 = nested_commutator(Word{{1, 1, 2}}, spec.generators);
    VectorField x1112 = nested_commutator(Word{{1, 1, 1, 2}}, spec.generators);
    EXPECT_LT(x12.eval(axis).norm(), 1e-12);
    EXPECT_LT(x112.eval(axis).norm(), 1e-12);
    EXPECT_NEAR(x1112.eval(axis)[2], -32.0, 1e-10);
}

TEST(Systems, XyBlowupRegistryFlagsIncomplete) {
    SystemSpec spec = builtin("xy-blowup");
    EXPECT_FALSE(spec.complete);
    EXPECT_EQ(spec.s, 1);
}
