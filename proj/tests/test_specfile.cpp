#include "ccgeo/specfile.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace ccgeo;

TEST(SpecFile, RoundTripBuiltins) {
    for (const std::string& name : builtin_names()) {
        SystemSpec spec = builtin(name);
        Json j = system_to_json(spec);
        SystemSpec back = system_from_json(j);
        EXPECT_EQ(back.name, spec.name);
        EXPECT_EQ(back.dimension, spec.dimension);
        EXPECT_EQ(back.s, spec.s);
        EXPECT_EQ(back.complete, spec.complete);
        EXPECT_EQ(back.relations.size(), spec.relations.size());
        // fields evaluate identically after the round trip
        QuasiRandom qr(spec.dimension, 3);
        for (int t = 0; t < 10; ++t) {
            Vec x = qr.next_in_cube(1.5);
            for (std::size_t g = 0; g < spec.generators.size(); ++g)
                EXPECT_LT((spec.generators[g].eval(x) - back.generators[g].eval(x)).norm(), 1e-15)
                    << name;
        }
        // and the reloaded relations still pass
        RelationReport rep = verify_relations(back, 25, 5);
        EXPECT_TRUE(rep.ok) << name << ": " << rep.detail;
        // serialization is deterministic
        EXPECT_EQ(j.dump(2), system_to_json(back).dump(2));
    }
}

TEST(SpecFile, RejectsMalformedSpecs) {
    Json j = system_to_json(builtin("grushin"));
    Json bad = j;
    bad.erase("spec_version");
    EXPECT_THROW(system_from_json(bad), SpecError);
    bad = j;
    bad["spec_version"] = 2;
    EXPECT_THROW(system_from_json(bad), SpecError);
    bad = j;
    bad["generators"] = Json::array();
    EXPECT_THROW(system_from_json(bad), SpecError);
    bad = j;
    bad["generators"][0]["polynomial"][0] = Json::array({Json::array({1.0, Json::array({1})})});
    EXPECT_THROW(system_from_json(bad), SpecError);  // exponent arity
    bad = j;
    bad["relations"][0]["kind"] = "unknown-kind";
    EXPECT_THROW(system_from_json(bad), SpecError);
}

TEST(SpecFile, ScheduleCsv) {
    std::stringstream ss;
    ss << "t_start,b1,b2\n0.0,1.0,0.0\n0.5,0.0,-1.0\n2.0,0,0\n";
    ControlSchedule s = load_schedule_csv(ss, 2);
    EXPECT_NEAR(s.horizon(), 2.0, 1e-15);
    EXPECT_EQ(s.values.size(), 2u);
    EXPECT_EQ(s.at(0.25)[0], 1.0);
    EXPECT_EQ(s.at(1.0)[1], -1.0);

    std::stringstream bad;
    bad << "t_start,b1,b2\n0.0,2.0,0.0\n1.0,0,0\n";  // exceeds |b|_inf <= 1
    EXPECT_THROW(load_schedule_csv(bad, 2), SpecError);
}

TEST(SpecFile, CsvWritersAreDeterministic) {
    SystemSpec spec = builtin("grushin");
    Frame f = spec.frame();
    QuasiRandom qr(2, 9);
    std::vector<Vec> pts;
    for (int i = 0; i < 5; ++i) pts.push_back(qr.next_in_cube(1.0));
    InvolutivityReport rep = check_involutivity(f, pts, 1e-9, false);
    std::stringstream a, b;
    write_involutivity_csv(a, rep, f);
    write_involutivity_csv(b, rep, f);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_NE(a.str().find("c4"), std::string::npos);

    Vec ctl = Vec::Zero(f.q());
    ctl[0] = 1.0;
    Trajectory tr = integrate_cauchy(f, spec.base_point, ControlSchedule::constant(ctl, 0.5), 0.5,
                                     IntegrationMode::direct);
    std::stringstream c;
    write_trajectory_csv(c, tr);
    EXPECT_NE(c.str().find("t,x1,x2,step"), std::string::npos);

    BallBoxReport bb = ball_box_verify(f, spec.base_point, 0.5, 0.2, 3, {}, 5);
    std::stringstream d, e;
    write_ballbox_csv(d, bb);
    write_ballbox_csv(e, bb);
    EXPECT_EQ(d.str(), e.str());
}

TEST(SpecFile, FileRoundTrip) {
    SystemSpec spec = builtin("heisenberg");
    const std::string path = "/tmp/ccgeo_test_system.json";
    {
        std::ofstream out(path);
        out << system_to_json(spec).dump(2) << "\n";
    }
    SystemSpec loaded = load_system_file(path);
    EXPECT_EQ(loaded.name, "heisenberg");
    EXPECT_EQ(loaded.dimension, 3);
    EXPECT_THROW(load_system_file("/nonexistent/nope.json"), SpecError);
}
