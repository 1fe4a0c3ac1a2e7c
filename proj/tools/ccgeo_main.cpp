// ccgeo command-line tool: bracket tables, flows, approximate exponentials,
// horizontal lifts, involutivity reports, ball-box verification, global
// integration, and blow-up detection for the built-in systems or user spec
// files.
//
// Exit codes: 0 success, 1 validation error, 2 numerical failure
// (rank-deficiency / blow-up), 3 verification failure.

#include "ccgeo/ccgeo.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace ccgeo;

Vec parse_vec(const std::string& s) {
    std::vector<double> vals;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    Vec v(long(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v[long(i)] = vals[i];
    return v;
}

Word parse_word(const std::string& s) {
    Word w;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) w.letters.push_back(std::stoi(cell));
    if (w.letters.empty()) throw SpecError("empty word");
    return w;
}

void emit(const Json& summary, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << summary.dump(2) << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw SpecError("cannot open output file: " + out_path);
        out << summary.dump(2) << "\n";
    }
}

void emit_csv(const std::string& csv, const std::string& path) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw SpecError("cannot open csv file: " + path);
    out << csv;
}

struct CommonOpts {
    std::string system = "grushin";
    std::string spec_path;
    std::string out_path;
    std::string csv_path;
    std::uint64_t seed = 1;
    double tol_rel = 1e-10;
    double tol_abs = 1e-12;

    void attach(CLI::App* cmd, bool with_system = true) {
        if (with_system) {
            cmd->add_option("--system", system, "built-in system name");
            cmd->add_option("--spec", spec_path, "system spec file (overrides --system)");
        }
        cmd->add_option("--seed", seed, "seed for quasi-random sampling");
        cmd->add_option("--out", out_path, "summary output path (default: stdout)");
        cmd->add_option("--csv", csv_path, "tabular output path");
        cmd->add_option("--tol-rel", tol_rel, "integrator relative tolerance");
        cmd->add_option("--tol-abs", tol_abs, "integrator absolute tolerance");
    }

    IntegratorConfig cfg() const {
        IntegratorConfig c;
        c.rel_tol = tol_rel;
        c.abs_tol = tol_abs;
        return c;
    }

    Json header(const std::string& command) const {
        Json j;
        j["tool"] = "ccgeo";
        j["command"] = command;
        if (!spec_path.empty())
            j["spec"] = spec_path;
        else
            j["system"] = system;
        j["seed"] = seed;
        j["tol_rel"] = tol_rel;
        j["tol_abs"] = tol_abs;
        return j;
    }
};

int cmd_bracket_table(const CommonOpts& o, int samples, int order) {
    SystemSpec spec = resolve_system(o.system, o.spec_path);
    if (order > 0) spec.s = order;
    Frame frame = spec.frame();
    QuasiRandom qr(spec.dimension, o.seed);
    std::vector<Vec> pts;
    for (int i = 0; i < samples; ++i) pts.push_back(qr.next_in_cube(2.0));

    Json j = o.header("bracket-table");
    j["s"] = frame.s;
    j["q"] = frame.q();
    Json table = Json::array();
    std::ostringstream csv;
    csv << "j,word,degree,sup_norm\n";
    for (int k = 0; k < frame.q(); ++k) {
        double sup = 0.0;
        for (const Vec& x : pts) sup = std::max(sup, frame.fields[std::size_t(k)].eval(x).norm());
        Json row;
        row["j"] = k + 1;
        row["word"] = to_string(frame.words[std::size_t(k)]);
        row["degree"] = frame.degrees[std::size_t(k)];
        row["sup_norm"] = sup;
        table.push_back(row);
        csv << (k + 1) << ',' << '"' << to_string(frame.words[std::size_t(k)]) << '"' << ','
            << frame.degrees[std::size_t(k)] << ',' << format_double(sup) << '\n';
    }
    j["fields"] = table;
    RelationReport rel = verify_relations(spec, samples, o.seed);
    Json rels = Json::array();
    for (const Relation& r : spec.relations) {
        Json jr;
        jr["description"] = r.description;
        jr["tolerance"] = r.tolerance;
        rels.push_back(jr);
    }
    j["relations"] = rels;
    j["relations_max_residual"] = rel.max_residual;
    j["relations_pass"] = rel.ok;
    if (!rel.ok) j["relations_detail"] = rel.detail;
    emit(j, o.out_path);
    emit_csv(csv.str(), o.csv_path);
    return rel.ok ? 0 : 3;
}

int cmd_flow(const CommonOpts& o, const std::string& word_s, const std::string& point_s,
             double t) {
    SystemSpec spec = resolve_system(o.system, o.spec_path);
    Word w = parse_word(word_s);
    VectorField X = nested_commutator(w, spec.generators);
    Vec x0 = parse_vec(point_s);
    if (x0.size() != spec.dimension) throw SpecError("point dimension mismatch");

    long steps = 0;
    double hmin = std::numeric_limits<double>::infinity(), hmax = 0.0;
    StepObserver obs = [&](double, const Vec&, double h) {
        ++steps;
        hmin = std::min(hmin, std::abs(h));
        hmax = std::max(hmax, std::abs(h));
    };
    Json j = o.header("flow");
    j["word"] = to_string(w);
    j["t"] = t;
    Vec y = t == 0.0 ? x0
                     : integrate([&X](double, const Vec& p) { return X.eval(p); }, x0, 0.0, t,
                                 o.cfg(), obs);
    j["endpoint"] = detail::vec_to_json(y);
    j["accepted_steps"] = steps;
    j["min_step"] = steps ? hmin : 0.0;
    j["max_step"] = steps ? hmax : 0.0;
    emit(j, o.out_path);
    return 0;
}

int cmd_approx_exp(const CommonOpts& o, const std::string& word_s, const std::string& point_s,
                   double tmin, double tmax, int tcount) {
    SystemSpec spec = resolve_system(o.system, o.spec_path);
    Word w = parse_word(word_s);
    VectorField Yw = nested_commutator(w, spec.generators);
    Vec x0 = point_s.empty() ? spec.base_point : parse_vec(point_s);
    if (x0.size() != spec.dimension) throw SpecError("point dimension mismatch");
    if (!(tmin > 0.0) || !(tmax > tmin) || tcount < 2) throw SpecError("bad t-grid");

    const Vec yw = Yw.eval(x0);
    std::vector<double> ts, ds;
    std::ostringstream csv;
    csv << "t,deviation\n";
    for (int i = 0; i < tcount; ++i) {
        const double t = tmin * std::pow(tmax / tmin, double(i) / (tcount - 1));
        const Vec dev = approx_exp(w, spec.generators, t, x0, o.cfg()) - x0 - t * yw;
        ts.push_back(t);
        ds.push_back(dev.norm());
        csv << format_double(t) << ',' << format_double(dev.norm()) << '\n';
    }
    // log-log slope (only meaningful above the integration noise floor)
    const double floor = 100.0 * (o.tol_abs + o.tol_rel * (1.0 + x0.norm()));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int npts = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ds[i] <= floor) continue;
        const double lx = std::log(ts[i]), ly = std::log(ds[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++npts;
    }
    Json j = o.header("approx-exp");
    j["word"] = to_string(w);
    j["point"] = detail::vec_to_json(x0);
    j["expected_slope"] = 1.0 + 1.0 / w.length();
    if (npts >= 2) {
        j["slope"] = (npts * sxy - sx * sy) / (npts * sxx - sx * sx);
        j["at_noise_floor"] = false;
    } else {
        j["slope"] = nullptr;
        j["at_noise_floor"] = true;  // deviations at integration noise: exact composition
    }
    j["max_deviation"] = ds.empty() ? 0.0 : *std::max_element(ds.begin(), ds.end());
    emit(j, o.out_path);
    emit_csv(csv.str(), o.csv_path);
    return 0;
}

int cmd_lift(const CommonOpts& o, const std::string& submersion_name, const std::string& theta0_s,
             const std::string& target_s, const std::string& path_csv, int grid_n) {
    Submersion f = builtin_submersion(submersion_name);
    Vec theta0 = theta0_s.empty() ? f.center : parse_vec(theta0_s);
    if (theta0.size() != f.dom_dim) throw SpecError("theta0 dimension mismatch");

    TargetPath gamma;
    if (!path_csv.empty()) {
        std::ifstream in(path_csv);
        if (!in) throw SpecError("cannot open path file: " + path_csv);
        std::vector<double> times;
        std::vector<Vec> values;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || !(std::isdigit(line[0]) || line[0] == '-' || line[0] == '+' ||
                                  line[0] == '.'))
                continue;
            Vec row = parse_vec(line);
            if (row.size() != f.codom_dim + 1)
                throw SpecError("path CSV: row needs t plus codomain values");
            times.push_back(row[0]);
            values.push_back(row.tail(f.codom_dim));
        }
        gamma = TargetPath::from_samples(std::move(times), std::move(values));
    } else if (!target_s.empty()) {
        const Vec y = parse_vec(target_s);
        if (y.size() != f.codom_dim) throw SpecError("target dimension mismatch");
        const Vec y0 = f.eval(theta0);
        gamma = TargetPath::from_closure([y0, y](double t) -> Vec { return (1.0 - t) * y0 + t * y; },
                                         [y0, y](double) -> Vec { return y - y0; }, grid_n);
    } else {
        throw SpecError("lift: need --target or --path-csv");
    }

    LiftResult lift = horizontal_lift(f, gamma, theta0, o.cfg());
    Json j = o.header("lift");
    j["submersion"] = submersion_name;
    j["exit"] = to_string(lift.exit);
    j["exit_time"] = lift.exit_time;
    j["max_residual"] = lift.max_residual;
    j["lipschitz_observed"] = lift.lipschitz_observed;
    j["speed_bound_r1"] = gamma.speed_bound;
    j["endpoint"] = detail::vec_to_json(lift.theta.back());
    HorizontalityReport ver = verify_horizontal(f, lift.times, lift.theta, &gamma);
    j["verify_residual"] = ver.residual_to_target;
    j["verify_orthogonality_defect"] = ver.orthogonality_defect;
    emit(j, o.out_path);
    std::ostringstream csv;
    csv << "t";
    for (int i = 0; i < f.dom_dim; ++i) csv << ",theta" << (i + 1);
    csv << "\n";
    for (std::size_t i = 0; i < lift.times.size(); ++i) {
        csv << format_double(lift.times[i]);
        for (int d = 0; d < f.dom_dim; ++d) csv << ',' << format_double(lift.theta[i][d]);
        csv << '\n';
    }
    emit_csv(csv.str(), o.csv_path);
    if (lift.exit == LiftExit::rank_deficient || lift.exit == LiftExit::blowup) return 2;
    return 0;
}

int cmd_involutivity(const CommonOpts& o, double grid_radius, int count) {
    SystemSpec spec = resolve_system(o.system, o.spec_path);
    Frame frame = spec.frame();
    QuasiRandom qr(spec.dimension, o.seed);
    std::vector<Vec> pts;
    for (int i = 0; i < count; ++i) pts.push_back(qr.next_in_cube(grid_radius));
    InvolutivityReport rep = check_involutivity(frame, pts);
    Json j = o.header("involutivity");
    j["grid_radius"] = grid_radius;
    j["count"] = count;
    j["C1_hat"] = rep.C1_hat;
    j["max_residual"] = rep.max_residual;
    j["scale"] = rep.scale;
    j["involutive"] = rep.involutive;
    j["max_coeff_variance"] = rep.max_coeff_variance;
    j["constant_fit_residual"] = rep.constant_fit_residual;
    j["rank_min"] = rep.rank_min;
    j["rank_max"] = rep.rank_max;
    j["rank_constant"] = rep.rank_constant;
    emit(j, o.out_path);
    std::ostringstream csv;
    write_involutivity_csv(csv, rep, frame);
    emit_csv(csv.str(), o.csv_path);
    return 0;
}

int cmd_ballbox(const CommonOpts& o, const std::string& point_s, double eps, double delta,
                int count, bool calibrate) {
    SystemSpec spec = resolve_system(o.system, o.spec_path);
    Frame frame = spec.frame();
    Vec x = point_s.empty() ? spec.base_point : parse_vec(point_s);
    if (x.size() != spec.dimension) throw SpecError("point dimension mismatch");
    if (eps <= 0.0) eps = spec.default_eps > 0.0 ? spec.default_eps : 0.5;
    if (delta <= 0.0) delta = spec.default_delta;
    if (calibrate || delta <= 0.0) {
        auto [e, d] = calibrate_ballbox(frame, x, eps, 0.8, std::max(8, count / 2), o.cfg(), o.seed);
        eps = e;
        delta = d;
    }
    BallBoxReport rep = ball_box_verify(frame, x, eps, delta, count, o.cfg(), o.seed);
    Json j = o.header("ballbox");
    j["point"] = detail::vec_to_json(x);
    j["epsilon"] = eps;
    j["delta"] = delta;
    j["count"] = count;
    j["success_rate"] = rep.success_rate;
    j["pass"] = rep.passed();
    emit(j, o.out_path);
    std::ostringstream csv;
    write_ballbox_csv(csv, rep);
    emit_csv(csv.str(), o.csv_path);
    return rep.passed() ? 0 : 3;
}

int cmd_palais(const CommonOpts& o, const std::string& schedule_path, const std::string& wave_s,
               const std::string& point_s, double T, const std::string& mode_s, double delta) {
    SystemSpec spec = resolve_system(o.system, o.spec_path);
    Frame frame = spec.frame();
    Vec x = point_s.empty() ? spec.base_point : parse_vec(point_s);
    if (x.size() != spec.dimension) throw SpecError("point dimension mismatch");

    ControlSchedule schedule;
    if (!schedule_path.empty()) {
        std::ifstream in(schedule_path);
        if (!in) throw SpecError("cannot open schedule file: " + schedule_path);
        schedule = load_schedule_csv(in, frame.q());
    } else if (!wave_s.empty()) {
        const Vec p = parse_vec(wave_s);
        if (p.size() != 3) throw SpecError("--square-wave needs i,j,period");
        schedule = ControlSchedule::square_wave(frame.q(), int(p[0]) - 1, int(p[1]) - 1, p[2], T);
    } else {
        throw SpecError("palais: need --schedule or --square-wave");
    }

    const IntegrationMode mode =
        mode_s == "renewal" ? IntegrationMode::renewal : IntegrationMode::direct;
    if (mode == IntegrationMode::renewal && delta <= 0.0)
        delta = spec.default_delta > 0.0 ? spec.default_delta : 0.5;
    Trajectory tr = integrate_cauchy(frame, x, schedule, T, mode, o.cfg(),
                                     delta > 0.0 ? delta : 0.5);
    Json j = o.header("palais");
    j["mode"] = to_string(mode);
    j["T"] = T;
    j["blowup"] = tr.blowup_time.has_value();
    if (tr.blowup_time) j["blowup_time"] = *tr.blowup_time;
    j["endpoint"] = detail::vec_to_json(tr.points.back());
    j["n_nodes"] = tr.times.size();
    if (mode == IntegrationMode::renewal) j["renewal_chunks"] = tr.renewal_anchors.size();
    emit(j, o.out_path);
    std::ostringstream csv;
    write_trajectory_csv(csv, tr);
    emit_csv(csv.str(), o.csv_path);
    return tr.blowup_time.has_value() ? 2 : 0;
}

int cmd_blowup(const CommonOpts& o, const std::string& point_s, double tmax) {
    SystemSpec spec = resolve_system(o.system, o.spec_path);
    Vec x = point_s.empty() ? spec.base_point : parse_vec(point_s);
    if (x.size() != spec.dimension) throw SpecError("point dimension mismatch");
    VectorField sum = spec.generators.front();
    for (std::size_t i = 1; i < spec.generators.size(); ++i) sum = sum + spec.generators[i];
    std::optional<double> t_star = detect_blowup(sum, x, tmax, o.cfg());
    Json j = o.header("blowup");
    j["point"] = detail::vec_to_json(x);
    j["t_max"] = tmax;
    j["field"] = "sum-of-generators";
    j["blowup"] = t_star.has_value();
    if (t_star) j["t_star"] = *t_star;
    emit(j, o.out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geometric-control toolkit: horizontal lifting, approximate exponentials, "
                 "ball-box verification, completeness"};
    app.require_subcommand(1);

    CommonOpts bt, fl, ax, li, inv, bb, pa, bu;
    int bt_samples = 100;
    int bt_order = 0;
    auto* c_bt = app.add_subcommand("bracket-table", "enumerated frame with relation residuals");
    bt.attach(c_bt);
    c_bt->add_option("--count", bt_samples, "sample count");
    c_bt->add_option("-s,--order", bt_order, "override the commutator order s");

    std::string fl_word = "1", fl_point;
    double fl_t = 1.0;
    auto* c_fl = app.add_subcommand("flow", "integrate one frame field");
    fl.attach(c_fl);
    c_fl->add_option("--word", fl_word, "bracket word, e.g. 1,2");
    c_fl->add_option("--point", fl_point, "start point")->required();
    c_fl->add_option("-t,--time", fl_t, "flow time");

    std::string ax_word = "1,2", ax_point;
    double ax_tmin = 1e-4, ax_tmax = 1e-2;
    int ax_tcount = 9;
    auto* c_ax = app.add_subcommand("approx-exp", "approximate-exponential convergence order");
    ax.attach(c_ax);
    c_ax->add_option("--word", ax_word, "bracket word");
    c_ax->add_option("--point", ax_point, "base point (default: system base point)");
    c_ax->add_option("--tmin", ax_tmin, "smallest t");
    c_ax->add_option("--tmax", ax_tmax, "largest t");
    c_ax->add_option("--tcount", ax_tcount, "grid size");

    std::string li_sub = "arctan-example", li_theta0, li_target, li_path;
    int li_grid = 512;
    auto* c_li = app.add_subcommand("lift", "horizontal lift through a named submersion");
    li.attach(c_li, /*with_system=*/false);
    c_li->add_option("--submersion", li_sub,
                     "arctan-example | nonuni | xyz-linear | kernel-example");
    c_li->add_option("--theta0", li_theta0, "start point upstairs (default: center)");
    c_li->add_option("--target", li_target, "target point (straight segment path)");
    c_li->add_option("--path-csv", li_path, "target path file: rows t,gamma1..gammap");
    c_li->add_option("--grid", li_grid, "grid size for --target paths");

    double inv_radius = 10.0;
    int inv_count = 100;
    auto* c_inv = app.add_subcommand("involutivity", "involutivity report with C1 bound");
    inv.attach(c_inv);
    c_inv->add_option("--grid-radius", inv_radius, "sample box half-width");
    c_inv->add_option("--count", inv_count, "sample count");

    std::string bb_point;
    double bb_eps = 0.0, bb_delta = 0.0;
    int bb_count = 100;
    bool bb_cal = false;
    auto* c_bb = app.add_subcommand("ballbox", "ball-box verification at a base point");
    bb.attach(c_bb);
    c_bb->add_option("--point", bb_point, "base point (default: system base point)");
    c_bb->add_option("--epsilon", bb_eps, "Euclidean box radius in h-space");
    c_bb->add_option("--delta", bb_delta, "CC ball radius (default: calibrated)");
    c_bb->add_option("--count", bb_count, "number of targets");
    c_bb->add_flag("--calibrate", bb_cal, "bisect delta at this point first");

    std::string pa_schedule, pa_wave, pa_point, pa_mode = "direct";
    double pa_T = 1.0, pa_delta = 0.0;
    auto* c_pa = app.add_subcommand("palais", "integrate the non-autonomous Cauchy problem");
    pa.attach(c_pa);
    c_pa->add_option("--schedule", pa_schedule, "control schedule CSV (t_start,b1..bq)");
    c_pa->add_option("--square-wave", pa_wave, "i,j,period alternating control");
    c_pa->add_option("--point", pa_point, "start point (default: base point)");
    c_pa->add_option("--tmax", pa_T, "integration horizon");
    c_pa->add_option("--mode", pa_mode, "direct | renewal")
        ->check(CLI::IsMember({"direct", "renewal"}));
    c_pa->add_option("--delta", pa_delta, "renewal chunk parameter");

    std::string bu_point;
    double bu_tmax = 2.0;
    auto* c_bu = app.add_subcommand("blowup", "detect finite-time escape of the generator sum");
    bu.attach(c_bu);
    c_bu->add_option("--point", bu_point, "start point (default: base point)");
    c_bu->add_option("--tmax", bu_tmax, "detection horizon");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // validation error
    }

    try {
        if (c_bt->parsed()) return cmd_bracket_table(bt, bt_samples, bt_order);
        if (c_fl->parsed()) return cmd_flow(fl, fl_word, fl_point, fl_t);
        if (c_ax->parsed()) return cmd_approx_exp(ax, ax_word, ax_point, ax_tmin, ax_tmax, ax_tcount);
        if (c_li->parsed()) return cmd_lift(li, li_sub, li_theta0, li_target, li_path, li_grid);
        if (c_inv->parsed()) return cmd_involutivity(inv, inv_radius, inv_count);
        if (c_bb->parsed()) return cmd_ballbox(bb, bb_point, bb_eps, bb_delta, bb_count, bb_cal);
        if (c_pa->parsed())
            return cmd_palais(pa, pa_schedule, pa_wave, pa_point, pa_T, pa_mode, pa_delta);
        if (c_bu->parsed()) return cmd_blowup(bu, bu_point, bu_tmax);
    } catch (const RankDeficientError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const BlowUpError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const StepBudgetError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const NotInRangeError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const RankZeroError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
