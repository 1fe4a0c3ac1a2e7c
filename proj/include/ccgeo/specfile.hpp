#pragma once

#include "ccgeo/ballbox.hpp"
#include "ccgeo/common.hpp"
#include "ccgeo/frame.hpp"
#include "ccgeo/palais.hpp"
#include "ccgeo/systems.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace ccgeo {

using Json = nlohmann::ordered_json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// System spec files (spec_version: 1)
// ---------------------------------------------------------------------------

namespace detail {

inline Json word_to_json(const Word& w) { return Json(w.letters); }

inline Word word_from_json(const Json& j) {
    Word w;
    for (const auto& v : j) w.letters.push_back(v.get<int>());
    return w;
}

inline Json vec_to_json(const Vec& v) {
    Json a = Json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Vec vec_from_json(const Json& j) {
    Vec v(long(j.size()));
    long i = 0;
    for (const auto& e : j) v[i++] = e.get<double>();
    return v;
}

inline const char* relation_kind_name(Relation::Kind k) {
    switch (k) {
        case Relation::Kind::bracket_combo: return "bracket-combo";
        case Relation::Kind::bracket_constant: return "bracket-constant";
        case Relation::Kind::bracket_catalog: return "bracket-catalog";
        case Relation::Kind::span_rank: return "span-rank";
        case Relation::Kind::blowup_sum: return "blowup-sum";
    }
    return "?";
}

}  // namespace detail

inline Json system_to_json(const SystemSpec& spec) {
    Json j;
    j["spec_version"] = 1;
    j["name"] = spec.name;
    j["dimension"] = spec.dimension;
    j["s"] = spec.s;
    j["base_point"] = detail::vec_to_json(spec.base_point);
    j["complete"] = spec.complete;
    if (!spec.notes.empty()) j["notes"] = spec.notes;
    Json gens = Json::array();
    for (const GeneratorDef& g : spec.generator_defs) {
        Json jg;
        if (!g.catalog.empty()) {
            jg["catalog"] = g.catalog;
        } else {
            Json comps = Json::array();
            for (const auto& comp : g.components) {
                Json terms = Json::array();
                for (const auto& [c, pw] : comp) terms.push_back(Json::array({c, Json(pw)}));
                comps.push_back(terms);
            }
            jg["polynomial"] = comps;
        }
        gens.push_back(jg);
    }
    j["generators"] = gens;
    Json rels = Json::array();
    for (const Relation& r : spec.relations) {
        Json jr;
        jr["kind"] = detail::relation_kind_name(r.kind);
        jr["description"] = r.description;
        jr["tolerance"] = r.tolerance;
        switch (r.kind) {
            case Relation::Kind::bracket_combo: {
                jr["word"] = detail::word_to_json(r.word);
                Json combo = Json::array();
                for (const auto& [c, w] : r.combo)
                    combo.push_back(Json::array({c, detail::word_to_json(w)}));
                jr["combo"] = combo;
                break;
            }
            case Relation::Kind::bracket_constant:
                jr["word"] = detail::word_to_json(r.word);
                jr["value"] = detail::vec_to_json(r.constant_value);
                break;
            case Relation::Kind::bracket_catalog:
                jr["word"] = detail::word_to_json(r.word);
                jr["catalog"] = r.catalog;
                break;
            case Relation::Kind::span_rank: {
                Json words = Json::array();
                for (const Word& w : r.span_words) words.push_back(detail::word_to_json(w));
                jr["words"] = words;
                jr["rank"] = r.expected_rank;
                break;
            }
            case Relation::Kind::blowup_sum:
                jr["point"] = detail::vec_to_json(r.blowup_point);
                jr["time"] = r.blowup_time;
                break;
        }
        rels.push_back(jr);
    }
    j["relations"] = rels;
    if (spec.default_eps > 0.0 && spec.default_delta > 0.0)
        j["ballbox_defaults"] = Json{{"eps", spec.default_eps}, {"delta", spec.default_delta}};
    return j;
}

inline SystemSpec system_from_json(const Json& j) {
    if (!j.contains("spec_version") || j["spec_version"].get<int>() != 1)
        throw SpecError("system spec: missing or unsupported spec_version (expected 1)");
    SystemSpec spec;
    spec.name = j.value("name", std::string("unnamed"));
    spec.dimension = j.at("dimension").get<int>();
    if (spec.dimension < 1) throw SpecError("system spec: dimension must be >= 1");
    spec.s = j.value("s", 1);
    if (spec.s < 1) throw SpecError("system spec: s must be >= 1");
    spec.base_point = j.contains("base_point") ? detail::vec_from_json(j["base_point"])
                                               : Vec(Vec::Zero(spec.dimension));
    if (spec.base_point.size() != spec.dimension)
        throw SpecError("system spec: base_point length != dimension");
    spec.complete = j.value("complete", true);
    spec.notes = j.value("notes", std::string());
    if (!j.contains("generators") || j["generators"].empty())
        throw SpecError("system spec: no generators");
    for (const auto& jg : j["generators"]) {
        GeneratorDef g;
        if (jg.contains("catalog")) {
            g.catalog = jg["catalog"].get<std::string>();
        } else if (jg.contains("polynomial")) {
            for (const auto& comp : jg["polynomial"]) {
                std::vector<std::pair<double, std::vector<int>>> terms;
                for (const auto& term : comp) {
                    if (!term.is_array() || term.size() != 2)
                        throw SpecError("system spec: monomial must be [coefficient, exponents]");
                    std::vector<int> pw;
                    for (const auto& e : term[1]) pw.push_back(e.get<int>());
                    if (int(pw.size()) != spec.dimension)
                        throw SpecError("system spec: exponent tuple length != dimension");
                    terms.emplace_back(term[0].get<double>(), std::move(pw));
                }
                g.components.push_back(std::move(terms));
            }
        } else {
            throw SpecError("system spec: generator needs 'polynomial' or 'catalog'");
        }
        spec.generator_defs.push_back(std::move(g));
    }
    for (const auto& jr : j.value("relations", Json::array())) {
        Relation r;
        const std::string kind = jr.at("kind").get<std::string>();
        r.description = jr.value("description", kind);
        r.tolerance = jr.value("tolerance", 1e-10);
        if (kind == "bracket-combo") {
            r.kind = Relation::Kind::bracket_combo;
            r.word = detail::word_from_json(jr.at("word"));
            for (const auto& c : jr.value("combo", Json::array()))
                r.combo.emplace_back(c[0].get<double>(), detail::word_from_json(c[1]));
        } else if (kind == "bracket-constant") {
            r.kind = Relation::Kind::bracket_constant;
            r.word = detail::word_from_json(jr.at("word"));
            r.constant_value = detail::vec_from_json(jr.at("value"));
        } else if (kind == "bracket-catalog") {
            r.kind = Relation::Kind::bracket_catalog;
            r.word = detail::word_from_json(jr.at("word"));
            r.catalog = jr.at("catalog").get<std::string>();
        } else if (kind == "span-rank") {
            r.kind = Relation::Kind::span_rank;
            for (const auto& w : jr.at("words")) r.span_words.push_back(detail::word_from_json(w));
            r.expected_rank = jr.value("rank", -1);
        } else if (kind == "blowup-sum") {
            r.kind = Relation::Kind::blowup_sum;
            r.blowup_point = detail::vec_from_json(jr.at("point"));
            r.blowup_time = jr.at("time").get<double>();
        } else {
            throw SpecError("system spec: unknown relation kind '" + kind + "'");
        }
        spec.relations.push_back(std::move(r));
    }
    if (j.contains("ballbox_defaults")) {
        spec.default_eps = j["ballbox_defaults"].value("eps", 0.0);
        spec.default_delta = j["ballbox_defaults"].value("delta", 0.0);
    }
    for (const auto& def : spec.generator_defs)
        spec.generators.push_back(def.instantiate(spec.dimension));
    for (const auto& g : spec.generators)
        if (g.dim() != spec.dimension)
            throw SpecError("system spec: generator dimension != system dimension");
    return spec;
}

inline SystemSpec load_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open system spec file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw SpecError("system spec parse error in " + path + ": " + e.what());
    }
    return system_from_json(j);
}

/// Resolve --system/--spec: a builtin registry name or a spec-file path.
inline SystemSpec resolve_system(const std::string& system_name, const std::string& spec_path) {
    if (!spec_path.empty()) return load_system_file(spec_path);
    return builtin(system_name);
}

// ---------------------------------------------------------------------------
// Tabular outputs
// ---------------------------------------------------------------------------

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    const long n = tr.points.empty() ? 0 : tr.points.front().size();
    os << "t";
    for (long i = 0; i < n; ++i) os << ",x" << (i + 1);
    os << ",step\n";
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        os << format_double(tr.times[k]);
        for (long i = 0; i < n; ++i) os << ',' << format_double(tr.points[k][i]);
        os << ',' << format_double(tr.step_sizes[k]) << '\n';
    }
}

inline void write_involutivity_csv(std::ostream& os, const InvolutivityReport& rep,
                                   const Frame& frame) {
    os << "sample";
    for (int d = 0; d < frame.dim(); ++d) os << ",x" << (d + 1);
    os << ",i,j";
    for (int k = 0; k < frame.q(); ++k) os << ",c" << (k + 1);
    os << ",residual\n";
    for (const auto& pd : rep.pairs) {
        for (std::size_t s = 0; s < rep.sample_points.size(); ++s) {
            os << s;
            for (int d = 0; d < frame.dim(); ++d)
                os << ',' << format_double(rep.sample_points[s][d]);
            os << ',' << (pd.i + 1) << ',' << (pd.j + 1);
            for (int k = 0; k < frame.q(); ++k) os << ',' << format_double(pd.c(long(s), k));
            os << ',' << format_double(pd.residuals[s]) << '\n';
        }
    }
}

inline void write_ballbox_csv(std::ostream& os, const BallBoxReport& rep) {
    const long n = rep.x.size();
    const long q = rep.rows.empty() ? 0 : rep.rows.front().h.size();
    os << "index";
    for (long i = 0; i < n; ++i) os << ",target" << (i + 1);
    os << ",length_bound,solved";
    for (long k = 0; k < q; ++k) os << ",h" << (k + 1);
    os << ",h_norm,residual,failure\n";
    for (std::size_t r = 0; r < rep.rows.size(); ++r) {
        const auto& row = rep.rows[r];
        os << r;
        for (long i = 0; i < n; ++i) os << ',' << format_double(row.target[i]);
        os << ',' << format_double(row.length_bound) << ',' << (row.solved ? 1 : 0);
        for (long k = 0; k < q; ++k) os << ',' << format_double(row.h[k]);
        os << ',' << format_double(row.h_norm) << ',' << format_double(row.residual) << ','
           << row.failure << '\n';
    }
}

/// Control schedules as CSV with columns t_start, b1..bq. Each row opens a
/// segment at t_start with the given control; the last row closes the
/// schedule (its control values are ignored and may be zero).
inline ControlSchedule load_schedule_csv(std::istream& in, int q, double bound = 1.0) {
    ControlSchedule s;
    s.bound = bound;
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || (line.size() && !std::isdigit(line[0]) &&
                                               line[0] != '-' && line[0] != '+' && line[0] != '.'))
            continue;  // header or comment
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (int(row.size()) != q + 1 && row.size() != 1)
            throw SpecError("schedule CSV: row needs t_start plus q control values");
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw SpecError("schedule CSV: need at least two rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        s.breakpoints.push_back(rows[i][0]);
        if (i + 1 == rows.size()) break;
        Vec b = Vec::Zero(q);
        for (int j = 0; j < q && j + 1 < int(rows[i].size()); ++j) b[j] = rows[i][std::size_t(j) + 1];
        s.values.push_back(std::move(b));
    }
    s.validate();
    return s;
}

}  // namespace ccgeo
