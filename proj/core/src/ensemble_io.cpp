#include "bprelab/ensemble_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bprelab/errors.hpp"

namespace bprelab {

using nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError("malformed decimal string: '" + s + "'");
    return v;
}

namespace {

double json_decimal(const ordered_json& j, const std::string& what) {
    if (!j.is_string()) throw ConfigError(what + " must be a decimal string");
    return parse_double(j.get<std::string>());
}

OffspringRow parse_row(const ordered_json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "table") {
        std::vector<FiniteTableRow::Atom> atoms;
        for (const auto& a : j.at("atoms")) {
            FiniteTableRow::Atom atom;
            for (const auto& c : a.at("counts"))
                atom.counts.push_back(c.get<std::uint32_t>());
            atom.prob = json_decimal(a.at("prob"), "table atom prob");
            atoms.push_back(std::move(atom));
        }
        return make_finite_table_row(std::move(atoms));
    }
    if (kind == "zero_inflated_geometric") {
        const auto& params = j.at("params");
        std::vector<double> means;
        for (const auto& m : params.at("means"))
            means.push_back(json_decimal(m, "geometric mean"));
        const std::uint32_t cap =
            params.contains("cap") ? params.at("cap").get<std::uint32_t>() : 64u;
        return make_zero_inflated_row(json_decimal(params.at("q0"), "q0"), std::move(means), cap);
    }
    throw ConfigError("unknown offspring row kind: '" + kind + "'");
}

EnvironmentEnsemble parse_ensemble_json(const ordered_json& j) {
    const auto p = j.at("p").get<std::size_t>();
    std::vector<double> weights;
    std::vector<OffspringLaw> laws;
    for (const auto& atom : j.at("atoms")) {
        weights.push_back(json_decimal(atom.at("weight"), "atom weight"));
        std::vector<OffspringRow> rows;
        for (const auto& row : atom.at("rows")) rows.push_back(parse_row(row));
        laws.push_back(make_offspring_law(p, std::move(rows)));
    }
    return EnvironmentEnsemble(std::move(weights), std::move(laws));
}

ordered_json emit_row(const OffspringRow& row) {
    ordered_json out;
    if (const auto* ft = std::get_if<FiniteTableRow>(&row)) {
        out["kind"] = "table";
        ordered_json atoms = ordered_json::array();
        for (const auto& a : ft->atoms) {
            ordered_json atom;
            atom["counts"] = a.counts;
            atom["prob"] = format_double(a.prob);
            atoms.push_back(std::move(atom));
        }
        out["atoms"] = std::move(atoms);
    } else {
        const auto& zig = std::get<ZeroInflatedGeometricRow>(row);
        out["kind"] = "zero_inflated_geometric";
        ordered_json params;
        params["q0"] = format_double(zig.q0);
        ordered_json means = ordered_json::array();
        for (double m : zig.mean) means.push_back(format_double(m));
        params["means"] = std::move(means);
        params["cap"] = zig.cap;
        out["params"] = std::move(params);
    }
    return out;
}

}  // namespace

EnvironmentEnsemble parse_ensemble(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("ensemble JSON parse failure: ") + e.what());
    }
    try {
        return parse_ensemble_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("ensemble schema violation: ") + e.what());
    }
}

EnvironmentEnsemble load_ensemble(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open ensemble file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_ensemble(ss.str());
}

std::string emit_ensemble(const EnvironmentEnsemble& ens) {
    ordered_json j;
    j["p"] = ens.p();
    ordered_json atoms = ordered_json::array();
    for (std::size_t k = 0; k < ens.atom_count(); ++k) {
        ordered_json atom;
        atom["weight"] = format_double(ens.atom(k).weight);
        ordered_json rows = ordered_json::array();
        for (const auto& row : ens.atom(k).law.rows) rows.push_back(emit_row(row));
        atom["rows"] = std::move(rows);
        atoms.push_back(std::move(atom));
    }
    j["atoms"] = std::move(atoms);
    return j.dump(2) + "\n";
}

void save_ensemble(const EnvironmentEnsemble& ens, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write ensemble file: " + path);
    out << emit_ensemble(ens);
}

}  // namespace bprelab
