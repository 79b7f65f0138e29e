#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <bprelab/ensemble_io.hpp>
#include <bprelab/errors.hpp>
#include <bprelab/offspring.hpp>

using namespace bprelab;

namespace {

bool rows_equal(const OffspringRow& a, const OffspringRow& b) {
    if (const auto* fa = std::get_if<FiniteTableRow>(&a)) {
        const auto* fb = std::get_if<FiniteTableRow>(&b);
        if (!fb || fa->atoms.size() != fb->atoms.size()) return false;
        for (std::size_t k = 0; k < fa->atoms.size(); ++k) {
            if (fa->atoms[k].counts != fb->atoms[k].counts) return false;
            if (fa->atoms[k].prob != fb->atoms[k].prob) return false;
        }
        return true;
    }
    const auto& za = std::get<ZeroInflatedGeometricRow>(a);
    const auto* zb = std::get_if<ZeroInflatedGeometricRow>(&b);
    return zb && za.q0 == zb->q0 && za.mean == zb->mean && za.cap == zb->cap &&
           za.tables == zb->tables;
}

bool ensembles_equal(const EnvironmentEnsemble& a, const EnvironmentEnsemble& b) {
    if (a.p() != b.p() || a.atom_count() != b.atom_count()) return false;
    for (std::size_t k = 0; k < a.atom_count(); ++k) {
        if (a.atom(k).weight != b.atom(k).weight) return false;
        for (std::size_t i = 0; i < a.p(); ++i)
            if (!rows_equal(a.atom(k).law.rows[i], b.atom(k).law.rows[i])) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("every shipped ensemble round trips exactly") {
    for (const char* path : {"ensembles/lattice_ln2.json", "ensembles/sym_nonlattice.json",
                             "ensembles/geo_pair.json", "ensembles/supercritical_ks.json",
                             "ensembles/subcritical_ln2.json"}) {
        INFO("file: " << path);
        EnvironmentEnsemble ens = load_ensemble(path);
        std::string text = emit_ensemble(ens);
        EnvironmentEnsemble back = parse_ensemble(text);
        CHECK(ensembles_equal(ens, back));
        // a second trip is byte-stable
        CHECK(emit_ensemble(back) == text);
    }
}

TEST_CASE("save and load through a file") {
    EnvironmentEnsemble ens = parse_ensemble(R"({
      "p": 1,
      "atoms": [
        {"weight": "1",
         "rows": [{"kind": "table",
                   "atoms": [{"counts": [0], "prob": "0.5"},
                             {"counts": [2], "prob": "0.5"}]}]}
      ]})");
    const std::string path =
        (std::filesystem::temp_directory_path() / "tmp_ensemble_roundtrip.json").string();
    save_ensemble(ens, path);
    EnvironmentEnsemble back = load_ensemble(path);
    CHECK(ensembles_equal(ens, back));
    std::remove(path.c_str());
}

TEST_CASE("schema violations raise config errors") {
    CHECK_THROWS_AS(parse_ensemble("not json at all"), ConfigError);
    CHECK_THROWS_AS(parse_ensemble("{}"), ConfigError);
    CHECK_THROWS_AS(parse_ensemble(R"({"p": 2, "atoms": []})"), DomainError);
    // numeric weight instead of a decimal string
    CHECK_THROWS_AS(parse_ensemble(R"({"p": 1, "atoms": [
        {"weight": 1.0, "rows": [{"kind": "table",
            "atoms": [{"counts": [0], "prob": "1"}]}]}]})"),
                    ConfigError);
    // unknown row kind
    CHECK_THROWS_AS(parse_ensemble(R"({"p": 1, "atoms": [
        {"weight": "1", "rows": [{"kind": "poisson",
            "atoms": [{"counts": [0], "prob": "1"}]}]}]})"),
                    ConfigError);
    // malformed decimal
    CHECK_THROWS_AS(parse_ensemble(R"({"p": 1, "atoms": [
        {"weight": "1", "rows": [{"kind": "table",
            "atoms": [{"counts": [0], "prob": "0.5x"}]}]}]})"),
                    ConfigError);
    // weights that do not sum to one surface the construction error
    CHECK_THROWS_AS(parse_ensemble(R"({"p": 1, "atoms": [
        {"weight": "0.9", "rows": [{"kind": "table",
            "atoms": [{"counts": [0], "prob": "1"}]}]}]})"),
                    DomainError);
    CHECK_THROWS_AS(load_ensemble("ensembles/does_not_exist.json"), ConfigError);
}

TEST_CASE("missing fields surface as config errors") {
    CHECK_THROWS_AS(parse_ensemble(R"({"p": 1, "atoms": [
        {"rows": [{"kind": "table", "atoms": [{"counts": [0], "prob": "1"}]}]}]})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_ensemble(R"({"p": 1, "atoms": [
        {"weight": "1", "rows": [{"kind": "zero_inflated_geometric",
            "params": {"q0": "0.5"}}]}]})"),
                    ConfigError);
}
