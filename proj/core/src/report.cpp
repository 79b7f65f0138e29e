#include "bprelab/report.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bprelab/ensemble_io.hpp"
#include "bprelab/errors.hpp"

namespace bprelab {

using ordered_json = nlohmann::ordered_json;

std::string hypothesis_status_name(HypothesisStatus s) {
    switch (s) {
        case HypothesisStatus::pass: return "pass";
        case HypothesisStatus::fail: return "fail";
        case HypothesisStatus::sufficient_pass: return "sufficient_pass";
        case HypothesisStatus::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

std::string report_json(const ExperimentReport& rep) {
    ordered_json doc;
    doc["tool"] = "bprelab";
    doc["version"] = rep.code_version;
    doc["kind"] = rep.kind;
    doc["config"] = ordered_json::parse(rep.config_echo);

    ordered_json scalars = ordered_json::object();
    for (const auto& s : rep.scalars) {
        ordered_json entry;
        entry["value"] = format_double(s.value);
        entry["stderr"] = format_double(s.stderr_);
        entry["n"] = s.n;
        scalars[s.name] = entry;
    }
    doc["scalars"] = scalars;

    ordered_json notes = ordered_json::object();
    for (const auto& [k, v] : rep.notes) notes[k] = v;
    doc["notes"] = notes;

    if (rep.gate_evaluated) {
        ordered_json items = ordered_json::array();
        for (const auto& h : rep.hypotheses) {
            ordered_json item;
            item["name"] = h.name;
            item["status"] = hypothesis_status_name(h.status);
            item["value"] = format_double(h.value);
            item["extra"] = format_double(h.extra);
            item["detail"] = h.detail;
            items.push_back(item);
        }
        doc["hypotheses"] = items;
        doc["gate_pass"] = rep.gate_pass;
    }

    ordered_json tables = ordered_json::object();
    for (const auto& t : rep.tables) {
        ordered_json tbl;
        tbl["header"] = t.table.header;
        ordered_json rows = ordered_json::array();
        for (const auto& r : t.table.rows) rows.push_back(r);
        tbl["rows"] = rows;
        tables[t.name] = tbl;
    }
    doc["tables"] = tables;

    ordered_json verdicts = ordered_json::array();
    for (const auto& v : rep.verdicts) {
        ordered_json entry;
        entry["name"] = v.name;
        entry["pass"] = v.pass;
        entry["value"] = format_double(v.value);
        entry["threshold"] = format_double(v.threshold);
        entry["relation"] = v.relation;
        entry["detail"] = v.detail;
        verdicts.push_back(entry);
    }
    doc["verdicts"] = verdicts;
    doc["all_pass"] = rep.all_pass;

    return doc.dump(2) + "\n";
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw ConfigError("write failed: " + path.string());
}

}  // namespace

void write_report(const ExperimentReport& rep, const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "report.json", report_json(rep));
    for (const auto& t : rep.tables) write_file(dir / (t.name + ".csv"), emit_csv(t.table));
    for (const auto& [name, content] : rep.artifacts) write_file(dir / name, content);
    ordered_json timing;
    timing["wall_seconds"] = format_double(rep.wall_seconds);
    write_file(dir / "timing.json", timing.dump(2) + "\n");
}

}  // namespace bprelab
