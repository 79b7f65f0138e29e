#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bprelab/csv.hpp"
#include "bprelab/environment.hpp"

namespace bprelab {

struct Verdict {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;  // how value relates to threshold when passing
    std::string detail;
};

struct NamedTable {
    std::string name;  // file stem when persisted as CSV
    CsvTable table;
};

struct Scalar {
    std::string name;
    double value = 0.0;
    double stderr_ = 0.0;
    std::uint64_t n = 0;
};

// Everything an experiment run produces. The JSON rendering is a pure
// function of the contents except wall_seconds, which is written to a
// sidecar file so that report bytes depend only on (config, seed, code
// version).
struct ExperimentReport {
    std::string kind;
    std::string code_version;
    std::string config_echo;  // canonical JSON text of the effective config
    std::vector<Scalar> scalars;
    std::vector<std::pair<std::string, std::string>> notes;
    std::vector<HypothesisItem> hypotheses;
    bool gate_evaluated = false;
    bool gate_pass = false;
    std::vector<NamedTable> tables;
    std::vector<Verdict> verdicts;
    std::vector<std::pair<std::string, std::string>> artifacts;  // extra files
    bool all_pass = true;
    double wall_seconds = 0.0;
};

std::string hypothesis_status_name(HypothesisStatus s);

// Canonical report bytes (LF, UTF-8, two-space indent, stable key order).
std::string report_json(const ExperimentReport& rep);

// Writes report.json, one CSV per table, any artifacts, and timing.json
// into out_dir (created if missing).
void write_report(const ExperimentReport& rep, const std::string& out_dir);

}  // namespace bprelab
