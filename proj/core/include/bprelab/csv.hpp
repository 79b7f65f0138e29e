#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bprelab {

// Minimal CSV document: string cells, one header row, LF line endings,
// UTF-8 passthrough. Cells containing comma, quote, or newline are quoted
// with doubled inner quotes. parse(emit(t)) == t exactly; numeric columns
// keep that exactness by being written with format_double.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    bool operator==(const CsvTable&) const = default;
};

std::string emit_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);

// The fixed estimator-table layout: columns n, estimate, stderr, N, seed.
struct EstimatorRow {
    std::uint64_t n = 0;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t replicas = 0;
    std::uint64_t seed = 0;
};

CsvTable estimator_table(const std::vector<EstimatorRow>& rows);

}  // namespace bprelab
