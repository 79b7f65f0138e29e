#include "bprelab/csv.hpp"

#include <cstddef>

#include "bprelab/ensemble_io.hpp"
#include "bprelab/errors.hpp"

namespace bprelab {

namespace {

bool needs_quoting(const std::string& cell) {
    return cell.find_first_of(",\"\n\r") != std::string::npos;
}

void append_cell(std::string& out, const std::string& cell) {
    if (!needs_quoting(cell)) {
        out += cell;
        return;
    }
    out += '"';
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

void append_row(std::string& out, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        append_cell(out, row[i]);
    }
    out += '\n';
}

}  // namespace

std::string emit_csv(const CsvTable& table) {
    std::string out;
    append_row(out, table.header);
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw DomainError("csv row width differs from header");
        append_row(out, row);
    }
    return out;
}

CsvTable parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false, cell_open = false;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto end_cell = [&] {
        row.push_back(std::move(cell));
        cell.clear();
        cell_open = false;
    };
    auto end_row = [&] {
        end_cell();
        records.push_back(std::move(row));
        row.clear();
    };
    while (i < n) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    cell += '"';
                    i += 2;
                    continue;
                }
                quoted = false;
                ++i;
                continue;
            }
            cell += c;
            ++i;
            continue;
        }
        switch (c) {
            case '"':
                if (!cell.empty()) throw DomainError("csv quote inside unquoted cell");
                quoted = true;
                cell_open = true;
                ++i;
                break;
            case ',':
                end_cell();
                cell_open = true;
                ++i;
                break;
            case '\n':
                end_row();
                ++i;
                break;
            case '\r':
                throw DomainError("csv uses LF line endings only");
            default:
                cell += c;
                cell_open = true;
                ++i;
        }
    }
    if (quoted) throw DomainError("csv ends inside quoted cell");
    if (cell_open || !row.empty()) end_row();
    if (records.empty()) throw DomainError("csv has no header row");

    CsvTable table;
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size())
            throw DomainError("csv row width differs from header");
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

CsvTable estimator_table(const std::vector<EstimatorRow>& rows) {
    CsvTable t;
    t.header = {"n", "estimate", "stderr", "N", "seed"};
    for (const auto& r : rows)
        t.rows.push_back({std::to_string(r.n), format_double(r.estimate),
                          format_double(r.stderr_), std::to_string(r.replicas),
                          std::to_string(r.seed)});
    return t;
}

}  // namespace bprelab
