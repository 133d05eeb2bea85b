#include "metrol/table.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace metrol {

void Table::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("table: row width does not match the header");
    rows.push_back(std::move(row));
}

namespace {
std::string format_cell(const Table::Cell& cell) {
    if (const auto* d = std::get_if<double>(&cell)) return fmt::format("{:.17g}", *d + 0.0);  // no "-0"
    if (const auto* i = std::get_if<long long>(&cell)) return fmt::format("{}", *i);
    return std::get<std::string>(cell);
}
}  // namespace

void write_csv(const Table& table, std::ostream& out) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_cell(row[i]);
        out << '\n';
    }
}

void write_json(const Table& table, std::ostream& out) {
    nlohmann::json doc;
    doc["columns"] = table.columns;
    doc["rows"] = nlohmann::json::array();
    for (const auto& row : table.rows) {
        auto& j = doc["rows"].emplace_back(nlohmann::json::array());
        for (const auto& cell : row) {
            if (const auto* d = std::get_if<double>(&cell))
                j.push_back(std::isfinite(*d) ? nlohmann::json(*d) : nlohmann::json(nullptr));
            else if (const auto* i = std::get_if<long long>(&cell))
                j.push_back(*i);
            else
                j.push_back(std::get<std::string>(cell));
        }
    }
    out << doc.dump(1) << '\n';
}

std::string write_table(const Table& table, const std::filesystem::path& dir, const std::string& stem,
                        OutputFormat format) {
    const std::string name = stem + (format == OutputFormat::Csv ? ".csv" : ".json");
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    if (format == OutputFormat::Csv)
        write_csv(table, out);
    else
        write_json(table, out);
    if (!out) throw std::runtime_error("error while writing " + (dir / name).string());
    return name;
}

}  // namespace metrol
