#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace metrol {

/// Column-oriented dataset written as CSV (17 significant digits) or JSON.
struct Table {
    using Cell = std::variant<double, long long, std::string>;

    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row);
};

enum class OutputFormat { Csv, Json };

void write_csv(const Table& table, std::ostream& out);
void write_json(const Table& table, std::ostream& out);

/// Writes `<stem>.csv` or `<stem>.json` under dir and returns the file name.
std::string write_table(const Table& table, const std::filesystem::path& dir, const std::string& stem,
                        OutputFormat format);

}  // namespace metrol
