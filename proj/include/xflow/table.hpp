#ifndef XFLOW_TABLE_HPP
#define XFLOW_TABLE_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace xflow {

// Named numeric columns, one row per study member.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (columns[c] == name) return c;
        }
        throw std::out_of_range("no column '" + name + "'");
    }

    std::vector<double> values(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }

    void add(std::vector<double> row) {
        if (row.size() != columns.size()) throw std::invalid_argument("row width mismatch");
        rows.push_back(std::move(row));
    }
};

} // namespace xflow

#endif
