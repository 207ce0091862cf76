#include "nlrte/table.hpp"

#include <cstdio>
#include <fstream>

#include "nlrte/error.hpp"

namespace nlrte {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void CsvTable::add(std::vector<double> row) {
    if (!header.empty() && row.size() != header.size())
        throw ValidationError("csv row has " + std::to_string(row.size()) + " columns, header has " +
                              std::to_string(header.size()));
    rows.push_back(std::move(row));
}

std::string CsvTable::str() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_double(row[i]);
        }
        out += '\n';
    }
    return out;
}

void CsvTable::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << str();
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace nlrte
