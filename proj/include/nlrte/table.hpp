#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace nlrte {

// Header row, ',' separator, every number printed with %.17g.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row);
    std::string str() const;
    void write(const std::filesystem::path& path) const;
};

std::string format_double(double v);

}  // namespace nlrte
