#pragma once

// CSV emission (17 significant digits, '.' decimal, '\n' endings) and JSON
// provenance sidecars.

#include <string>
#include <vector>

namespace truncprod {

// lossless binary64 round-trip formatting
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);
void write_text(const std::string& path, const std::string& content);

} // namespace truncprod
