#pragma once

#include <string>
#include <vector>

namespace crnsel {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

// Splits one CSV line on commas; no quoting support (none of our formats need it).
std::vector<std::string> split_csv_line(const std::string& line);
double parse_csv_number(const std::string& field, const std::string& where);

}  // namespace crnsel
