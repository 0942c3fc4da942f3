#pragma once

#include <istream>
#include <string>
#include <vector>

namespace cmtr::detail {

// RFC 4180 reader: quoted fields may contain delimiters, doubled quotes and
// newlines. Returns false at end of input.
bool read_csv_row(std::istream& in, std::vector<std::string>& row, char delimiter = ',');

}  // namespace cmtr::detail
