#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace ldmm::csv {

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF. Records whose first
/// character is '#' are skipped as comments.
std::vector<std::vector<std::string>> read_all(std::istream& in);

/// Quotes a field when it contains a separator, quote or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

}  // namespace ldmm::csv
