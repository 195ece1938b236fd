#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ridgemm/hull.hpp"

namespace ridgemm {

using Json = nlohmann::ordered_json;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; a repeated key is an error.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Comma- and/or whitespace-separated numbers.
std::vector<double> parse_number_list(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

Json to_json(const Vec& v);

/// {atoms, weights, point, norm, gap}
Json to_json(const AtomSet& atoms, const MinNormCertificate& cert);

}  // namespace ridgemm
