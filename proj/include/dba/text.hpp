#pragma once

// Small text helpers shared by the plan, config, metrics and report code.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dba::text {

// Shortest decimal form that parses back to the identical double.
std::string format_real(double v);

double parse_real(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace dba::text
