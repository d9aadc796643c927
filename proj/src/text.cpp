#include "dba/text.hpp"

#include <charconv>
#include <stdexcept>

namespace dba::text {

std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

[[noreturn]] void bad(std::string_view s, std::string_view what, std::string_view kind) {
    throw std::invalid_argument(std::string(what) + ": '" + std::string(s) + "' is not a valid " + std::string(kind));
}

template <typename T>
T parse_number(std::string_view s, std::string_view what, std::string_view kind) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    T value{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) bad(s, what, kind);
    return value;
}

}  // namespace

double parse_real(std::string_view s, std::string_view what) { return parse_number<double>(s, what, "real number"); }

long long parse_int(std::string_view s, std::string_view what) { return parse_number<long long>(s, what, "integer"); }

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
    return parse_number<std::uint64_t>(s, what, "unsigned integer");
}

bool parse_bool(std::string_view s, std::string_view what) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad(s, what, "boolean");
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

}  // namespace dba::text
