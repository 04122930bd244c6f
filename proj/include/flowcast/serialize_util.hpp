#pragma once

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowcast::detail {

// Doubles are written with %.17g, which round-trips exactly through strtod.

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_vector(std::ostream& out, const std::string& name,
                         const std::vector<double>& v) {
    out << name;
    for (double x : v) out << ' ' << fmt(x);
    out << '\n';
}

inline void expect_line(std::istream& in, const std::string& expected,
                        const std::string& path) {
    std::string line;
    if (!std::getline(in, line) || line != expected) {
        throw std::runtime_error(path + ": expected '" + expected + "', got '" + line + "'");
    }
}

inline std::string read_tag(std::istream& in, const std::string& name,
                            const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing field " + name);
    if (line.rfind(name + " ", 0) != 0 && line != name) {
        throw std::runtime_error(path + ": expected field '" + name + "', got '" + line + "'");
    }
    return line.size() > name.size() ? line.substr(name.size() + 1) : std::string();
}

inline double parse_num(const std::string& s, const std::string& path) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw std::runtime_error(path + ": bad number '" + s + "'");
    return v;
}

inline double read_scalar(std::istream& in, const std::string& name,
                          const std::string& path) {
    return parse_num(read_tag(in, name, path), path);
}

inline std::vector<double> read_vector(std::istream& in, const std::string& name,
                                       std::size_t count, const std::string& path) {
    std::istringstream fields(read_tag(in, name, path));
    std::vector<double> out;
    out.reserve(count);
    std::string tok;
    while (fields >> tok) out.push_back(parse_num(tok, path));
    if (out.size() != count) {
        throw std::runtime_error(path + ": field '" + name + "' expected " +
                                 std::to_string(count) + " values, got " +
                                 std::to_string(out.size()));
    }
    return out;
}

}  // namespace flowcast::detail
