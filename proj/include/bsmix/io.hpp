#pragma once

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsmix/mixture.hpp"

namespace bsmix {

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}
}  // namespace detail

/// One-column CSV of positive reals; a single non-numeric first line is
/// accepted as a header. Offending line numbers are collected into the error.
inline std::vector<double> read_data_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open input file: " + path);
    std::vector<double> data;
    std::vector<std::size_t> bad_lines;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        double v;
        if (!detail::parse_double(t, v)) {
            if (lineno == 1) continue;  // header
            bad_lines.push_back(lineno);
            continue;
        }
        if (!(v > 0.0)) {
            bad_lines.push_back(lineno);
            continue;
        }
        data.push_back(v);
    }
    if (!bad_lines.empty()) {
        std::ostringstream os;
        os << "non-numeric or non-positive values at line(s):";
        for (std::size_t l : bad_lines) os << ' ' << l;
        throw InputError(os.str());
    }
    if (data.empty()) throw InputError("empty input file: " + path);
    return data;
}

/// Mixture parameters as "p1,..,pG;alpha1,..,alphaG;beta1,..,betaG".
inline MixtureParams parse_mixture_string(const std::string& spec) {
    std::vector<std::vector<double>> groups;
    std::stringstream ss(spec);
    std::string group;
    while (std::getline(ss, group, ';')) {
        std::vector<double> values;
        std::stringstream gs(group);
        std::string tok;
        while (std::getline(gs, tok, ',')) {
            double v;
            if (!detail::parse_double(tok, v)) {
                throw InputError("bad number in parameter string: '" + tok + "'");
            }
            values.push_back(v);
        }
        groups.push_back(std::move(values));
    }
    if (groups.size() != 3 || groups[0].size() != groups[1].size() ||
        groups[0].size() != groups[2].size() || groups[0].empty()) {
        throw InputError(
            "parameter string must be 'p1,..;alpha1,..;beta1,..' with equal counts");
    }
    std::vector<BsParams> comps;
    for (std::size_t j = 0; j < groups[1].size(); ++j) {
        comps.emplace_back(groups[1][j], groups[2][j]);
    }
    return MixtureParams(groups[0], std::move(comps));
}

/// Reals printed with 10 significant digits, per the file-format contract.
inline std::string format_real(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

}  // namespace bsmix
