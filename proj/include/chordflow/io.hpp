#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace chordflow {

// 17 significant digits, '.' separator regardless of locale.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s(buf);
    std::replace(s.begin(), s.end(), ',', '.');
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cell.erase(0, cell.find_first_not_of(" \t\r"));
        cell.erase(cell.find_last_not_of(" \t\r") + 1);
        out.push_back(cell);
    }
    return out;
}

// Reads a CSV with the given header; every remaining row must be numeric with the same width.
inline std::vector<std::vector<double>> read_numeric_csv(std::istream& is, const std::vector<std::string>& header) {
    std::string line;
    if (!std::getline(is, line)) throw DomainError("csv: empty input");
    if (split_csv_line(line) != header) throw DomainError("csv: unexpected header '" + line + "'");
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw DomainError("csv: wrong column count on line " + std::to_string(lineno));
        std::vector<double> r;
        for (const auto& c : cells) {
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != c.size() || c.empty()) throw DomainError("csv: bad number '" + c + "' on line " + std::to_string(lineno));
            r.push_back(v);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os) {
        for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
        os_ << '\n';
    }
    template <class... T>
    void row(const T&... v) {
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(v), first = false), ...);
        os_ << '\n';
    }

private:
    static std::string cell(double v) { return fmt17(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    static std::string cell(const std::string& v) { return v; }
    std::ostream& os_;
};

// ASCII PGM (P2), 255 gray levels, row 0 = top = largest second-axis value.
// values[j * nx + i] for i along the first axis, j along the second.
inline void write_pgm(std::ostream& os, const std::vector<double>& values, int nx, int ny) {
    double vmin = 0, vmax = 0;
    bool any = false;
    for (double v : values)
        if (std::isfinite(v)) {
            if (!any) vmin = vmax = v;
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
            any = true;
        }
    os << "P2\n# vmin=" << fmt17(vmin) << " vmax=" << fmt17(vmax) << "\n";
    os << "# gray = round(255 * (value - vmin) / (vmax - vmin)); non-finite -> 0\n";
    os << nx << ' ' << ny << "\n255\n";
    const double span = vmax > vmin ? vmax - vmin : 1.0;
    for (int j = ny - 1; j >= 0; --j) {
        for (int i = 0; i < nx; ++i) {
            const double v = values[static_cast<std::size_t>(j) * nx + i];
            const int g = std::isfinite(v) ? static_cast<int>(std::lround(255.0 * (v - vmin) / span)) : 0;
            os << (i ? " " : "") << g;
        }
        os << '\n';
    }
}

}  // namespace chordflow
