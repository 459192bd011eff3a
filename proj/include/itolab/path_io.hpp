#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "itolab/cadlag_path.hpp"

namespace itolab {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// One row per grid point: time, continuous-part value, jump size (0 when the
/// ledger has no entry at that index).
inline void write_path_csv(std::ostream& os, const CadlagPath& p) {
    os << "time,cont,jump\n";
    for (std::size_t i = 0; i < p.grid().size(); ++i) {
        os << format_double(p.grid()[i]) << ',' << format_double(p.cont()[i]) << ','
           << format_double(p.jump_at(i)) << '\n';
    }
}

inline void write_path_csv(const std::string& filename, const CadlagPath& p) {
    std::ofstream os(filename);
    if (!os) throw std::runtime_error("cannot open for writing: " + filename);
    write_path_csv(os, p);
}

inline CadlagPath read_path_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("path csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time,cont,jump") throw std::runtime_error("path csv: bad header: " + line);
    std::vector<double> pts, cont;
    std::vector<JumpEntry> jumps;
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        double vals[3];
        for (int k = 0; k < 3; ++k) {
            if (!std::getline(ss, field, ',')) throw std::runtime_error("path csv: short row: " + line);
            std::size_t pos = 0;
            vals[k] = std::stod(field, &pos);
            if (pos != field.size()) throw std::runtime_error("path csv: bad number: " + field);
        }
        if (std::getline(ss, field, ',')) throw std::runtime_error("path csv: extra field: " + line);
        pts.push_back(vals[0]);
        cont.push_back(vals[1]);
        if (vals[2] != 0.0) jumps.push_back({row, vals[2]});
        ++row;
    }
    return CadlagPath(TimeGrid(std::move(pts)), std::move(cont), std::move(jumps));
}

inline CadlagPath read_path_csv(const std::string& filename) {
    std::ifstream is(filename);
    if (!is) throw std::runtime_error("cannot open for reading: " + filename);
    return read_path_csv(is);
}

}  // namespace itolab
