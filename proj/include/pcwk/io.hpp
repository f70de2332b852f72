#ifndef PCWK_IO_HPP
#define PCWK_IO_HPP

/// @file
/// CSV readers and writers. Densities and factors use rows
/// `m,row,col,re,im` (0-based row/col); weight functions use `t,a`.

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "estimators.hpp"
#include "lift.hpp"
#include "spectral.hpp"

namespace pcwk {

/// Shortest round-trip text for a double ("%.17g").
inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_number(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::invalid_input, where + ": cannot parse number '" + s + "'");
    }
}

inline int parse_int(const std::string& s, const std::string& where) {
    const double v = parse_number(s, where);
    if (v != static_cast<double>(static_cast<int>(v)))
        fail(ErrorKind::invalid_input, where + ": expected an integer, got '" + s + "'");
    return static_cast<int>(v);
}

inline std::vector<std::vector<std::string>> read_csv(std::istream& in, const std::vector<std::string>& header,
                                                      const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::invalid_input, name + ": empty file");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (split_csv_line(line) != header) {
        std::string want;
        for (std::size_t i = 0; i < header.size(); ++i) want += (i ? "," : "") + header[i];
        fail(ErrorKind::invalid_input, name + ": header must be '" + want + "'");
    }
    std::vector<std::vector<std::string>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            fail(ErrorKind::invalid_input, name + ":" + std::to_string(line_no) + ": expected " +
                                               std::to_string(header.size()) + " fields");
        rows.push_back(std::move(cells));
    }
    return rows;
}

} // namespace detail

struct DensityReadResult {
    SpectralDensity density;
    std::vector<std::string> warnings;
};

/// Reads `m,row,col,re,im`; lags whose mirror -m is absent are filled with
/// F(-m) = F(m)^* and reported as warnings.
inline DensityReadResult read_density_csv(std::istream& in, int k, int grid, const std::string& name = "density") {
    const auto rows = detail::read_csv(in, {"m", "row", "col", "re", "im"}, name);
    DensityReadResult out;
    std::map<int, Mat> coeffs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string where = name + ":" + std::to_string(i + 2);
        const int m = detail::parse_int(rows[i][0], where);
        const int r = detail::parse_int(rows[i][1], where);
        const int c = detail::parse_int(rows[i][2], where);
        if (r < 0 || r >= k || c < 0 || c >= k)
            fail(ErrorKind::invalid_input, where + ": row/col outside 0.." + std::to_string(k - 1));
        const cplx v(detail::parse_number(rows[i][3], where), detail::parse_number(rows[i][4], where));
        auto it = coeffs.find(m);
        if (it == coeffs.end()) it = coeffs.emplace(m, Mat::Zero(k, k)).first;
        it->second(r, c) = v;
    }
    if (coeffs.empty()) fail(ErrorKind::invalid_input, name + ": no coefficients");
    std::vector<int> lags;
    for (const auto& [m, v] : coeffs) lags.push_back(m);
    for (int m : lags)
        if (m != 0 && coeffs.find(-m) == coeffs.end()) {
            coeffs[-m] = coeffs[m].adjoint();
            out.warnings.push_back(name + ": lag " + std::to_string(-m) +
                                   " missing; filled by Hermitian symmetry from lag " + std::to_string(m));
        }
    out.density = SpectralDensity(k, std::move(coeffs), grid);
    return out;
}

inline DensityReadResult read_density_csv(const std::string& path, int k, int grid) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::invalid_input, "cannot open " + path);
    return read_density_csv(in, k, grid, path);
}

/// Writes indexed K x M coefficient matrices as `<index>,row,col,re,im`.
inline void write_coefficients_csv(std::ostream& out, const std::map<int, Mat>& coeffs,
                                   const std::string& index_name = "m") {
    out << index_name << ",row,col,re,im\n";
    for (const auto& [m, v] : coeffs)
        for (int r = 0; r < v.rows(); ++r)
            for (int c = 0; c < v.cols(); ++c)
                out << m << ',' << r << ',' << c << ',' << fmt(v(r, c).real()) << ',' << fmt(v(r, c).imag())
                    << '\n';
}

inline void write_density_csv(std::ostream& out, const SpectralDensity& f) {
    write_coefficients_csv(out, f.coeffs, "m");
}

inline void write_factor_csv(std::ostream& out, const std::vector<Mat>& d) {
    std::map<int, Mat> c;
    for (std::size_t u = 0; u < d.size(); ++u) c[static_cast<int>(u)] = d[u];
    write_coefficients_csv(out, c, "u");
}

/// `lambda,component,re_h,im_h` over the grid, components 0-based.
inline void write_characteristic_csv(std::ostream& out, const EstimateSolution& s) {
    out << "lambda,component,re_h,im_h\n";
    const int grid = s.grid_size();
    for (int g = 0; g < grid; ++g)
        for (int k = 0; k < s.dim; ++k)
            out << fmt(grid_node(g, grid)) << ',' << k << ',' << fmt(s.h_grid[g][k].real()) << ','
                << fmt(s.h_grid[g][k].imag()) << '\n';
}

/// `block,component,re,im` for c_j, d_j or (Ad)_l.
inline void write_blocks_csv(std::ostream& out, const std::vector<Vec>& blocks, int first) {
    out << "block,component,re,im\n";
    for (std::size_t j = 0; j < blocks.size(); ++j)
        for (int k = 0; k < blocks[j].size(); ++k)
            out << first + static_cast<int>(j) << ',' << k << ',' << fmt(blocks[j][k].real()) << ','
                << fmt(blocks[j][k].imag()) << '\n';
}

inline TabulatedFunction read_weight_function_csv(std::istream& in, const std::string& name = "weights") {
    const auto rows = detail::read_csv(in, {"t", "a"}, name);
    std::vector<double> t, a;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string where = name + ":" + std::to_string(i + 2);
        t.push_back(detail::parse_number(rows[i][0], where));
        a.push_back(detail::parse_number(rows[i][1], where));
    }
    return TabulatedFunction(std::move(t), std::move(a));
}

inline TabulatedFunction read_weight_function_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::invalid_input, "cannot open " + path);
    return read_weight_function_csv(in, path);
}

} // namespace pcwk

#endif // PCWK_IO_HPP
