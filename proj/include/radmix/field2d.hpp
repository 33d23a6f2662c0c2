#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "radmix/csv.hpp"
#include "radmix/grid.hpp"

namespace radmix {

/// Real 2D sample matrix F[j][m] over (r_j, theta_m = 2 pi m / n_theta).
struct Field2d {
    std::vector<double> r;
    std::vector<double> theta;
    std::vector<std::vector<double>> values; // [radius][theta]
};

/// Assembles the real field carried by a set of modes under the real-data
/// symmetry (the -ell coefficient is the conjugate of the +ell one):
///   F[j][m] = Re g_0(r_j) + sum_{ell>=1} 2 Re( g_ell(r_j) e^{i ell theta_m} ).
inline Field2d assemble_field2d(const std::vector<std::pair<unsigned, RadialField>>& modes,
                                std::size_t n_theta) {
    if (n_theta < 8) throw std::invalid_argument("assemble_field2d: need n_theta >= 8");
    if (modes.empty()) throw std::invalid_argument("assemble_field2d: no modes given");
    std::set<unsigned> seen;
    for (const auto& [ell, field] : modes) {
        if (!seen.insert(ell).second)
            throw std::invalid_argument("assemble_field2d: duplicate mode ell");
        if (field.grid->n_cells() != modes.front().second.grid->n_cells())
            throw std::invalid_argument("assemble_field2d: modes on different grids");
    }
    const RadialGrid& grid = *modes.front().second.grid;
    Field2d out;
    out.r = grid.centers();
    out.theta.resize(n_theta);
    for (std::size_t m = 0; m < n_theta; ++m)
        out.theta[m] = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n_theta);
    out.values.assign(grid.n_cells(), std::vector<double>(n_theta, 0.0));
    for (const auto& [ell, field] : modes) {
        for (std::size_t j = 0; j < grid.n_cells(); ++j) {
            const Complex g = field.values[j];
            for (std::size_t m = 0; m < n_theta; ++m) {
                if (ell == 0) {
                    out.values[j][m] += g.real();
                } else {
                    const double phase = static_cast<double>(ell) * out.theta[m];
                    out.values[j][m] += 2.0 * (g * Complex(std::cos(phase), std::sin(phase))).real();
                }
            }
        }
    }
    return out;
}

/// Plain-text frame: first row the theta samples, first column the radii,
/// corner cell the time stamp. Ready for any plotting tool.
inline std::string render_frame(const Field2d& field, double t) {
    std::ostringstream out;
    out << format_double(t);
    for (double th : field.theta) out << ' ' << format_double(th);
    out << '\n';
    for (std::size_t j = 0; j < field.r.size(); ++j) {
        out << format_double(field.r[j]);
        for (double v : field.values[j]) out << ' ' << format_double(v);
        out << '\n';
    }
    return out.str();
}

inline void write_frame(const std::filesystem::path& path, const Field2d& field, double t) {
    atomic_write(path, render_frame(field, t));
}

} // namespace radmix
