#pragma once

#include <cmath>
#include <stdexcept>

#include "radmix/constants.hpp"
#include "radmix/grid.hpp"

namespace radmix {

/// Weighted X-norm squared |g|^2 + |r^{p-1} g|^2 (per-mode integrals).
inline double x_norm_sq(const RadialField& g, double p) {
    return weighted_norm_sq(g, 0.0) + weighted_norm_sq(g, p - 1.0);
}

/// Mixed term <r^{p-1} d_theta g, d_r g> for one mode: with d_theta acting as
/// i*ell, this is  Re h sum_j (i ell g_j) conj((d_r g)_j) r_j^{p-1} r_j.
/// Vanishes identically for profiles with constant complex phase.
inline double cross_term(const RadialField& g, unsigned ell, double p) {
    if (ell == 0) throw std::invalid_argument("cross_term: requires ell >= 1");
    const RadialGrid& grid = *g.grid;
    const RadialField dg = radial_derivative(g);
    const double elld = static_cast<double>(ell);
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.n_cells(); ++j) {
        const Complex t = Complex(0.0, elld) * g.values[j] * std::conj(dg.values[j]);
        acc += t.real() * std::pow(grid.center(j), p); // r^{p-1} * r
    }
    return acc * grid.h();
}

/// |r^{p-1} d_theta g|^2 = ell^2 |r^{p-1} g|^2 for one mode.
inline double wtheta_norm_sq(const RadialField& g, unsigned ell, double p) {
    return static_cast<double>(ell) * static_cast<double>(ell) * weighted_norm_sq(g, p - 1.0);
}

/// Hypocoercivity functional for band ell >= 1:
///   Phi = (1/2) [ |g|^2 + alpha |grad g|^2 + 2 p beta <r^{p-1} d_theta g, d_r g>
///                 + gamma |r^{p-1} d_theta g|^2 ].
/// Nonnegative whenever the coefficient constraints hold; a negative value
/// can only come from a broken constant ledger and is flagged as such.
inline double phi_functional(const RadialField& g, unsigned ell, double nu, const HypoConstants& consts) {
    if (ell == 0) throw std::invalid_argument("phi_functional: requires ell >= 1");
    const AbcCoefficients abc = coefficients_abc(consts, nu, ell);
    const double l2 = weighted_norm_sq(g, 0.0);
    const double grad = gradient_norm_sq(g, ell);
    const double cross = cross_term(g, ell, consts.p);
    const double wtheta = wtheta_norm_sq(g, ell, consts.p);
    const double phi =
        0.5 * (l2 + abc.alpha * grad + 2.0 * consts.p * abc.beta * cross + abc.gamma * wtheta);
    if (phi < -1e-12 * (l2 + abc.alpha * grad + abc.gamma * wtheta))
        throw std::logic_error("phi_functional: negative value, coefficient constraints violated");
    return phi;
}

/// Weighted-energy functional W = (1/2)|g|^2 + (gamma0/4)|r^{p-1} g|^2,
/// equivalent to the X-norm squared with p-dependent constants.
inline double w_functional(const RadialField& g, const HypoConstants& consts) {
    return 0.5 * weighted_norm_sq(g, 0.0) + 0.25 * consts.gamma0 * weighted_norm_sq(g, consts.p - 1.0);
}

} // namespace radmix
