#include "doctest.h"

#include <cmath>

#include "radmix/functionals.hpp"
#include "radmix/lemmas.hpp"

using namespace radmix;

namespace {

/// Complex admissible band profile built from two independent real samples.
RadialField complex_sample(unsigned ell, const GridPtr& grid, std::uint64_t seed) {
    const std::vector<RadialField> pair = sample_admissible(ell, grid, 2, seed);
    RadialField g(grid);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t j = 0; j < grid->n_cells(); ++j)
        g.values[j] = Complex(pair[0].values[j].real(), pair[1].values[j].real()) * inv_sqrt2;
    return g;
}

} // namespace

TEST_CASE("x-norm squared composes the two weighted norms") {
    const GridPtr grid = build_grid(8.0, 2048);
    const RadialField g = sample_field(grid, [](double r) { return std::exp(-r * r); });
    // p = 1 collapses to twice the plain norm.
    CHECK(x_norm_sq(g, 1.0) == doctest::Approx(2.0 * weighted_norm_sq(g, 0.0)).epsilon(1e-14));
    // p = 2 against the closed forms 1/4 and 1/8.
    CHECK(x_norm_sq(g, 2.0) == doctest::Approx(0.375).epsilon(1e-5));
    const RadialField zero(grid);
    CHECK(x_norm_sq(zero, 2.0) == 0.0);
}

TEST_CASE("cross term vanishes exactly for constant-phase profiles") {
    const GridPtr grid = build_grid(8.0, 512);
    const RadialField real_g = sample_field(grid, [](double r) { return r * std::exp(-r * r); });
    CHECK(cross_term(real_g, 1, 1.0) == 0.0);

    RadialField imag_g = real_g;
    for (Complex& z : imag_g.values) z *= Complex(0.0, 1.0);
    CHECK(cross_term(imag_g, 1, 1.0) == 0.0);

    RadialField diag_g = real_g;
    for (Complex& z : diag_g.values) z *= Complex(1.0, 1.0);
    CHECK(cross_term(diag_g, 1, 1.0) == 0.0);

    CHECK_THROWS_AS(cross_term(real_g, 0, 1.0), std::invalid_argument);
}

TEST_CASE("cross term matches an analytic-derivative quadrature oracle") {
    // g(r) = (1 + i r) r e^{-r^2} has a genuinely nonzero cross term; compare
    // the implementation (numerical derivative) against the same midpoint sum
    // with the derivative taken symbolically:
    //   g' = (1 + 2 i r - 2 r^2 - 2 i r^3) e^{-r^2}.
    const GridPtr grid = build_grid(8.0, 2048);
    RadialField g(grid);
    for (std::size_t j = 0; j < grid->n_cells(); ++j) {
        const double r = grid->center(j);
        g.values[j] = Complex(1.0, r) * r * std::exp(-r * r);
    }
    const double p = 1.0;
    const unsigned ell = 1;
    double oracle = 0.0;
    for (std::size_t j = 0; j < grid->n_cells(); ++j) {
        const double r = grid->center(j);
        const Complex dg = Complex(1.0 - 2.0 * r * r, 2.0 * r - 2.0 * r * r * r) * std::exp(-r * r);
        oracle += (Complex(0.0, 1.0) * g.values[j] * std::conj(dg)).real() * std::pow(r, p);
    }
    oracle *= grid->h();
    CHECK(std::abs(oracle) > 1e-3); // genuinely nonzero
    CHECK(cross_term(g, ell, p) == doctest::Approx(oracle).epsilon(1e-5));
}

TEST_CASE("phi functional composition, positivity, and sandwich") {
    const GridPtr grid = build_grid(8.0, 1024);
    const RadialField zero(grid);
    const HypoConstants c1 = compute_constants(1.0);
    CHECK(phi_functional(zero, 1, 1e-3, c1) == 0.0);
    CHECK_THROWS_AS(phi_functional(zero, 0, 1e-3, c1), std::invalid_argument);

    // Real profile: cross term is exactly zero, so phi is the plain
    // combination of the three norms.
    const RadialField real_g = sample_field(grid, [](double r) { return r * std::exp(-r * r); });
    const AbcCoefficients abc = coefficients_abc(c1, 1e-3, 1);
    const double manual = 0.5 * (weighted_norm_sq(real_g, 0.0) + abc.alpha * gradient_norm_sq(real_g, 1) +
                                 abc.gamma * wtheta_norm_sq(real_g, 1, 1.0));
    CHECK(phi_functional(real_g, 1, 1e-3, c1) == doctest::Approx(manual).epsilon(1e-14));

    for (double p : {1.0, 2.0}) {
        const HypoConstants c = compute_constants(p);
        for (double nu : {1.0, 1e-3}) {
            for (unsigned ell : {1u, 2u}) {
                const AbcCoefficients co = coefficients_abc(c, nu, ell);
                for (std::uint64_t seed = 0; seed < 20; ++seed) {
                    const RadialField g = complex_sample(ell, grid, 1000 * seed + ell);
                    const double l2 = weighted_norm_sq(g, 0.0);
                    const double grad = gradient_norm_sq(g, ell);
                    const double wtheta = wtheta_norm_sq(g, ell, p);
                    const double phi = phi_functional(g, ell, nu, c);
                    const double lower = 0.25 * (2.0 * l2 + co.alpha * grad + co.gamma * wtheta);
                    const double upper = 0.25 * (2.0 * l2 + 3.0 * co.alpha * grad + 3.0 * co.gamma * wtheta);
                    CHECK(phi >= lower - 1e-9 * upper);
                    CHECK(phi <= upper + 1e-9 * upper);
                    CHECK(phi >= 0.0);
                }
            }
        }
    }
}

TEST_CASE("phi stays nonnegative across the exponent grid") {
    const GridPtr grid = build_grid(8.0, 512);
    for (double p : {1.3, 2.7, 4.0}) {
        const HypoConstants c = compute_constants(p);
        REQUIRE(constraints_hold(c));
        for (unsigned ell : {1u, 3u}) {
            const RadialField g = complex_sample(ell, grid, 31 * ell + static_cast<std::uint64_t>(10 * p));
            for (double nu : {1.0, 1e-2, 1e-4})
                CHECK(phi_functional(g, ell, nu, c) >= 0.0);
        }
    }
}

TEST_CASE("w functional and its X-norm equivalence") {
    const GridPtr grid = build_grid(8.0, 1024);
    const RadialField zero(grid);
    const HypoConstants c1 = compute_constants(1.0);
    CHECK(w_functional(zero, c1) == 0.0);

    // p = 1: gamma0 = 4/3, so W = (1/2 + 1/3) |g|^2.
    const RadialField g = sample_field(grid, [](double r) { return r * std::exp(-r * r); });
    CHECK(w_functional(g, c1) ==
          doctest::Approx((5.0 / 6.0) * weighted_norm_sq(g, 0.0)).epsilon(1e-13));

    for (double p : {1.0, 1.5, 2.0, 3.0}) {
        const HypoConstants c = compute_constants(p);
        const double lo = std::min(0.5, c.gamma0 / 4.0);
        const double hi = std::max(0.5, c.gamma0 / 4.0);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const RadialField s = complex_sample(1, grid, 77 + seed);
            const double w = w_functional(s, c);
            const double x = x_norm_sq(s, p);
            CHECK(w >= lo * x * (1.0 - 1e-12));
            CHECK(w <= hi * x * (1.0 + 1e-12));
        }
    }
}
