#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

namespace radmix {

using Complex = std::complex<double>;

/// Cell-centered mesh on the truncated radial half-line [0, r_max].
///
/// Cells are j = 0..n_cells-1 with centers r_j = (j+1/2)h and faces at j*h,
/// so the innermost face sits exactly at r = 0 and no unknown lives on the
/// coordinate singularity. All quadrature below is the midpoint rule with
/// the polar measure r dr.
class RadialGrid {
public:
    RadialGrid(double r_max, std::size_t n_cells) : r_max_(r_max), n_(n_cells) {
        if (!(r_max > 0.0)) throw std::invalid_argument("RadialGrid: r_max must be positive");
        if (n_cells < 8) throw std::invalid_argument("RadialGrid: need at least 8 cells");
        h_ = r_max / static_cast<double>(n_cells);
        centers_.resize(n_);
        faces_.resize(n_ + 1);
        for (std::size_t j = 0; j < n_; ++j) centers_[j] = (static_cast<double>(j) + 0.5) * h_;
        for (std::size_t j = 0; j <= n_; ++j) faces_[j] = static_cast<double>(j) * h_;
    }

    double r_max() const { return r_max_; }
    double h() const { return h_; }
    std::size_t n_cells() const { return n_; }
    double center(std::size_t j) const { return centers_[j]; }
    double face(std::size_t j) const { return faces_[j]; }
    const std::vector<double>& centers() const { return centers_; }
    const std::vector<double>& faces() const { return faces_; }

private:
    double r_max_;
    std::size_t n_;
    double h_;
    std::vector<double> centers_;
    std::vector<double> faces_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

inline GridPtr build_grid(double r_max, std::size_t n_cells) {
    return std::make_shared<const RadialGrid>(r_max, n_cells);
}

/// One complex radial profile sampled at the cell centers of a shared grid.
struct RadialField {
    GridPtr grid;
    std::vector<Complex> values;

    RadialField() = default;
    explicit RadialField(GridPtr g) : grid(std::move(g)), values(grid->n_cells(), Complex{0.0, 0.0}) {}
    RadialField(GridPtr g, std::vector<Complex> v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid->n_cells())
            throw std::invalid_argument("RadialField: value count does not match grid");
    }

    std::size_t size() const { return values.size(); }

    bool is_finite() const {
        for (const Complex& z : values)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }
};

/// Builds a field by sampling f(r) at the cell centers.
template <typename F>
RadialField sample_field(const GridPtr& grid, F&& f) {
    RadialField out(grid);
    for (std::size_t j = 0; j < grid->n_cells(); ++j) out.values[j] = Complex(f(grid->center(j)));
    return out;
}

/// Midpoint-rule value of the weighted integral  int |g|^2 r^{2m} r dr,
/// i.e. h * sum_j |g_j|^2 r_j^{2m+1}. Band quantities are reported per mode,
/// with no angular 2*pi factors; every balance and inequality checked here is
/// homogeneous in that normalization.
inline double weighted_norm_sq(const RadialField& g, double m) {
    const RadialGrid& grid = *g.grid;
    double acc = 0.0;
    const double expo = 2.0 * m + 1.0;
    for (std::size_t j = 0; j < grid.n_cells(); ++j)
        acc += std::norm(g.values[j]) * std::pow(grid.center(j), expo);
    acc *= grid.h();
    if (!std::isfinite(acc)) throw std::runtime_error("weighted_norm_sq: non-finite field");
    return acc;
}

/// r-weighted complex inner product  h * sum_j g_j conj(h_j) r_j.
inline Complex complex_inner(const RadialField& g, const RadialField& h) {
    const RadialGrid& grid = *g.grid;
    if (h.size() != g.size()) throw std::invalid_argument("complex_inner: size mismatch");
    Complex acc{0.0, 0.0};
    for (std::size_t j = 0; j < grid.n_cells(); ++j)
        acc += g.values[j] * std::conj(h.values[j]) * grid.center(j);
    return acc * grid.h();
}

inline double real_inner(const RadialField& g, const RadialField& h) {
    return complex_inner(g, h).real();
}

/// Second-order radial derivative at cell centers: centered in the interior,
/// one-sided at the two end cells. Diagnostics only; the time stepper never
/// touches this operator.
inline RadialField radial_derivative(const RadialField& g) {
    const RadialGrid& grid = *g.grid;
    const std::size_t n = grid.n_cells();
    if (n < 3) throw std::invalid_argument("radial_derivative: need at least 3 cells");
    RadialField out(g.grid);
    const double inv2h = 1.0 / (2.0 * grid.h());
    out.values[0] = (-3.0 * g.values[0] + 4.0 * g.values[1] - g.values[2]) * inv2h;
    for (std::size_t j = 1; j + 1 < n; ++j)
        out.values[j] = (g.values[j + 1] - g.values[j - 1]) * inv2h;
    out.values[n - 1] = (3.0 * g.values[n - 1] - 4.0 * g.values[n - 2] + g.values[n - 3]) * inv2h;
    return out;
}

/// Conservative mode-ell Laplacian  (1/(r_j h)) [ r_{f,j+1} (g_{j+1}-g_j)/h
/// - r_{f,j} (g_j-g_{j-1})/h ] - ell^2 g_j / r_j^2.
///
/// The r = 0 face carries zero radius, so the inner flux vanishes without any
/// origin value; beyond r_max a homogeneous Dirichlet ghost cell closes the
/// stencil. Self-adjoint and nonpositive in the r-weighted inner product.
inline RadialField mode_laplacian(const RadialField& g, unsigned ell) {
    const RadialGrid& grid = *g.grid;
    const std::size_t n = grid.n_cells();
    RadialField out(g.grid);
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    const double ell2 = static_cast<double>(ell) * static_cast<double>(ell);
    for (std::size_t j = 0; j < n; ++j) {
        const double rj = grid.center(j);
        Complex flux_out = (j + 1 < n) ? grid.face(j + 1) * (g.values[j + 1] - g.values[j])
                                       : grid.face(n) * (-g.values[j]);
        Complex flux_in = (j > 0) ? grid.face(j) * (g.values[j] - g.values[j - 1]) : Complex{0.0, 0.0};
        out.values[j] = (flux_out - flux_in) * (inv_h2 / rj) - ell2 * g.values[j] / (rj * rj);
    }
    return out;
}

/// Discrete |grad g|^2 for a mode-ell profile, assembled from face-centered
/// differences plus the angular ell^2 |g/r|^2 part:
///
///   h * [ sum over interior faces r_f |(g_{j+1}-g_j)/h|^2
///         + r_max |g_{n-1}/h|^2 ]  +  ell^2 h sum_j |g_j|^2 / r_j.
///
/// With the Dirichlet ghost term included this equals -Re<mode_laplacian(g), g>
/// exactly, which is what makes the discrete energy balance of the L2 norm an
/// identity rather than an approximation.
inline double gradient_norm_sq(const RadialField& g, unsigned ell) {
    const RadialGrid& grid = *g.grid;
    const std::size_t n = grid.n_cells();
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    double faces = 0.0;
    for (std::size_t f = 1; f < n; ++f)
        faces += grid.face(f) * std::norm(g.values[f] - g.values[f - 1]) * inv_h2;
    faces += grid.face(n) * std::norm(g.values[n - 1]) * inv_h2;
    double angular = 0.0;
    if (ell > 0) {
        for (std::size_t j = 0; j < n; ++j) angular += std::norm(g.values[j]) / grid.center(j);
        angular *= static_cast<double>(ell) * static_cast<double>(ell);
    }
    return grid.h() * (faces + angular);
}

/// Largest modulus over the outermost 5% of cells; a cheap monitor for mass
/// reaching the artificial Dirichlet boundary.
inline double boundary_leak(const RadialField& g) {
    const std::size_t n = g.size();
    const std::size_t tail = std::max<std::size_t>(1, n / 20);
    double peak = 0.0;
    for (std::size_t j = n - tail; j < n; ++j) peak = std::max(peak, std::abs(g.values[j]));
    return peak;
}

} // namespace radmix
