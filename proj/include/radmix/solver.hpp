#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "radmix/grid.hpp"
#include "radmix/rng.hpp"

namespace radmix {

/// Physical and numerical parameters of one mode trajectory.
struct FlowConfig {
    double p = 1.0;      // flow exponent, u = r^p e_theta
    double nu = 1e-3;    // diffusivity; 0 is allowed for advection-only runs
    unsigned ell = 1;    // angular wavenumber
    double dt = 1e-2;
    double t_max = 1.0;
    std::size_t record_every = 1;

    void validate() const {
        if (!(p >= 1.0)) throw std::invalid_argument("FlowConfig: p must be >= 1");
        if (!(nu >= 0.0 && nu <= 1.0)) throw std::invalid_argument("FlowConfig: nu must be in [0,1]");
        if (!(dt > 0.0)) throw std::invalid_argument("FlowConfig: dt must be positive");
        if (!(t_max >= 0.0)) throw std::invalid_argument("FlowConfig: t_max must be nonnegative");
        if (record_every == 0) throw std::invalid_argument("FlowConfig: record_every must be >= 1");
        // Envelope hypothesis nu/k <= 1; automatic for nu <= 1, k >= 1.
        if (ell >= 1 && nu / static_cast<double>(ell) > 1.0)
            throw std::invalid_argument("FlowConfig: nu/ell must be <= 1");
    }
};

struct ModeState {
    RadialField field;
    double t = 0.0;
    FlowConfig config;
};

enum class ProfileKind { gaussian_monomial, gaussian_polynomial };

/// Band-admissible initial data: r^ell times a Gaussian (optionally times a
/// seeded even polynomial), normalized to unit per-mode L2 norm. The r^ell
/// factor gives the origin vanishing every smooth mode-ell profile has.
inline RadialField initial_profile(ProfileKind kind, unsigned ell, const GridPtr& grid, double width,
                                   std::uint64_t seed = 0) {
    if (!(width > 0.0)) throw std::invalid_argument("initial_profile: width must be positive");
    if (width >= grid->r_max() / 4.0)
        throw std::invalid_argument("initial_profile: width must be < r_max/4 to keep boundary leak negligible");
    double a0 = 1.0, a1 = 0.0, a2 = 0.0;
    if (kind == ProfileKind::gaussian_polynomial) {
        SplitMix64 rng(seed);
        a0 = rng.next_in(-1.0, 1.0);
        a1 = rng.next_in(-1.0, 1.0);
        a2 = rng.next_in(-1.0, 1.0);
    }
    RadialField out(grid);
    for (std::size_t j = 0; j < grid->n_cells(); ++j) {
        const double r = grid->center(j);
        const double s = r / width;
        const double poly = a0 + a1 * r * r + a2 * r * r * r * r;
        out.values[j] = std::pow(r, static_cast<double>(ell)) * poly * std::exp(-s * s);
    }
    const double norm = std::sqrt(weighted_norm_sq(out, 0.0));
    if (!(norm > 1e-14)) throw std::runtime_error("initial_profile: degenerate profile, norm ~ 0");
    for (Complex& z : out.values) z /= norm;
    return out;
}

/// Exact evolution of exp(-(r/w)^2) under the radially symmetric heat flow:
///   (w^2/(w^2+4 nu t)) exp(-r^2/(w^2+4 nu t)).
/// The reference solution for every ell = 0 accuracy check.
inline RadialField heat_mode_exact(double width, double nu, double t, const GridPtr& grid) {
    if (!(t >= 0.0)) throw std::invalid_argument("heat_mode_exact: t must be nonnegative");
    const double s2 = width * width + 4.0 * nu * t;
    const double amp = width * width / s2;
    return sample_field(grid, [&](double r) { return amp * std::exp(-r * r / s2); });
}

/// Complex tridiagonal matrix in band storage; lower[0] and upper[n-1] unused.
struct Tridiagonal {
    std::vector<Complex> lower, diag, upper;
    explicit Tridiagonal(std::size_t n) : lower(n), diag(n), upper(n) {}
    std::size_t size() const { return diag.size(); }
};

/// Assembles the mode-ell generator  A = -i ell r^p + nu * mode_laplacian.
inline Tridiagonal mode_operator(const RadialGrid& grid, double p, double nu, unsigned ell) {
    const std::size_t n = grid.n_cells();
    Tridiagonal A(n);
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    const double ell2 = static_cast<double>(ell) * static_cast<double>(ell);
    for (std::size_t j = 0; j < n; ++j) {
        const double rj = grid.center(j);
        const double face_in = grid.face(j);
        const double face_out = grid.face(j + 1);
        double diag_lap = -(face_in + face_out) * inv_h2 / rj - ell2 / (rj * rj);
        if (j > 0) A.lower[j] = Complex(nu * face_in * inv_h2 / rj, 0.0);
        if (j + 1 < n) A.upper[j] = Complex(nu * face_out * inv_h2 / rj, 0.0);
        A.diag[j] = Complex(nu * diag_lap, -static_cast<double>(ell) * std::pow(rj, p));
    }
    return A;
}

/// Implicit trapezoidal stepper for one mode: solves
///   (I - dt/2 A) f^{n+1} = (I + dt/2 A) f^n
/// with the left matrix Thomas-factorized once at construction. The left
/// matrix is strictly diagonally dominant for every dt > 0 (skew advection
/// plus dissipative Laplacian), so no pivoting is needed and a single step
/// never increases the r-weighted L2 norm.
class Stepper {
public:
    Stepper(const FlowConfig& config, const GridPtr& grid)
        : config_(config), grid_(grid), op_(mode_operator(*grid, config.p, config.nu, config.ell)),
          plus_(op_.size()), fac_upper_(op_.size()), fac_inv_diag_(op_.size()) {
        config_.validate();
        const std::size_t n = op_.size();
        const double half_dt = 0.5 * config_.dt;
        Tridiagonal minus(n);
        for (std::size_t j = 0; j < n; ++j) {
            minus.lower[j] = -half_dt * op_.lower[j];
            minus.diag[j] = Complex(1.0, 0.0) - half_dt * op_.diag[j];
            minus.upper[j] = -half_dt * op_.upper[j];
            plus_.lower[j] = half_dt * op_.lower[j];
            plus_.diag[j] = Complex(1.0, 0.0) + half_dt * op_.diag[j];
            plus_.upper[j] = half_dt * op_.upper[j];
        }
        // Thomas factorization of the left matrix.
        Complex d = minus.diag[0];
        if (std::abs(d) == 0.0) throw std::runtime_error("Stepper: singular left matrix (discretization bug)");
        fac_inv_diag_[0] = 1.0 / d;
        fac_upper_[0] = minus.upper[0] * fac_inv_diag_[0];
        for (std::size_t j = 1; j < n; ++j) {
            d = minus.diag[j] - minus.lower[j] * fac_upper_[j - 1];
            if (std::abs(d) == 0.0)
                throw std::runtime_error("Stepper: singular left matrix (discretization bug)");
            fac_inv_diag_[j] = 1.0 / d;
            fac_upper_[j] = minus.upper[j] * fac_inv_diag_[j];
            fac_lower_.push_back(minus.lower[j]);
        }
    }

    const FlowConfig& config() const { return config_; }
    const GridPtr& grid() const { return grid_; }
    const Tridiagonal& generator() const { return op_; }

    /// In-place advance by one dt; scratch must have grid size.
    void advance(std::vector<Complex>& f, std::vector<Complex>& scratch) const {
        const std::size_t n = f.size();
        // Right-hand side (I + dt/2 A) f.
        for (std::size_t j = 0; j < n; ++j) {
            Complex acc = plus_.diag[j] * f[j];
            if (j > 0) acc += plus_.lower[j] * f[j - 1];
            if (j + 1 < n) acc += plus_.upper[j] * f[j + 1];
            scratch[j] = acc;
        }
        // Forward sweep with the prefactored coefficients.
        f[0] = scratch[0] * fac_inv_diag_[0];
        for (std::size_t j = 1; j < n; ++j)
            f[j] = (scratch[j] - fac_lower_[j - 1] * f[j - 1]) * fac_inv_diag_[j];
        // Back substitution.
        for (std::size_t j = n - 1; j-- > 0;) f[j] -= fac_upper_[j] * f[j + 1];
    }

private:
    FlowConfig config_;
    GridPtr grid_;
    Tridiagonal op_;
    Tridiagonal plus_;
    std::vector<Complex> fac_upper_;
    std::vector<Complex> fac_inv_diag_;
    std::vector<Complex> fac_lower_;
};

inline Stepper build_stepper(const FlowConfig& config, const GridPtr& grid) {
    return Stepper(config, grid);
}

/// One trapezoidal step; validates state/stepper pairing and result finiteness.
inline ModeState step(const ModeState& state, const Stepper& stepper) {
    if (state.field.grid->n_cells() != stepper.grid()->n_cells() ||
        state.config.ell != stepper.config().ell || state.config.dt != stepper.config().dt ||
        state.config.nu != stepper.config().nu || state.config.p != stepper.config().p)
        throw std::invalid_argument("step: state config does not match stepper");
    ModeState next = state;
    std::vector<Complex> scratch(state.field.size());
    stepper.advance(next.field.values, scratch);
    next.t = state.t + stepper.config().dt;
    if (!next.field.is_finite())
        throw std::runtime_error("step: non-finite solve output at t = " + std::to_string(next.t));
    return next;
}

/// Radius enclosing the given fraction of the field's L2 mass; used by the
/// default time-step rule to locate where advection accuracy matters.
inline double core_radius(const RadialField& g, double fraction = 0.99) {
    const RadialGrid& grid = *g.grid;
    const double total = weighted_norm_sq(g, 0.0);
    if (total <= 0.0) return grid.r_max();
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.n_cells(); ++j) {
        acc += std::norm(g.values[j]) * grid.center(j) * grid.h();
        if (acc >= fraction * total) return grid.center(j);
    }
    return grid.r_max();
}

/// Accuracy-motivated default step: resolve the advective phase at the core
/// radius, and (for diffusion-dominated runs) the grid-scale diffusive time,
/// the latter clipped below at 1e-2 so large nu never forces explicit-scheme
/// step sizes on an unconditionally stable method.
inline double default_dt(const FlowConfig& config, const RadialGrid& grid, const RadialField& initial) {
    const double diffusive =
        config.nu > 0.0 ? std::max(0.1 * grid.h() * grid.h() / config.nu, 1e-2)
                        : std::numeric_limits<double>::infinity();
    double advective = std::numeric_limits<double>::infinity();
    if (config.ell >= 1) {
        const double rc = core_radius(initial);
        advective = 0.5 / (static_cast<double>(config.ell) * std::pow(rc, config.p));
    }
    const double dt = std::min(advective, diffusive);
    return std::isfinite(dt) ? dt : 1e-2;
}

} // namespace radmix
