#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "radmix/constants.hpp"
#include "radmix/csv.hpp"
#include "radmix/functionals.hpp"
#include "radmix/grid.hpp"
#include "radmix/solver.hpp"

namespace radmix {

/// One sampled diagnostic row. All norms are per-mode integrals; the two
/// mixed Laplacian products are recorded so the third balance check is a pure
/// quadrature comparison instead of a re-derivation.
struct LedgerRow {
    double t = 0.0;
    double l2_sq = 0.0;        // |f|^2
    double grad_sq = 0.0;      // |grad f|^2 (summation-by-parts form)
    double wtheta_sq = 0.0;    // |r^{p-1} d_theta f|^2
    double cross = 0.0;        // <r^{p-1} d_theta f, d_r f>
    double lap_sq = 0.0;       // |Lap f|^2
    double wgrad_sq = 0.0;     // |r^{p-1} d_theta grad f|^2
    double wm2_sq = 0.0;       // |r^{p-2} d_theta f|^2
    double mix_grad_lap = 0.0; // <r^{p-1} d_r d_theta f, Lap f>
    double mix_wm2_lap = 0.0;  // <r^{p-2} d_theta f, Lap f>
    double x_sq = 0.0;         // X-norm squared
    double phi = 0.0;          // hypocoercivity functional (NaN for ell = 0)
    double w = 0.0;            // weighted-energy functional
};

inline const std::vector<std::string>& ledger_columns() {
    static const std::vector<std::string> cols = {
        "t",       "l2_sq",        "grad_sq",     "wtheta_sq", "cross", "lap_sq", "wgrad_sq",
        "wm2_sq",  "mix_grad_lap", "mix_wm2_lap", "x_sq",      "phi",   "w"};
    return cols;
}

inline std::array<double, 13> ledger_row_values(const LedgerRow& r) {
    return {r.t,      r.l2_sq,        r.grad_sq,     r.wtheta_sq, r.cross, r.lap_sq, r.wgrad_sq,
            r.wm2_sq, r.mix_grad_lap, r.mix_wm2_lap, r.x_sq,      r.phi,   r.w};
}

/// Time series of diagnostics for one trajectory, tagged with the run
/// parameters the balance checks need.
struct EnergyLedger {
    double p = 1.0;
    double nu = 0.0;
    unsigned ell = 0;
    std::vector<LedgerRow> rows;
};

/// Assembles the full diagnostic row for the current state.
inline LedgerRow diagnose(const ModeState& state, const HypoConstants& consts) {
    const RadialField& f = state.field;
    const RadialGrid& grid = *f.grid;
    const double p = state.config.p;
    const unsigned ell = state.config.ell;
    const double elld = static_cast<double>(ell);

    LedgerRow row;
    row.t = state.t;
    row.l2_sq = weighted_norm_sq(f, 0.0);
    row.grad_sq = gradient_norm_sq(f, ell);
    row.wtheta_sq = wtheta_norm_sq(f, ell, p);
    row.x_sq = x_norm_sq(f, p);
    row.w = w_functional(f, consts);

    const RadialField lap = mode_laplacian(f, ell);
    row.lap_sq = weighted_norm_sq(lap, 0.0);

    const RadialField df = radial_derivative(f);
    if (ell >= 1) {
        // cross = Re <(i ell f), d_r f>_{r^{p-1}}, and the two mixed products
        // against the Laplacian that feed the cross-term balance.
        double cross = 0.0, mix1 = 0.0, mix2 = 0.0, wgrad_r = 0.0, wm2 = 0.0;
        for (std::size_t j = 0; j < grid.n_cells(); ++j) {
            const double r = grid.center(j);
            const double wp = std::pow(r, p);            // r^{p-1} * r
            const double wp_m1 = std::pow(r, p - 1.0);   // r^{p-2} * r
            const Complex itheta_f = Complex(0.0, elld) * f.values[j];
            cross += (itheta_f * std::conj(df.values[j])).real() * wp;
            mix1 += (Complex(0.0, elld) * df.values[j] * std::conj(lap.values[j])).real() * wp;
            mix2 += (itheta_f * std::conj(lap.values[j])).real() * wp_m1;
            wgrad_r += std::norm(df.values[j]) * wp * wp / r; // r^{2(p-1)} * r
            wm2 += std::norm(f.values[j]) * wp_m1 * wp_m1 / r;
        }
        const double h = grid.h();
        row.cross = cross * h;
        row.mix_grad_lap = mix1 * h;
        row.mix_wm2_lap = mix2 * h;
        row.wm2_sq = elld * elld * wm2 * h;
        row.wgrad_sq = elld * elld * (wgrad_r * h) + elld * elld * row.wm2_sq;
        row.phi = (state.config.nu > 0.0) ? phi_functional(f, ell, state.config.nu, consts)
                                          : std::numeric_limits<double>::quiet_NaN();
    } else {
        row.phi = std::numeric_limits<double>::quiet_NaN();
    }
    return row;
}

inline std::string ledger_to_csv(const EnergyLedger& ledger) {
    CsvWriter csv(ledger_columns());
    std::vector<std::string> cells(13);
    for (const LedgerRow& row : ledger.rows) {
        const std::array<double, 13> vals = ledger_row_values(row);
        for (std::size_t i = 0; i < vals.size(); ++i) cells[i] = format_double(vals[i]);
        csv.row(cells);
    }
    return csv.str();
}

inline std::vector<LedgerRow> ledger_rows_from_csv(const CsvTable& table) {
    if (table.header != ledger_columns())
        throw std::runtime_error("ledger_rows_from_csv: unexpected column header");
    std::vector<LedgerRow> rows;
    rows.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        LedgerRow r;
        r.t = table.number(i, 0);
        r.l2_sq = table.number(i, 1);
        r.grad_sq = table.number(i, 2);
        r.wtheta_sq = table.number(i, 3);
        r.cross = table.number(i, 4);
        r.lap_sq = table.number(i, 5);
        r.wgrad_sq = table.number(i, 6);
        r.wm2_sq = table.number(i, 7);
        r.mix_grad_lap = table.number(i, 8);
        r.mix_wm2_lap = table.number(i, 9);
        r.x_sq = table.number(i, 10);
        r.phi = table.number(i, 11);
        r.w = table.number(i, 12);
        rows.push_back(r);
    }
    return rows;
}

struct EvolveOptions {
    /// Stop once x_sq falls below this fraction of its initial value (0 = never).
    double stop_below_x_frac = 0.0;
};

struct EvolveOutcome {
    EnergyLedger ledger;
    bool failed = false;
    std::string error;
    double max_leak = 0.0; // peak boundary-leak monitor over recorded rows
    ModeState final_state;
};

using LedgerCallback = std::function<void(const LedgerRow&)>;

/// Runs the trajectory to t_max, sampling diagnostics every record_every
/// steps (always including step 0). On a numerical failure the partial ledger
/// is returned with the failure flagged rather than thrown away.
inline EvolveOutcome evolve(const ModeState& initial, const Stepper& stepper, const HypoConstants& consts,
                            const EvolveOptions& opts = {}, const LedgerCallback& callback = {}) {
    EvolveOutcome out;
    out.ledger.p = initial.config.p;
    out.ledger.nu = initial.config.nu;
    out.ledger.ell = initial.config.ell;

    ModeState state = initial;
    std::vector<Complex> scratch(state.field.size());
    const double dt = stepper.config().dt;
    const std::size_t n_steps =
        static_cast<std::size_t>(std::llround(std::max(0.0, initial.config.t_max) / dt));
    const std::size_t stride = initial.config.record_every;

    const auto record = [&](const ModeState& s) {
        LedgerRow row = diagnose(s, consts);
        out.ledger.rows.push_back(row);
        out.max_leak = std::max(out.max_leak, boundary_leak(s.field));
        if (callback) callback(row);
        return row.x_sq;
    };

    const double x0 = record(state);
    for (std::size_t k = 1; k <= n_steps; ++k) {
        stepper.advance(state.field.values, scratch);
        state.t = initial.t + static_cast<double>(k) * dt;
        if (k % stride == 0) {
            if (!state.field.is_finite()) {
                out.failed = true;
                out.error = "non-finite field at t = " + std::to_string(state.t);
                break;
            }
            const double x = record(state);
            if (opts.stop_below_x_frac > 0.0 && x <= opts.stop_below_x_frac * x0) break;
            // Below 1e-300 of the initial energy the field is numerically
            // zero; clamp it exactly so long horizons never grind through
            // hardware-denormal arithmetic (zeros propagate at full speed).
            if (x <= 1e-300 * x0)
                for (Complex& z : state.field.values) z = Complex(0.0, 0.0);
        }
    }
    out.final_state = std::move(state);
    return out;
}

/// Maximum relative defect of the four energy balances over the interior
/// ledger rows, each normalized by the largest magnitude either side of that
/// balance attains. Time derivatives are central differences at the ledger
/// stride, which must be uniform.
struct BalanceReport {
    double l2_balance = 0.0;     // d/dt (1/2)|f|^2        = -nu |grad f|^2
    double grad_balance = 0.0;   // d/dt (1/2)|grad f|^2   = -nu |Lap f|^2 - p cross
    double cross_balance = 0.0;  // d/dt cross             = -p wtheta - 2 nu mix1 - nu p mix2
    double wtheta_balance = 0.0; // d/dt (1/2) wtheta      = -nu wgrad + 2 nu (p-1)^2 wm2

    double max_residual() const {
        return std::max(std::max(l2_balance, grad_balance), std::max(cross_balance, wtheta_balance));
    }
};

inline BalanceReport balance_residuals(const EnergyLedger& ledger) {
    const std::vector<LedgerRow>& rows = ledger.rows;
    if (rows.size() < 3) throw std::invalid_argument("balance_residuals: need at least 3 ledger rows");
    const double dt0 = rows[1].t - rows[0].t;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i)
        if (std::abs((rows[i + 1].t - rows[i].t) - dt0) > 1e-9 * std::max(1.0, std::abs(dt0)))
            throw std::invalid_argument("balance_residuals: ledger stride is not uniform");

    const double nu = ledger.nu;
    const double p = ledger.p;
    const double pm1sq = (p - 1.0) * (p - 1.0);

    struct Acc {
        double defect = 0.0;
        double scale = 0.0;
        void add(double lhs, double rhs) {
            defect = std::max(defect, std::abs(lhs - rhs));
            scale = std::max(scale, std::max(std::abs(lhs), std::abs(rhs)));
        }
        // A balance whose own sides sit at rounding level (e.g. the L2 one in
        // an advection-only run) is measured against the largest scale any
        // balance attains, not against its own noise.
        double relative(double global_scale) const {
            const double ref = std::max(scale, 1e-9 * global_scale);
            return ref > 0.0 ? defect / ref : defect;
        }
    };
    Acc a_l2, a_grad, a_cross, a_wtheta;

    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
        const LedgerRow& lo = rows[i - 1];
        const LedgerRow& mid = rows[i];
        const LedgerRow& hi = rows[i + 1];
        const double inv2dt = 1.0 / (hi.t - lo.t);
        a_l2.add(0.5 * (hi.l2_sq - lo.l2_sq) * inv2dt, -nu * mid.grad_sq);
        a_grad.add(0.5 * (hi.grad_sq - lo.grad_sq) * inv2dt, -nu * mid.lap_sq - p * mid.cross);
        a_cross.add((hi.cross - lo.cross) * inv2dt,
                    -p * mid.wtheta_sq - 2.0 * nu * mid.mix_grad_lap - nu * p * mid.mix_wm2_lap);
        a_wtheta.add(0.5 * (hi.wtheta_sq - lo.wtheta_sq) * inv2dt,
                     -nu * mid.wgrad_sq + 2.0 * nu * pm1sq * mid.wm2_sq);
    }
    const double global_scale =
        std::max(std::max(a_l2.scale, a_grad.scale), std::max(a_cross.scale, a_wtheta.scale));
    return {a_l2.relative(global_scale), a_grad.relative(global_scale),
            a_cross.relative(global_scale), a_wtheta.relative(global_scale)};
}

/// One balance-verification run at a pinned resolution.
struct BalanceCase {
    double p = 1.0;
    double nu = 1e-2;
    unsigned ell = 1;
    double r_max = 8.0;
    std::size_t n_cells = 256;
    double dt = 2e-3;
    double t_max = 1.0;
    std::size_t record_every = 5;
    double width = 1.0;
    ProfileKind profile = ProfileKind::gaussian_monomial;
    std::uint64_t seed = 0;

    BalanceCase refined() const {
        BalanceCase r = *this;
        r.n_cells *= 2;
        r.dt *= 0.5;
        return r; // record_every fixed, so the ledger stride halves with dt
    }
};

inline BalanceReport run_balance_case(const BalanceCase& bc) {
    const GridPtr grid = build_grid(bc.r_max, bc.n_cells);
    FlowConfig config;
    config.p = bc.p;
    config.nu = bc.nu;
    config.ell = bc.ell;
    config.dt = bc.dt;
    config.t_max = bc.t_max;
    config.record_every = bc.record_every;
    const HypoConstants consts = compute_constants(bc.p);
    const Stepper stepper(config, grid);
    ModeState state{initial_profile(bc.profile, bc.ell, grid, bc.width, bc.seed), 0.0, config};
    const EvolveOutcome outcome = evolve(state, stepper, consts);
    if (outcome.failed) throw std::runtime_error("run_balance_case: " + outcome.error);
    return balance_residuals(outcome.ledger);
}

/// Weighted-norm growth bound: |r^{p-1} f(t)|^2 never exceeds
/// (|r^{p-1} f(0)|^2 + (C_p^p / 2)|f(0)|^2) e^{nu t} with C_p = 4(p-1)^2.
/// Returns the worst (smallest) margin rhs - lhs over the ledger.
struct GronwallReport {
    double min_margin = 0.0;
    double argmin_t = 0.0;
    bool holds = false;
};

inline GronwallReport gronwall_bound_check(const EnergyLedger& ledger, const HypoConstants& consts) {
    if (ledger.rows.empty()) throw std::invalid_argument("gronwall_bound_check: empty ledger");
    const double w0 = ledger.rows.front().x_sq - ledger.rows.front().l2_sq; // |r^{p-1} f(0)|^2
    const double l20 = ledger.rows.front().l2_sq;
    const double coef = 0.5 * std::pow(consts.big_cp, consts.p);
    GronwallReport rep;
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (const LedgerRow& row : ledger.rows) {
        const double lhs = row.x_sq - row.l2_sq;
        const double rhs = (w0 + coef * l20) * std::exp(ledger.nu * row.t);
        const double margin = rhs - lhs;
        if (margin < rep.min_margin) {
            rep.min_margin = margin;
            rep.argmin_t = row.t;
        }
    }
    rep.holds = rep.min_margin >= 0.0;
    return rep;
}

} // namespace radmix
