#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "radmix/constants.hpp"
#include "radmix/csv.hpp"
#include "radmix/ledger.hpp"
#include "radmix/solver.hpp"

namespace radmix {

/// First recorded time at which x_sq falls to threshold^2 of its initial
/// value, interpolated linearly in log x_sq between ledger rows. Negative
/// (absent) when the threshold is never reached within the run.
inline double mixing_time(const EnergyLedger& ledger, double threshold = std::exp(-2.0)) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw std::invalid_argument("mixing_time: threshold must be in (0,1]");
    if (ledger.rows.empty()) throw std::invalid_argument("mixing_time: empty ledger");
    const double target = threshold * threshold * ledger.rows.front().x_sq;
    if (ledger.rows.front().x_sq <= target) return ledger.rows.front().t;
    for (std::size_t i = 1; i < ledger.rows.size(); ++i) {
        const double x_hi = ledger.rows[i - 1].x_sq;
        const double x_lo = ledger.rows[i].x_sq;
        if (x_lo <= target) {
            if (!(x_hi > x_lo)) return ledger.rows[i].t;
            const double frac = (std::log(x_hi) - std::log(target)) / (std::log(x_hi) - std::log(x_lo));
            return ledger.rows[i - 1].t + frac * (ledger.rows[i].t - ledger.rows[i - 1].t);
        }
    }
    return -1.0;
}

struct FitResult {
    double rate = 0.0;     // negated slope of (1/2) ln x_sq versus t
    double residual = 0.0; // rms residual of the linear fit
    double stderr_rate = 0.0;
    std::size_t n_rows = 0;
};

/// Least-squares exponential-decay rate of the X-norm over the window where
/// x_sq passes between two fractions of its initial value.
inline FitResult fit_rate(const EnergyLedger& ledger, double frac_hi = 0.5, double frac_lo = 1e-3) {
    if (ledger.rows.empty()) throw std::invalid_argument("fit_rate: empty ledger");
    if (!(frac_lo < frac_hi && frac_hi <= 1.0)) throw std::invalid_argument("fit_rate: bad window fractions");
    const double x0 = ledger.rows.front().x_sq;
    std::vector<double> ts, ys;
    for (const LedgerRow& row : ledger.rows) {
        if (row.x_sq <= frac_hi * x0 && row.x_sq >= frac_lo * x0 && row.x_sq > 0.0) {
            ts.push_back(row.t);
            ys.push_back(0.5 * std::log(row.x_sq));
        }
    }
    if (ts.size() < 10)
        throw std::runtime_error("fit_rate: fewer than 10 ledger rows in the fit window; extend t_max");
    const double n = static_cast<double>(ts.size());
    double mt = 0.0, my = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        mt += ts[i];
        my += ys[i];
    }
    mt /= n;
    my /= n;
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        stt += (ts[i] - mt) * (ts[i] - mt);
        sty += (ts[i] - mt) * (ys[i] - my);
    }
    const double slope = sty / stt;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double r = ys[i] - (my + slope * (ts[i] - mt));
        ss_res += r * r;
    }
    FitResult fit;
    fit.rate = -slope;
    fit.n_rows = ts.size();
    fit.residual = std::sqrt(ss_res / n);
    fit.stderr_rate = (ts.size() > 2) ? std::sqrt(ss_res / (n - 2.0) / stt) : 0.0;
    return fit;
}

struct ExponentFit {
    double slope = 0.0;
    double stderr_slope = 0.0;
};

/// Least-squares slope of ln(rate) versus ln(nu); the scaling-exponent probe.
inline ExponentFit scaling_exponent(const std::vector<double>& nus, const std::vector<double>& rates) {
    if (nus.size() != rates.size()) throw std::invalid_argument("scaling_exponent: size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < nus.size(); ++i) {
        if (nus[i] > 0.0 && rates[i] > 0.0) {
            xs.push_back(std::log(nus[i]));
            ys.push_back(std::log(rates[i]));
        }
    }
    std::vector<double> uniq = xs;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (uniq.size() < 4) throw std::invalid_argument("scaling_exponent: need >= 4 distinct nu values");
    if (uniq.back() - uniq.front() < 2.0 * std::log(10.0) - 1e-9)
        throw std::invalid_argument("scaling_exponent: nu values must span >= 2 decades");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    ExponentFit fit;
    fit.slope = sxy / sxx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (my + fit.slope * (xs[i] - mx));
        ss_res += r * r;
    }
    fit.stderr_slope = (xs.size() > 2) ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
    return fit;
}

/// Exponential-envelope report for one trajectory:
///   phi_ratio_max = max_t Phi(t) e^{lambda_thm t} / Phi(0)   (must stay ~<= 1)
///   c0_fit        = max_t W(t) e^{lambda_w t} / W(0)          (finite, >= 1)
/// Ratios are evaluated in log space so late times cannot overflow.
struct EnvelopeReport {
    double phi_ratio_max = 0.0;
    bool phi_ok = false;
    double c0_fit = 0.0;
    bool l2_monotone = false;
};

inline EnvelopeReport envelope_checks(const EnergyLedger& ledger, const HypoConstants& consts,
                                      double tol_env = 1e-4) {
    if (ledger.rows.empty()) throw std::invalid_argument("envelope_checks: empty ledger");
    if (ledger.ell == 0) throw std::invalid_argument("envelope_checks: requires ell >= 1");
    const RateBundle rates = rates_and_times(consts, ledger.nu, ledger.ell);
    const double log_phi0 = std::log(ledger.rows.front().phi);
    const double log_w0 = std::log(ledger.rows.front().w);

    EnvelopeReport rep;
    rep.phi_ratio_max = -std::numeric_limits<double>::infinity();
    rep.c0_fit = -std::numeric_limits<double>::infinity();
    rep.l2_monotone = true;
    double prev_l2 = ledger.rows.front().l2_sq;
    for (const LedgerRow& row : ledger.rows) {
        if (row.phi > 0.0)
            rep.phi_ratio_max = std::max(rep.phi_ratio_max,
                                         std::log(row.phi) + rates.lambda_thm * row.t - log_phi0);
        if (row.w > 0.0)
            rep.c0_fit = std::max(rep.c0_fit, std::log(row.w) + rates.lambda_w * row.t - log_w0);
        if (row.l2_sq > prev_l2 * (1.0 + 1e-12)) rep.l2_monotone = false;
        prev_l2 = row.l2_sq;
    }
    rep.phi_ratio_max = std::exp(rep.phi_ratio_max);
    rep.c0_fit = std::exp(rep.c0_fit);
    rep.phi_ok = rep.phi_ratio_max <= 1.0 + tol_env;
    return rep;
}

/// One (p, nu, k) sweep request.
struct SweepPoint {
    double p = 1.0;
    double nu = 1e-3;
    unsigned k = 1;
};

/// Shared numerical defaults for sweep trajectories.
struct SimDefaults {
    double r_max = 8.0;
    std::size_t n_cells = 1024;
    double width = 1.0;
    ProfileKind profile = ProfileKind::gaussian_monomial;
    std::uint64_t seed = 0;
    double dt_override = 0.0;      // 0 = use the default_dt rule
    double t_max_override = 0.0;   // 0 = 5 * t_enh_ln capped at 2/nu
    double stop_below_x_frac = 1e-4;
    double envelope_tol = 1e-4;
    // Rate-fit window as fractions of the initial x_sq. With
    // fit_window_times_nu set, both fractions scale with the row's nu: for
    // p > 1 the weighted norm decays algebraically until the surviving mass
    // reaches the diffusive core near x/x0 ~ nu, and the exponential regime
    // the sharp-rate claim concerns lies below that crossover.
    double fit_frac_hi = 0.5;
    double fit_frac_lo = 1e-3;
    bool fit_window_times_nu = false;
    bool stop_frac_times_nu = false; // scale the early-stop fraction by nu too
    std::size_t target_rows = 2000;
    std::size_t jobs = 0; // 0 = hardware concurrency
};

struct SweepRow {
    double p = 0.0;
    double nu = 0.0;
    unsigned k = 0;
    double lambda_fit = std::numeric_limits<double>::quiet_NaN();
    double tau_mix = std::numeric_limits<double>::quiet_NaN();
    double lambda_thm = 0.0;
    double lambda_w = 0.0;
    double t_enh_ln = 0.0;
    bool envelope_phi_ok = false;
    double phi_ratio = std::numeric_limits<double>::quiet_NaN();
    double c0_fit = std::numeric_limits<double>::quiet_NaN();
    double fit_stderr = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::size_t duplicate_points = 0;
};

/// Builds the per-point flow configuration from the shared defaults.
inline FlowConfig sweep_config(const SweepPoint& pt, const SimDefaults& defs, const GridPtr& grid,
                               const RadialField& initial, const HypoConstants& consts) {
    FlowConfig config;
    config.p = pt.p;
    config.nu = pt.nu;
    config.ell = pt.k;
    const RateBundle rates = rates_and_times(consts, pt.nu, pt.k);
    config.t_max = defs.t_max_override > 0.0 ? defs.t_max_override
                                             : std::min(5.0 * rates.t_enh_ln, 2.0 / pt.nu);
    config.dt = defs.dt_override > 0.0 ? defs.dt_override : default_dt(config, *grid, initial);
    const double steps = std::max(1.0, config.t_max / config.dt);
    config.record_every =
        std::max<std::size_t>(1, static_cast<std::size_t>(steps / static_cast<double>(defs.target_rows)));
    return config;
}

/// Runs one sweep point end to end and reduces the trajectory to a row.
inline SweepRow run_sweep_point(const SweepPoint& pt, const SimDefaults& defs) {
    SweepRow row;
    row.p = pt.p;
    row.nu = pt.nu;
    row.k = pt.k;
    try {
        if (!(pt.nu > 0.0 && pt.nu <= 1.0) || pt.k == 0 ||
            pt.nu / static_cast<double>(pt.k) > 1.0)
            throw std::invalid_argument("sweep point violates nu/k <= 1, nu in (0,1], k >= 1");
        const HypoConstants consts = compute_constants(pt.p);
        const RateBundle rates = rates_and_times(consts, pt.nu, pt.k);
        row.lambda_thm = rates.lambda_thm;
        row.lambda_w = rates.lambda_w;
        row.t_enh_ln = rates.t_enh_ln;

        const GridPtr grid = build_grid(defs.r_max, defs.n_cells);
        const RadialField initial = initial_profile(defs.profile, pt.k, grid, defs.width, defs.seed);
        FlowConfig config = sweep_config(pt, defs, grid, initial, consts);
        EvolveOptions opts;
        opts.stop_below_x_frac = defs.stop_below_x_frac * (defs.stop_frac_times_nu ? pt.nu : 1.0);
        EvolveOutcome outcome = evolve(ModeState{initial, 0.0, config},
                                       build_stepper(config, grid), consts, opts);
        if (!outcome.failed && outcome.ledger.rows.size() >= 2) {
            // When the early stop fires long before the rate-rule horizon, the
            // ledger stride sized for t_max undersamples the actual decay;
            // re-record once with the stride matched to the observed stop time.
            const double t_stop = outcome.ledger.rows.back().t;
            if (t_stop < 0.5 * config.t_max && opts.stop_below_x_frac > 0.0) {
                const std::size_t stride = std::max<std::size_t>(
                    1, static_cast<std::size_t>(1.25 * t_stop / config.dt /
                                                static_cast<double>(defs.target_rows)));
                if (stride < config.record_every) {
                    config.record_every = stride;
                    outcome = evolve(ModeState{initial, 0.0, config}, build_stepper(config, grid),
                                     consts, opts);
                }
            }
        }
        if (outcome.failed) {
            row.status = "failed: " + outcome.error;
            return row;
        }
        const EnvelopeReport env = envelope_checks(outcome.ledger, consts, defs.envelope_tol);
        row.envelope_phi_ok = env.phi_ok;
        row.phi_ratio = env.phi_ratio_max;
        row.c0_fit = env.c0_fit;
        const double tau = mixing_time(outcome.ledger);
        if (tau >= 0.0) row.tau_mix = tau;
        // A horizon too short for the fit window leaves lambda_fit absent
        // rather than failing the row; the envelope checks above still stand.
        try {
            const double scale = defs.fit_window_times_nu ? pt.nu : 1.0;
            const FitResult fit =
                fit_rate(outcome.ledger, defs.fit_frac_hi * scale, defs.fit_frac_lo * scale);
            row.lambda_fit = fit.rate;
            row.fit_stderr = fit.stderr_rate;
        } catch (const std::exception&) {
        }
    } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
    }
    return row;
}

inline const std::vector<std::string>& sweep_columns() {
    static const std::vector<std::string> cols = {"p",        "nu",       "k",        "lambda_fit",
                                                  "tau_mix",  "lambda_thm", "lambda_w", "t_nu_k_ln",
                                                  "envelope_phi_ok", "c0_fit", "status"};
    return cols;
}

inline std::string sweep_to_csv(const SweepResult& result) {
    CsvWriter csv(sweep_columns());
    for (const SweepRow& row : result.rows) {
        csv.row({format_double(row.p), format_double(row.nu), std::to_string(row.k),
                 format_double(row.lambda_fit), format_double(row.tau_mix), format_double(row.lambda_thm),
                 format_double(row.lambda_w), format_double(row.t_enh_ln),
                 row.envelope_phi_ok ? "1" : "0", format_double(row.c0_fit), row.status});
    }
    return csv.str();
}

/// Plan file: one "p nu k" triple per line, '#' comments, blank lines ignored.
inline std::vector<SweepPoint> read_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_plan: cannot open " + path.string());
    std::vector<SweepPoint> plan;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ss(line);
        SweepPoint pt;
        long k = 0;
        if (!(ss >> pt.p)) continue; // blank or comment-only line
        if (!(ss >> pt.nu >> k) || k < 1)
            throw std::runtime_error("read_plan: bad plan line " + std::to_string(line_no));
        pt.k = static_cast<unsigned>(k);
        plan.push_back(pt);
    }
    return plan;
}

/// Executes a sweep plan over a small worker pool. Output rows are sorted by
/// (p, nu, k) and independent of execution interleaving; each trajectory is
/// single-threaded, so fixed seeds give bit-identical results.
inline SweepResult run_sweep(std::vector<SweepPoint> plan, const SimDefaults& defs) {
    if (plan.empty()) throw std::invalid_argument("run_sweep: empty plan");
    std::sort(plan.begin(), plan.end(), [](const SweepPoint& a, const SweepPoint& b) {
        if (a.p != b.p) return a.p < b.p;
        if (a.nu != b.nu) return a.nu < b.nu;
        return a.k < b.k;
    });
    SweepResult result;
    for (std::size_t i = 1; i < plan.size(); ++i)
        if (plan[i].p == plan[i - 1].p && plan[i].nu == plan[i - 1].nu && plan[i].k == plan[i - 1].k)
            ++result.duplicate_points;

    result.rows.resize(plan.size());
    std::atomic<std::size_t> next{0};
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t jobs = std::min(plan.size(), defs.jobs > 0 ? defs.jobs : hw);
    const auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= plan.size()) return;
            result.rows[i] = run_sweep_point(plan[i], defs);
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    return result;
}

} // namespace radmix
