#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "radmix/constants.hpp"
#include "radmix/csv.hpp"
#include "radmix/field2d.hpp"
#include "radmix/ledger.hpp"
#include "radmix/lemmas.hpp"
#include "radmix/solver.hpp"
#include "radmix/sweep.hpp"

namespace radmix::cli {

// Exit codes: 0 success, 2 usage/config error, 3 check failure, 4 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitCheckFailed = 3;
inline constexpr int kExitNumerical = 4;

namespace detail {

/// Expands "--config FILE" into injected "--key value ..." tokens. The file
/// is flat "key = value" text, one key per line, '#' comments; keys already
/// present on the command line are left alone, so flags override the file.
inline std::vector<std::string> expand_config_args(int argc, const char* const* argv) {
    std::vector<std::string> args(argv, argv + argc);
    std::string config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;

    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("cannot open config file " + config_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            " is not 'key = value'");
            continue;
        }
        const auto trim = [](std::string s) {
            const std::size_t a = s.find_first_not_of(" \t\r");
            const std::size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) + " has no key");
        const std::string flag = "--" + key;
        bool already_given = false;
        for (std::size_t i = 1; i < args.size(); ++i)
            if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) already_given = true;
        if (already_given || value.empty()) continue;
        args.push_back(flag);
        std::istringstream parts(value); // multi-value keys feed vector options
        std::string part;
        while (parts >> part) args.push_back(part);
    }
    return args;
}

/// Grid/profile options shared by every trajectory-running subcommand.
struct CommonOptions {
    double p = 1.0;
    double nu = 1e-3;
    unsigned ell = 1;
    double r_max = 8.0;
    std::size_t cells = 1024;
    double dt = 0.0; // 0 = default rule
    double t_max = 0.0;
    double width = 1.0;
    std::string profile = "monomial";
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string config_file;

    ProfileKind profile_kind() const {
        if (profile == "monomial") return ProfileKind::gaussian_monomial;
        if (profile == "polynomial") return ProfileKind::gaussian_polynomial;
        throw CLI::ValidationError("--profile must be monomial or polynomial");
    }
};

inline void add_common(CLI::App* cmd, CommonOptions& opt, bool with_mode = true) {
    cmd->add_option("--config", opt.config_file, "flat key = value config file; flags override");
    cmd->add_option("--p", opt.p, "flow exponent p >= 1")->capture_default_str();
    if (with_mode) {
        cmd->add_option("--nu", opt.nu, "diffusivity in [0,1]")->capture_default_str();
        cmd->add_option("--ell", opt.ell, "angular wavenumber")->capture_default_str();
    }
    cmd->add_option("--rmax", opt.r_max, "domain truncation radius")->capture_default_str();
    cmd->add_option("--cells", opt.cells, "radial cell count")->capture_default_str();
    cmd->add_option("--dt", opt.dt, "time step (0 = accuracy rule)")->capture_default_str();
    cmd->add_option("--tmax", opt.t_max, "time horizon (0 = rate-based rule)")->capture_default_str();
    cmd->add_option("--width", opt.width, "initial profile width")->capture_default_str();
    cmd->add_option("--profile", opt.profile, "initial profile: monomial|polynomial")
        ->capture_default_str();
    cmd->add_option("--seed", opt.seed, "profile seed")->capture_default_str();
    cmd->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
}

inline std::string bool_word(bool ok) { return ok ? "pass" : "FAIL"; }

} // namespace detail

/// `constants`: print the constant ledger, constraint margins, and (when nu
/// is given) the scaled coefficients and rate bundle for one band.
inline int run_constants(double p, double nu, unsigned k) {
    const HypoConstants c = compute_constants(p);
    std::cout << "p = " << format_double(c.p) << '\n'
              << "c1 = " << format_double(c.c1) << '\n'
              << "c2 = " << format_double(c.c2) << '\n'
              << "c3 = " << format_double(c.c3) << '\n'
              << "c_p = " << format_double(c.c_p) << '\n'
              << "delta = " << format_double(c.delta) << '\n'
              << "alpha0 = " << format_double(c.alpha0) << '\n'
              << "beta0 = " << format_double(c.beta0) << '\n'
              << "gamma0 = " << format_double(c.gamma0) << '\n'
              << "eps0 = " << format_double(c.eps0) << '\n'
              << "C_p = " << format_double(c.big_cp) << '\n';
    std::size_t passed = 0;
    const auto suite = constraint_suite(c);
    for (const ConstraintCheck& chk : suite) {
        const bool ok = chk.holds();
        passed += ok;
        std::cout << "constraint [" << chk.name << "] margin = " << format_double(chk.relative_margin())
                  << " " << detail::bool_word(ok) << '\n';
    }
    std::cout << "constraints: " << passed << "/" << suite.size() << " pass\n";
    if (nu > 0.0) {
        const AbcCoefficients abc = coefficients_abc(c, nu, k);
        const RateBundle rates = rates_and_times(c, nu, k);
        std::cout << "alpha = " << format_double(abc.alpha) << '\n'
                  << "beta = " << format_double(abc.beta) << '\n'
                  << "gamma = " << format_double(abc.gamma) << '\n'
                  << "lambda_nu = " << format_double(rates.lambda_nu) << '\n'
                  << "lambda_thm = " << format_double(rates.lambda_thm) << '\n'
                  << "lambda_w = " << format_double(rates.lambda_w) << '\n'
                  << "t_enh = " << format_double(rates.t_enh) << '\n'
                  << "t_enh_ln = " << format_double(rates.t_enh_ln) << '\n';
    }
    if (passed != suite.size()) {
        std::cerr << "error: check: " << (suite.size() - passed) << " constraint(s) violated\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

/// `simulate`: one mode trajectory, full diagnostics to <out>/ledger.csv.
inline int run_simulate(const detail::CommonOptions& opt, std::size_t record_every) {
    const GridPtr grid = build_grid(opt.r_max, opt.cells);
    const HypoConstants consts = compute_constants(opt.p);
    const RadialField initial =
        initial_profile(opt.profile_kind(), opt.ell, grid, opt.width, opt.seed);

    FlowConfig config;
    config.p = opt.p;
    config.nu = opt.nu;
    config.ell = opt.ell;
    config.dt = opt.dt > 0.0 ? opt.dt : default_dt(config, *grid, initial);
    if (opt.t_max > 0.0) {
        config.t_max = opt.t_max;
    } else if (opt.nu > 0.0 && opt.ell >= 1) {
        const RateBundle rates = rates_and_times(consts, opt.nu, opt.ell);
        config.t_max = std::min(5.0 * rates.t_enh_ln, 2.0 / opt.nu);
    } else {
        config.t_max = 1.0;
    }
    config.record_every = record_every > 0
                              ? record_every
                              : std::max<std::size_t>(1, static_cast<std::size_t>(
                                                             config.t_max / config.dt / 2000.0));
    config.validate();

    const Stepper stepper(config, grid);
    ModeState state{initial, 0.0, config};
    const EvolveOutcome outcome = evolve(state, stepper, consts);
    const std::filesystem::path path = std::filesystem::path(opt.out_dir) / "ledger.csv";
    atomic_write(path, ledger_to_csv(outcome.ledger));
    std::cout << "wrote " << path.string() << " (" << outcome.ledger.rows.size() << " rows, dt = "
              << format_double(config.dt) << ", t_max = " << format_double(config.t_max) << ")\n";
    std::cout << "final x_sq/x_sq(0) = "
              << format_double(outcome.ledger.rows.back().x_sq / outcome.ledger.rows.front().x_sq)
              << ", boundary leak = " << format_double(outcome.max_leak) << '\n';
    if (outcome.failed) {
        std::cerr << "error: numeric: " << outcome.error << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

/// `sweep`: run a (p, nu, k) plan and write <out>/sweep.csv.
inline int run_sweep_cmd(const std::string& plan_path, const detail::CommonOptions& opt,
                         std::size_t jobs, double fit_hi, double fit_lo, bool fit_times_nu) {
    const std::vector<SweepPoint> plan = read_plan(plan_path);
    SimDefaults defs;
    defs.r_max = opt.r_max;
    defs.n_cells = opt.cells;
    defs.width = opt.width;
    defs.profile = opt.profile_kind();
    defs.seed = opt.seed;
    defs.dt_override = opt.dt;
    defs.t_max_override = opt.t_max;
    defs.jobs = jobs;
    defs.fit_frac_hi = fit_hi;
    defs.fit_frac_lo = fit_lo;
    defs.fit_window_times_nu = fit_times_nu;
    if (fit_times_nu) {
        defs.stop_frac_times_nu = true;
        defs.stop_below_x_frac = std::min(defs.stop_below_x_frac, 0.1 * fit_lo);
    }
    const SweepResult result = run_sweep(plan, defs);
    const std::filesystem::path path = std::filesystem::path(opt.out_dir) / "sweep.csv";
    atomic_write(path, sweep_to_csv(result));
    std::size_t failures = 0;
    for (const SweepRow& row : result.rows) failures += row.status != "ok";
    std::cout << "wrote " << path.string() << " (" << result.rows.size() << " rows, " << failures
              << " failed, " << result.duplicate_points << " duplicate points)\n";
    if (failures > 0) {
        std::cerr << "error: numeric: " << failures << " trajectories failed\n";
        return kExitNumerical;
    }
    return kExitOk;
}

/// `verify-lemmas`: exhaustive inequality grid, report CSV plus one summary
/// line per lemma: lemma,total,passed,min_relative_margin.
inline int run_verify_lemmas(const detail::CommonOptions& opt, LemmaGridOptions grid_opts) {
    const GridPtr grid = build_grid(opt.r_max, opt.cells);
    grid_opts.seed = opt.seed;
    const std::vector<InequalityReport> reports = run_lemma_grid(grid, grid_opts);

    CsvWriter csv({"lemma", "p", "ell", "sigma", "lhs", "rhs", "margin", "pass"});
    for (const InequalityReport& rep : reports)
        csv.row({rep.lemma, format_double(rep.p), std::to_string(rep.ell), format_double(rep.sigma),
                 format_double(rep.lhs), format_double(rep.rhs), format_double(rep.margin),
                 rep.pass && rep.chain_ok ? "1" : "0"});
    const std::filesystem::path path = std::filesystem::path(opt.out_dir) / "lemma_report.csv";
    csv.save(path);

    bool all_pass = true;
    for (const LemmaSummary& s : summarize_lemma_reports(reports)) {
        std::cout << s.lemma << "," << s.total << "," << s.passed << ","
                  << format_double(s.min_relative_margin) << '\n';
        all_pass = all_pass && s.passed == s.total;
    }
    std::cout << "wrote " << path.string() << '\n';
    if (!all_pass) {
        std::cerr << "error: check: lemma inequality violated beyond tolerance\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

/// `verify-balances`: residuals at the requested resolution and at one joint
/// (dt, h) refinement; checks size and decay of every residual.
inline int run_verify_balances(const detail::CommonOptions& opt, std::size_t record_every,
                               double max_residual, double min_ratio) {
    BalanceCase bc;
    bc.p = opt.p;
    bc.nu = opt.nu;
    bc.ell = opt.ell;
    bc.r_max = opt.r_max;
    bc.n_cells = opt.cells;
    bc.dt = opt.dt > 0.0 ? opt.dt : 2e-3;
    bc.t_max = opt.t_max > 0.0 ? opt.t_max : 1.0;
    bc.record_every = record_every;
    bc.width = opt.width;
    bc.profile = opt.profile_kind();
    bc.seed = opt.seed;

    const BalanceReport coarse = run_balance_case(bc);
    const BalanceReport fine = run_balance_case(bc.refined());
    const char* names[4] = {"l2", "grad", "cross", "wtheta"};
    const double c[4] = {coarse.l2_balance, coarse.grad_balance, coarse.cross_balance,
                         coarse.wtheta_balance};
    const double f[4] = {fine.l2_balance, fine.grad_balance, fine.cross_balance, fine.wtheta_balance};

    CsvWriter csv({"balance", "residual_baseline", "residual_refined", "ratio", "pass"});
    bool all_pass = true;
    for (int i = 0; i < 4; ++i) {
        // A balance whose sides both vanish (e.g. cross at ell = 0) is exact;
        // the ratio requirement only applies to genuinely nonzero residuals.
        const double ratio = f[i] > 0.0 ? c[i] / f[i] : std::numeric_limits<double>::infinity();
        const bool ok = c[i] <= max_residual && (c[i] <= 1e-10 || ratio >= min_ratio);
        all_pass = all_pass && ok;
        csv.row({names[i], format_double(c[i]), format_double(f[i]), format_double(ratio),
                 ok ? "1" : "0"});
        std::cout << names[i] << " balance: baseline = " << format_double(c[i])
                  << ", refined = " << format_double(f[i]) << ", ratio = " << format_double(ratio)
                  << " " << detail::bool_word(ok) << '\n';
    }
    const std::filesystem::path path = std::filesystem::path(opt.out_dir) / "balance_report.csv";
    csv.save(path);
    std::cout << "wrote " << path.string() << '\n';
    if (!all_pass) {
        std::cerr << "error: check: balance residual out of tolerance\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

/// `snapshot`: evolve a set of modes and write per-frame 2D field matrices.
inline int run_snapshot(const detail::CommonOptions& opt, const std::vector<unsigned>& ells,
                        std::size_t frames, std::size_t n_theta) {
    if (ells.empty()) throw CLI::ValidationError("--ells must name at least one mode");
    std::set<unsigned> unique_ells(ells.begin(), ells.end());
    if (unique_ells.size() != ells.size()) throw CLI::ValidationError("--ells has duplicates");

    const GridPtr grid = build_grid(opt.r_max, opt.cells);
    const double t_max = opt.t_max > 0.0 ? opt.t_max : 1.0;
    const double dt = opt.dt > 0.0 ? opt.dt : 1e-2;

    struct Mode {
        unsigned ell;
        Stepper stepper;
        RadialField field;
    };
    std::vector<Mode> modes;
    for (unsigned ell : ells) {
        FlowConfig config;
        config.p = opt.p;
        config.nu = opt.nu;
        config.ell = ell;
        config.dt = dt;
        config.t_max = t_max;
        config.validate();
        modes.push_back({ell, Stepper(config, grid),
                         initial_profile(opt.profile_kind(), ell, grid, opt.width,
                                         opt.seed + ell)});
    }

    const std::size_t total_steps = std::max<std::size_t>(1, std::llround(t_max / dt));
    const std::size_t per_frame = std::max<std::size_t>(1, total_steps / std::max<std::size_t>(1, frames));
    std::vector<Complex> scratch(grid->n_cells());
    std::size_t frame = 0;
    const auto emit = [&](double t) {
        std::vector<std::pair<unsigned, RadialField>> snapshot;
        for (const Mode& m : modes) snapshot.emplace_back(m.ell, m.field);
        std::ostringstream name;
        name << "snapshot_" << std::setw(4) << std::setfill('0') << frame << ".txt";
        write_frame(std::filesystem::path(opt.out_dir) / name.str(), assemble_field2d(snapshot, n_theta), t);
        ++frame;
    };
    emit(0.0);
    for (std::size_t step_i = 1; step_i <= total_steps; ++step_i) {
        for (Mode& m : modes) m.stepper.advance(m.field.values, scratch);
        if (step_i % per_frame == 0 || step_i == total_steps) {
            for (Mode& m : modes)
                if (!m.field.is_finite())
                    throw std::runtime_error("snapshot: non-finite mode " + std::to_string(m.ell));
            emit(static_cast<double>(step_i) * dt);
        }
    }
    std::cout << "wrote " << frame << " frames to " << opt.out_dir << '\n';
    return kExitOk;
}

/// Full argv-level entry point; maps every outcome onto the exit-code table.
inline int dispatch(int argc, const char* const* argv) {
    CLI::App app{"radial shear-diffusion mode laboratory"};
    app.require_subcommand(1);

    detail::CommonOptions con_opt, sim_opt, sweep_opt, lem_opt, bal_opt, snap_opt;

    // constants
    CLI::App* constants_cmd = app.add_subcommand("constants", "constant ledger and constraint margins");
    double con_nu = 0.0;
    unsigned con_k = 1;
    constants_cmd->add_option("--config", con_opt.config_file,
                              "flat key = value config file; flags override");
    constants_cmd->add_option("--p", con_opt.p, "flow exponent")->required();
    constants_cmd->add_option("--nu", con_nu, "also print coefficients/rates for this nu");
    constants_cmd->add_option("--k", con_k, "band for coefficients/rates")->capture_default_str();

    // simulate
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "run one mode trajectory");
    std::size_t sim_record = 0;
    detail::add_common(simulate_cmd, sim_opt);
    simulate_cmd->add_option("--record-every", sim_record, "ledger stride in steps (0 = auto)");

    // sweep
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a (p, nu, k) plan");
    std::string plan_path;
    std::size_t jobs = 0;
    double sweep_fit_hi = 0.5, sweep_fit_lo = 1e-3;
    bool sweep_fit_nu = false;
    detail::add_common(sweep_cmd, sweep_opt, /*with_mode=*/false);
    sweep_cmd->add_option("--plan", plan_path, "plan file: one 'p nu k' per line")->required();
    sweep_cmd->add_option("--jobs", jobs, "worker threads (0 = hardware)");
    sweep_cmd->add_option("--fit-hi", sweep_fit_hi, "rate-fit window top, fraction of x_sq(0)")
        ->capture_default_str();
    sweep_cmd->add_option("--fit-lo", sweep_fit_lo, "rate-fit window bottom")->capture_default_str();
    sweep_cmd->add_flag("--fit-window-times-nu", sweep_fit_nu,
                        "scale the fit window (and early stop) by each row's nu");

    // verify-lemmas
    CLI::App* lemmas_cmd = app.add_subcommand("verify-lemmas", "weighted inequality property suite");
    LemmaGridOptions lem_grid;
    lemmas_cmd->add_option("--p", lem_grid.p_values, "exponent grid")->capture_default_str();
    lemmas_cmd->add_option("--ells", lem_grid.ell_values, "wavenumber grid")->capture_default_str();
    lemmas_cmd->add_option("--samples", lem_grid.samples, "profiles per (p, ell)")->capture_default_str();
    lemmas_cmd->add_option("--sigma-count", lem_grid.sigma_count, "sigma grid size")->capture_default_str();
    lemmas_cmd->add_option("--sigma-lo", lem_grid.sigma_lo, "sigma lower bound")->capture_default_str();
    lemmas_cmd->add_option("--sigma-hi", lem_grid.sigma_hi, "sigma upper bound")->capture_default_str();
    lemmas_cmd->add_option("--config", lem_opt.config_file, "flat key = value config file");
    lemmas_cmd->add_option("--rmax", lem_opt.r_max, "domain radius")->capture_default_str();
    lemmas_cmd->add_option("--cells", lem_opt.cells, "radial cells")->capture_default_str();
    lemmas_cmd->add_option("--seed", lem_opt.seed, "sample seed")->capture_default_str();
    lemmas_cmd->add_option("--out", lem_opt.out_dir, "output directory")->capture_default_str();

    // verify-balances
    CLI::App* balances_cmd = app.add_subcommand("verify-balances", "energy balance residual suite");
    std::size_t bal_record = 5;
    double bal_max_residual = 1e-2;
    double bal_min_ratio = 3.0;
    bal_opt.nu = 1e-2;
    bal_opt.cells = 256;
    bal_opt.dt = 2e-3;
    bal_opt.t_max = 1.0;
    detail::add_common(balances_cmd, bal_opt);
    balances_cmd->add_option("--record-every", bal_record, "ledger stride in steps")->capture_default_str();
    balances_cmd->add_option("--max-residual", bal_max_residual, "baseline residual bound")
        ->capture_default_str();
    balances_cmd->add_option("--min-ratio", bal_min_ratio, "required decay under refinement")
        ->capture_default_str();

    // snapshot
    CLI::App* snapshot_cmd = app.add_subcommand("snapshot", "2D field frames for a mode set");
    std::vector<unsigned> snap_ells = {0, 1};
    std::size_t snap_frames = 8;
    std::size_t snap_ntheta = 256;
    detail::add_common(snapshot_cmd, snap_opt);
    snapshot_cmd->add_option("--ells", snap_ells, "modes to evolve")->capture_default_str();
    snapshot_cmd->add_option("--frames", snap_frames, "frame count")->capture_default_str();
    snapshot_cmd->add_option("--ntheta", snap_ntheta, "angular samples per frame")->capture_default_str();

    try {
        std::vector<std::string> args = detail::expand_config_args(argc, argv);
        std::vector<const char*> c_args;
        c_args.reserve(args.size());
        for (const std::string& a : args) c_args.push_back(a.c_str());
        app.parse(static_cast<int>(c_args.size()), c_args.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (constants_cmd->parsed()) return run_constants(con_opt.p, con_nu, con_k);
        if (simulate_cmd->parsed()) return run_simulate(sim_opt, sim_record);
        if (sweep_cmd->parsed())
            return run_sweep_cmd(plan_path, sweep_opt, jobs, sweep_fit_hi, sweep_fit_lo, sweep_fit_nu);
        if (lemmas_cmd->parsed()) return run_verify_lemmas(lem_opt, lem_grid);
        if (balances_cmd->parsed())
            return run_verify_balances(bal_opt, bal_record, bal_max_residual, bal_min_ratio);
        if (snapshot_cmd->parsed()) return run_snapshot(snap_opt, snap_ells, snap_frames, snap_ntheta);
        std::cerr << "error: usage: no subcommand given\n";
        return kExitUsage;
    } catch (const CLI::Error& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: numeric: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace radmix::cli
