#include "doctest.h"

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <string>

#include "radmix/csv.hpp"
#include "radmix/field2d.hpp"
#include "radmix/solver.hpp"

using namespace radmix;

namespace {

namespace fs = std::filesystem;

struct CliRun {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Runs the installed CLI binary end to end, capturing streams and exit code.
CliRun run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path() / "radmix_cli_io";
    fs::create_directories(dir);
    const fs::path out = dir / ("out" + std::to_string(counter) + ".txt");
    const fs::path err = dir / ("err" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd =
        std::string(RADMIX_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    CliRun run;
    run.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    run.out = slurp(out);
    run.err = slurp(err);
    return run;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("assemble_field2d reproduces single-mode closed forms") {
    const GridPtr grid = build_grid(4.0, 32);
    const RadialField g = sample_field(grid, [](double r) { return r * std::exp(-r * r); });

    const Field2d one_mode = assemble_field2d({{1u, g}}, 16);
    for (std::size_t j = 0; j < grid->n_cells(); ++j)
        for (std::size_t m = 0; m < 16; ++m)
            CHECK(one_mode.values[j][m] ==
                  doctest::Approx(2.0 * g.values[j].real() * std::cos(one_mode.theta[m]))
                      .epsilon(1e-13));

    const Field2d axisym = assemble_field2d({{0u, g}}, 16);
    for (std::size_t j = 0; j < grid->n_cells(); ++j)
        for (std::size_t m = 0; m < 16; ++m)
            CHECK(axisym.values[j][m] == doctest::Approx(g.values[j].real()).epsilon(1e-14));
}

TEST_CASE("assemble_field2d is additive over modes and rejects bad input") {
    const GridPtr grid = build_grid(4.0, 32);
    const RadialField a = sample_field(grid, [](double r) { return std::exp(-r * r); });
    RadialField b(grid);
    for (std::size_t j = 0; j < grid->n_cells(); ++j)
        b.values[j] = Complex(0.3, -0.4) * grid->center(j) * std::exp(-grid->center(j));

    const Field2d sum = assemble_field2d({{0u, a}, {2u, b}}, 32);
    const Field2d first = assemble_field2d({{0u, a}}, 32);
    const Field2d second = assemble_field2d({{2u, b}}, 32);
    for (std::size_t j = 0; j < grid->n_cells(); ++j)
        for (std::size_t m = 0; m < 32; ++m)
            CHECK(sum.values[j][m] ==
                  doctest::Approx(first.values[j][m] + second.values[j][m]).epsilon(1e-13));

    CHECK_THROWS_AS(assemble_field2d({{1u, a}, {1u, b}}, 32), std::invalid_argument);
    CHECK_THROWS_AS(assemble_field2d({{1u, a}}, 4), std::invalid_argument);
}

TEST_CASE("frame rendering carries the time stamp, theta row, and radius column") {
    const GridPtr grid = build_grid(2.0, 8);
    const RadialField g = sample_field(grid, [](double r) { return r; });
    const Field2d field = assemble_field2d({{1u, g}}, 8);
    const std::string text = render_frame(field, 2.5);
    std::istringstream lines(text);
    std::string header;
    REQUIRE(std::getline(lines, header));
    std::istringstream head(header);
    double stamp = 0.0;
    REQUIRE(static_cast<bool>(head >> stamp));
    CHECK(stamp == 2.5);
    std::size_t n_theta = 0;
    double value;
    while (head >> value) ++n_theta;
    CHECK(n_theta == 8);
    std::size_t rows = 0;
    std::string line;
    while (std::getline(lines, line)) {
        std::istringstream row(line);
        double r0 = -1.0;
        REQUIRE(static_cast<bool>(row >> r0));
        CHECK(r0 == doctest::Approx(grid->center(rows)).epsilon(1e-15));
        ++rows;
    }
    CHECK(rows == grid->n_cells());
}

TEST_CASE("cli: usage errors exit with code 2") {
    CHECK(run_cli("no-such-command").exit_code == 2);
    CHECK(run_cli("constants").exit_code == 2);       // --p is required
    CHECK(run_cli("constants --p 0.5").exit_code == 2); // invalid exponent
    CHECK(run_cli("simulate --profile cubic --p 1").exit_code == 2);
}

TEST_CASE("cli: constants prints the ledger and passes its constraint suite") {
    const CliRun run = run_cli("constants --p 1 --nu 1e-3");
    CHECK(run.exit_code == 0);
    CHECK(run.out.find("c1 = 10") != std::string::npos);
    CHECK(run.out.find("c3 = 4") != std::string::npos);
    CHECK(run.out.find("constraints: 5/5 pass") != std::string::npos);
    CHECK(run.out.find("lambda_nu = 0.1") != std::string::npos);
}

TEST_CASE("cli: config file values are used and overridden by flags") {
    const fs::path dir = fresh_dir("radmix_cli_config");
    const fs::path cfg = dir / "run.cfg";
    atomic_write(cfg, "# config\np = 2\n");
    const CliRun from_file = run_cli("constants --config " + cfg.string());
    CHECK(from_file.exit_code == 0);
    CHECK(from_file.out.find("c1 = 64") != std::string::npos);
    const CliRun overridden = run_cli("constants --config " + cfg.string() + " --p 1");
    CHECK(overridden.exit_code == 0);
    CHECK(overridden.out.find("c1 = 10") != std::string::npos);
}

TEST_CASE("cli: simulate writes a ledger with a nonincreasing l2 column") {
    const fs::path dir = fresh_dir("radmix_cli_simulate");
    const CliRun run = run_cli("simulate --p 1 --nu 1e-2 --ell 1 --cells 128 --dt 1e-2 --tmax 2 --out " +
                               dir.string());
    REQUIRE(run.exit_code == 0);
    const CsvTable table = read_csv(dir / "ledger.csv");
    REQUIRE(table.rows.size() > 10);
    const std::size_t l2_col = table.column("l2_sq");
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        CHECK(table.number(i, l2_col) <= table.number(i - 1, l2_col));
}

TEST_CASE("cli: invalid config never leaves partial outputs") {
    const fs::path dir = fresh_dir("radmix_cli_invalid");
    const CliRun run = run_cli("simulate --p 1 --nu 5 --out " + dir.string());
    CHECK(run.exit_code == 2);
    CHECK_FALSE(fs::exists(dir / "ledger.csv"));
}

TEST_CASE("cli: verify-lemmas is deterministic and summarizes each lemma") {
    const fs::path dir_a = fresh_dir("radmix_cli_lem_a");
    const fs::path dir_b = fresh_dir("radmix_cli_lem_b");
    const std::string args = "verify-lemmas --p 2 --ells 1 --samples 5 --sigma-count 5 --cells 256 "
                             "--seed 0 --out ";
    const CliRun a = run_cli(args + dir_a.string());
    const CliRun b = run_cli(args + dir_b.string());
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(a.out.find("spectral_gap,25,25,") != std::string::npos);
    CHECK(a.out.find("weighted_hardy,25,25,") != std::string::npos);
    CHECK(slurp(dir_a / "lemma_report.csv") == slurp(dir_b / "lemma_report.csv"));
}

TEST_CASE("cli: verify-balances writes the residual report") {
    const fs::path dir = fresh_dir("radmix_cli_bal");
    const CliRun run = run_cli("verify-balances --p 1 --nu 1e-2 --ell 1 --cells 192 --dt 2e-3 "
                               "--tmax 0.5 --out " + dir.string());
    REQUIRE(run.exit_code == 0);
    const CsvTable table = read_csv(dir / "balance_report.csv");
    CHECK(table.rows.size() == 4);
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        CHECK(table.rows[i][4] == "1");
}

TEST_CASE("cli: sweep consumes a plan file and reports per-row status") {
    const fs::path dir = fresh_dir("radmix_cli_sweep");
    const fs::path plan = dir / "plan.txt";
    atomic_write(plan, "1 1e-1 1\n1 3e-2 1\n");
    const CliRun run = run_cli("sweep --plan " + plan.string() +
                               " --cells 128 --dt 1e-2 --tmax 5 --out " + dir.string());
    REQUIRE(run.exit_code == 0);
    const CsvTable table = read_csv(dir / "sweep.csv");
    REQUIRE(table.rows.size() == 2);
    CHECK(table.header.front() == "p");
    CHECK(table.rows[0][table.column("status")] == "ok");
}

TEST_CASE("cli: snapshot writes plain-text frames") {
    const fs::path dir = fresh_dir("radmix_cli_snap");
    const CliRun run = run_cli("snapshot --p 1 --nu 1e-2 --ells 0 --ells 1 --cells 64 --dt 1e-2 "
                               "--tmax 0.1 --frames 2 --ntheta 16 --out " + dir.string());
    REQUIRE(run.exit_code == 0);
    CHECK(fs::exists(dir / "snapshot_0000.txt"));
    CHECK(fs::exists(dir / "snapshot_0001.txt"));
    const std::string frame = slurp(dir / "snapshot_0000.txt");
    std::istringstream first_line(frame.substr(0, frame.find('\n')));
    double stamp = -1.0;
    first_line >> stamp;
    CHECK(stamp == 0.0);
}
