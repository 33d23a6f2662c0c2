#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "radmix/constants.hpp"
#include "radmix/grid.hpp"
#include "radmix/rng.hpp"

namespace radmix {

/// Outcome of one inequality evaluation, stated as lhs <= rhs. A violation
/// smaller than tol * rhs is attributed to quadrature and still passes; any
/// larger one fails loudly.
struct InequalityReport {
    std::string lemma;
    double p = 0.0;
    unsigned ell = 0;
    double sigma = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    bool pass = false;
    bool chain_ok = true; // spectral gap only: middle <= right link

    double relative_margin() const { return rhs > 0.0 ? margin / rhs : margin; }
};

inline constexpr double kLemmaTol = 1e-8;

/// Seeded family of admissible band profiles: r^ell (a0 + a1 r^2 + a2 r^4)
/// exp(-(r/w)^2) with a_i in [-1,1] and w in [0.5, 2], unit L2 norm each.
/// Smooth, correctly vanishing at the origin, deterministic per seed.
inline std::vector<RadialField> sample_admissible(unsigned ell, const GridPtr& grid, std::size_t count,
                                                  std::uint64_t seed) {
    if (ell == 0) throw std::invalid_argument("sample_admissible: requires ell >= 1");
    std::vector<RadialField> out;
    out.reserve(count);
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const double a0 = rng.next_in(-1.0, 1.0);
        const double a1 = rng.next_in(-1.0, 1.0);
        const double a2 = rng.next_in(-1.0, 1.0);
        const double w = rng.next_in(0.5, 2.0);
        RadialField g(grid);
        for (std::size_t j = 0; j < grid->n_cells(); ++j) {
            const double r = grid->center(j);
            const double s = r / w;
            g.values[j] = std::pow(r, static_cast<double>(ell)) *
                          (a0 + a1 * r * r + a2 * r * r * r * r) * std::exp(-s * s);
        }
        const double norm = std::sqrt(weighted_norm_sq(g, 0.0));
        if (norm > 1e-14)
            for (Complex& z : g.values) z /= norm;
        out.push_back(std::move(g));
    }
    return out;
}

/// Spectral-gap inequality for band-ell profiles:
///   sigma^{(p-1)/p} |g|^2 <= sigma |g/r|^2 + |r^{p-1} g|^2
///                         <= sigma |grad g|^2 + |r^{p-1} g|^2.
/// The report carries the tighter first link; the second link is asserted via
/// |grad g|^2 >= ell^2 |g/r|^2 and recorded in chain_ok.
inline InequalityReport check_spectral_gap(const RadialField& g, unsigned ell, double p, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("check_spectral_gap: sigma must be positive");
    if (!(p >= 1.0) || ell == 0) throw std::invalid_argument("check_spectral_gap: need p >= 1, ell >= 1");
    const double l2 = weighted_norm_sq(g, 0.0);
    const double over_r = weighted_norm_sq(g, -1.0);
    const double weighted = weighted_norm_sq(g, p - 1.0);
    const double grad = gradient_norm_sq(g, ell);

    InequalityReport rep;
    rep.lemma = "spectral_gap";
    rep.p = p;
    rep.ell = ell;
    rep.sigma = sigma;
    rep.lhs = std::pow(sigma, (p - 1.0) / p) * l2;
    rep.rhs = sigma * over_r + weighted;
    rep.margin = rep.rhs - rep.lhs;
    rep.pass = rep.margin >= -kLemmaTol * rep.rhs;
    const double right = sigma * grad + weighted;
    rep.chain_ok = right >= rep.rhs - kLemmaTol * std::max(right, rep.rhs);
    return rep;
}

/// Weighted Hardy-type inequality for band-ell profiles:
///   (1/c_p) sigma^{1/p} |r^{p-2} g|^2 <= sigma |grad g|^2 + |r^{p-1} g|^2.
/// For p in (1,2) the weight is singular at the origin but finite on the
/// samples, which vanish like r^ell there.
inline InequalityReport check_weighted_hardy(const RadialField& g, unsigned ell, double p, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("check_weighted_hardy: sigma must be positive");
    if (!(p >= 1.0) || ell == 0) throw std::invalid_argument("check_weighted_hardy: need p >= 1, ell >= 1");
    const double cp = hardy_constant(p);
    InequalityReport rep;
    rep.lemma = "weighted_hardy";
    rep.p = p;
    rep.ell = ell;
    rep.sigma = sigma;
    rep.lhs = std::pow(sigma, 1.0 / p) * weighted_norm_sq(g, p - 2.0) / cp;
    rep.rhs = sigma * gradient_norm_sq(g, ell) + weighted_norm_sq(g, p - 1.0);
    rep.margin = rep.rhs - rep.lhs;
    rep.pass = rep.margin >= -kLemmaTol * rep.rhs;
    return rep;
}

/// Log-spaced sigma sweep grid.
inline std::vector<double> sigma_grid(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const double step = std::log(hi / lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = lo * std::exp(step * static_cast<double>(i));
    return out;
}

struct LemmaGridOptions {
    std::vector<double> p_values = {1.0, 1.25, 1.5, 2.0, 3.0};
    std::vector<unsigned> ell_values = {1, 2, 5};
    std::size_t samples = 100;
    std::size_t sigma_count = 25;
    double sigma_lo = 1e-6;
    double sigma_hi = 1e2;
    std::uint64_t seed = 0;
};

struct LemmaSummary {
    std::string lemma;
    std::size_t total = 0;
    std::size_t passed = 0;
    double min_relative_margin = 0.0;
};

/// Runs both lemmas over the full (p, ell, sample, sigma) grid. Reports come
/// out in deterministic loop order regardless of the caller's threading.
inline std::vector<InequalityReport> run_lemma_grid(const GridPtr& grid, const LemmaGridOptions& opts) {
    const std::vector<double> sigmas = sigma_grid(opts.sigma_lo, opts.sigma_hi, opts.sigma_count);
    std::vector<InequalityReport> reports;
    reports.reserve(2 * opts.p_values.size() * opts.ell_values.size() * opts.samples * sigmas.size());
    for (double p : opts.p_values) {
        for (unsigned ell : opts.ell_values) {
            // One sample family per (p, ell) cell, offset so cells differ.
            const std::uint64_t cell_seed =
                opts.seed + 1000003ULL * static_cast<std::uint64_t>(ell) +
                static_cast<std::uint64_t>(std::llround(p * 1000.0));
            const std::vector<RadialField> samples = sample_admissible(ell, grid, opts.samples, cell_seed);
            for (const RadialField& g : samples) {
                for (double sigma : sigmas) {
                    reports.push_back(check_spectral_gap(g, ell, p, sigma));
                    reports.push_back(check_weighted_hardy(g, ell, p, sigma));
                }
            }
        }
    }
    return reports;
}

inline std::vector<LemmaSummary> summarize_lemma_reports(const std::vector<InequalityReport>& reports) {
    LemmaSummary gap{"spectral_gap", 0, 0, std::numeric_limits<double>::infinity()};
    LemmaSummary hardy{"weighted_hardy", 0, 0, std::numeric_limits<double>::infinity()};
    for (const InequalityReport& r : reports) {
        LemmaSummary& s = (r.lemma == "spectral_gap") ? gap : hardy;
        s.total += 1;
        if (r.pass && r.chain_ok) s.passed += 1;
        s.min_relative_margin = std::min(s.min_relative_margin, r.relative_margin());
    }
    return {gap, hardy};
}

} // namespace radmix
