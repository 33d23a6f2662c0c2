#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace radmix {

/// Explicit constant ledger behind the hypocoercivity functional: the chain
/// c_p -> c1, c2, c3 -> delta -> (alpha0, beta0, gamma0) -> eps0 that fixes
/// the functional coefficients and the guaranteed decay rate for a given flow
/// exponent p.
struct HypoConstants {
    double p = 1.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    double c_p = 0.0;
    double delta = 0.0;
    double alpha0 = 0.0;
    double beta0 = 0.0;
    double gamma0 = 0.0;
    double eps0 = 0.0;
    double big_cp = 0.0; // Gronwall constant 4(p-1)^2
};

/// Weighted-Hardy constant: 1 at p = 1, 2 for p >= 2, and in between the
/// larger of 2 and the constant the interpolation proof actually produces,
/// so both the stated lower bound and the proof's bound hold at once.
inline double hardy_constant(double p) {
    if (p < 1.0) throw std::invalid_argument("hardy_constant: p must be >= 1");
    if (p == 1.0) return 1.0;
    if (p >= 2.0) return 2.0;
    return std::max(2.0, 1.0 / (p * std::pow(p - 1.0, 1.0 / p)));
}

inline HypoConstants compute_constants(double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("compute_constants: p must be >= 1");
    HypoConstants c;
    c.p = p;
    c.c_p = hardy_constant(p);
    c.c1 = 4.0 * p * p * (2.0 + p * p / 2.0);
    // 1/c2 = (1/c_p) p^{2(p-1)/p} 2^{-(2+1/p)}
    c.c2 = c.c_p * std::pow(p, -2.0 * (p - 1.0) / p) * std::pow(2.0, 2.0 + 1.0 / p);
    c.c3 = std::pow(2.0, (3.0 * p - 1.0) / p) * std::pow(p, -2.0 / p);
    // First delta branch is 1/0 at p = 1; the weighted-norm machinery it
    // guards is absent there, so it drops out of the min.
    const double branch = (p > 1.0) ? 1.0 / (2.0 * c.c2 * (p - 1.0) * (p - 1.0))
                                    : std::numeric_limits<double>::infinity();
    c.delta = std::min(branch, c.c3 / 3.0);
    const double d2 = c.delta * c.delta / (4.0 * c.c1 * c.c1);
    const double d3 = c.c3 * c.delta / (3.0 * c.c1);
    c.beta0 = std::pow(std::min(d2, d3), p / (p + 2.0));
    c.alpha0 = (c.c1 / c.delta) * std::pow(c.beta0, (p + 1.0) / p);
    c.gamma0 = c.delta * std::pow(c.beta0, (p - 1.0) / p);
    c.eps0 = std::pow(c.beta0, 1.0 / p) / (2.0 * c.c3);
    c.big_cp = 4.0 * (p - 1.0) * (p - 1.0);
    return c;
}

/// One scaled coefficient constraint, stated as lhs <= rhs. Two of the five
/// bind with equality by construction, so passing allows a relative slack.
struct ConstraintCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;

    double relative_margin() const {
        const double scale = std::max(std::abs(rhs), std::abs(lhs));
        return scale > 0.0 ? (rhs - lhs) / scale : 0.0;
    }
    bool holds(double rel_slack = 1e-12) const { return relative_margin() >= -rel_slack; }
};

/// The five nu- and k-free constraints the coefficient choice must satisfy.
/// The beta^2/(alpha gamma) bound is checked against 1/c1, which is stronger
/// than (and therefore subsumes) the bare 1/(4p^2) requirement.
inline std::array<ConstraintCheck, 5> constraint_suite(const HypoConstants& c) {
    const double p = c.p;
    std::array<ConstraintCheck, 5> out;
    out[0] = {"alpha0^2/beta0 <= 1/4", c.alpha0 * c.alpha0 / c.beta0, 0.25};
    out[1] = {"beta0^2/(alpha0*gamma0) <= 1/c1", c.beta0 * c.beta0 / (c.alpha0 * c.gamma0), 1.0 / c.c1};
    if (p > 1.0)
        out[2] = {"2*gamma0*(p-1)^2 <= beta0^{(p-1)/p}/c2",
                  2.0 * c.gamma0 * (p - 1.0) * (p - 1.0), std::pow(c.beta0, (p - 1.0) / p) / c.c2};
    else
        out[2] = {"2*gamma0*(p-1)^2 <= beta0^{(p-1)/p}/c2", 0.0, 1.0 / c.c2};
    out[3] = {"3 <= c3/(alpha0*beta0^{1/p})", 3.0, c.c3 / (c.alpha0 * std::pow(c.beta0, 1.0 / p))};
    out[4] = {"3 <= c3*beta0^{(p-1)/p}/gamma0", 3.0, c.c3 * std::pow(c.beta0, (p - 1.0) / p) / c.gamma0};
    return out;
}

inline bool constraints_hold(const HypoConstants& c, double rel_slack = 1e-12) {
    for (const ConstraintCheck& chk : constraint_suite(c))
        if (!chk.holds(rel_slack)) return false;
    return true;
}

/// Functional coefficients (alpha, beta, gamma) for diffusivity nu and band k:
/// the nu,k-scalings that make all three constraints uniform in nu and k.
struct AbcCoefficients {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

inline AbcCoefficients coefficients_abc(const HypoConstants& c, double nu, unsigned k) {
    if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("coefficients_abc: nu must be in (0,1]");
    if (k == 0) throw std::invalid_argument("coefficients_abc: band k must be >= 1");
    const double p = c.p;
    const double kd = static_cast<double>(k);
    AbcCoefficients abc;
    abc.alpha = c.alpha0 * std::pow(nu, 2.0 / (p + 2.0)) * std::pow(kd, -2.0 / (p + 2.0));
    abc.beta = c.beta0 * std::pow(nu, (2.0 - p) / (p + 2.0)) * std::pow(kd, -4.0 / (p + 2.0));
    abc.gamma = c.gamma0 * std::pow(nu, -2.0 * (p - 1.0) / (p + 2.0)) * std::pow(kd, -6.0 / (p + 2.0));
    return abc;
}

/// Decay rates and time scales for band k at diffusivity nu.
///
///   lambda_nu  - headline rate nu^{p/(p+2)} / (1 + (2(p-1)/(p+2)) |ln nu|)
///   lambda_thm - functional envelope rate 2 eps0 nu^{p/(p+2)} k^{2/(p+2)}
///   lambda_w   - lambda_thm with the (|ln nu| + ln k) correction
///   t_enh      - 1/lambda_thm
///   t_enh_ln   - (1 + correction)/lambda_thm, the enhanced-dissipation time
struct RateBundle {
    double lambda_nu = 0.0;
    double lambda_thm = 0.0;
    double lambda_w = 0.0;
    double t_enh = 0.0;
    double t_enh_ln = 0.0;
};

inline RateBundle rates_and_times(const HypoConstants& c, double nu, unsigned k) {
    if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("rates_and_times: nu must be in (0,1]");
    if (k == 0) throw std::invalid_argument("rates_and_times: band k must be >= 1");
    const double p = c.p;
    const double kd = static_cast<double>(k);
    const double log_factor = 1.0 + (2.0 * (p - 1.0) / (p + 2.0)) * std::abs(std::log(nu));
    const double log_factor_k = 1.0 + (2.0 * (p - 1.0) / (p + 2.0)) * (std::abs(std::log(nu)) + std::log(kd));
    RateBundle rb;
    rb.lambda_nu = std::pow(nu, p / (p + 2.0)) / log_factor;
    rb.lambda_thm = 2.0 * c.eps0 * std::pow(nu, p / (p + 2.0)) * std::pow(kd, 2.0 / (p + 2.0));
    rb.lambda_w = rb.lambda_thm / log_factor_k;
    rb.t_enh = 1.0 / rb.lambda_thm;
    rb.t_enh_ln = log_factor_k / rb.lambda_thm;
    return rb;
}

} // namespace radmix
