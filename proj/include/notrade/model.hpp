/*
   Copyright 2026 The notrade Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Market, preference and cost parameters of the liquid/illiquid
// consumption-investment problem, plus the closed-form quantities that the
// numerical solution is checked against.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace notrade {

/// All rates are per year.
struct ModelParams {
    double r = 0.07;       ///< risk-free rate
    double alpha1 = 0.04;  ///< excess drift of the liquid risky asset
    double sigma1 = 0.30;  ///< volatility of the liquid risky asset
    double alpha2 = 0.08;  ///< excess drift of the illiquid asset
    double sigma2 = 0.35;  ///< volatility of the illiquid asset
    double rho = 0.4;      ///< correlation of the two Brownian drivers
    double lam = 0.2;      ///< proportional cost on purchases of the illiquid asset
    double mu = 0.2;       ///< proportional cost on sales of the illiquid asset
    double beta = 0.1;     ///< subjective discount rate
    double p = 0.3;        ///< CRRA exponent, p < 1, p != 0
    double theta = 0.8;    ///< weight of consumption in the Cobb-Douglas aggregate

    /// When false the liquid account holds the bond only: alpha1/sigma1 are
    /// ignored and the liquid risky fraction is pinned to zero.
    bool liquid_risky = true;

    /// theta == 1: utility of consumption only.
    bool baseline_mode() const { return theta == 1.0; }

    double alpha1_eff() const { return liquid_risky ? alpha1 : 0.0; }
};

struct Check {
    std::string name;
    bool passed = false;
    /// Signed margin; positive means the constraint holds with room to spare.
    double slack = 0.0;
};

struct ValidationReport {
    std::vector<Check> checks;

    bool ok() const
    {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    const Check* find(const std::string& name) const
    {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }

    double slack(const std::string& name) const
    {
        const Check* c = find(name);
        if (!c) throw std::out_of_range("no check named " + name);
        return c->slack;
    }

    std::string failures() const
    {
        std::string out;
        for (const auto& c : checks) {
            if (c.passed) continue;
            if (!out.empty()) out += ", ";
            out += c.name;
        }
        return out;
    }
};

class InvalidParams : public std::invalid_argument {
public:
    explicit InvalidParams(const std::string& what) : std::invalid_argument(what) {}
};

namespace detail {

inline void add_check(ValidationReport& rep, std::string name, double slack, bool strict = true)
{
    const bool ok = std::isfinite(slack) && (strict ? slack > 0.0 : slack >= 0.0);
    rep.checks.push_back({std::move(name), ok, slack});
}

}  // namespace detail

/// Right-hand side of the one-asset finiteness condition:
/// p a1^2 / (2 (1-p) s1^2).
inline double assumption1_rhs(const ModelParams& m)
{
    if (!m.liquid_risky) return 0.0;
    return m.p * m.alpha1 * m.alpha1 / (2.0 * (1.0 - m.p) * m.sigma1 * m.sigma1);
}

/// Right-hand side of the frictionless two-asset finiteness condition.
inline double assumption2_rhs(const ModelParams& m)
{
    if (!m.liquid_risky)
        return m.p * m.alpha2 * m.alpha2 / (2.0 * (1.0 - m.p) * m.sigma2 * m.sigma2);
    const double s1 = m.sigma1, s2 = m.sigma2, a1 = m.alpha1, a2 = m.alpha2;
    const double num = a1 * a1 * s2 * s2 + a2 * a2 * s1 * s1 - 2.0 * m.rho * a1 * a2 * s1 * s2;
    const double den = 2.0 * (1.0 - m.rho * m.rho) * (1.0 - m.p) * s1 * s1 * s2 * s2;
    return m.p * num / den;
}

/// Reports every parameter invariant with its numeric margin. Never throws.
inline ValidationReport validate(const ModelParams& m)
{
    ValidationReport rep;
    using detail::add_check;
    if (m.liquid_risky) {
        add_check(rep, "sigma1 > 0", m.sigma1);
        add_check(rep, "alpha1 > 0", m.alpha1);
    }
    add_check(rep, "sigma2 > 0", m.sigma2);
    add_check(rep, "alpha2 > 0", m.alpha2);
    add_check(rep, "beta > 0", m.beta);
    add_check(rep, "|rho| < 1", 1.0 - std::abs(m.rho));
    add_check(rep, "lam >= 0", m.lam, false);
    add_check(rep, "lam < 1", 1.0 - m.lam);
    add_check(rep, "mu >= 0", m.mu, false);
    add_check(rep, "mu < 1", 1.0 - m.mu);
    add_check(rep, "p < 1", 1.0 - m.p);
    add_check(rep, "p != 0", std::abs(m.p));
    add_check(rep, "theta > 0", m.theta);
    add_check(rep, "theta <= 1", 1.0 - m.theta, false);
    add_check(rep, "finite r", std::isfinite(m.r) ? 1.0 : NAN);
    const double lhs = m.beta - m.r * m.p;
    add_check(rep, "assumption1", lhs - assumption1_rhs(m));
    add_check(rep, "assumption2", lhs - assumption2_rhs(m));
    return rep;
}

inline void require_valid(const ModelParams& m)
{
    const auto rep = validate(m);
    if (!rep.ok()) throw InvalidParams("invalid model parameters: " + rep.failures());
}

/// (c^theta x^(1-theta))^p / p. Throws std::domain_error where the value is
/// -infinity (p < 0 with c == 0 or x == 0).
inline double utility(double c, double x, const ModelParams& m)
{
    if (c < 0.0 || x < 0.0) throw std::domain_error("utility: negative argument");
    if (m.p < 0.0 && (c == 0.0 || x == 0.0))
        throw std::domain_error("utility: -infinity at zero consumption or liquid wealth");
    const double agg = std::pow(c, m.theta) * std::pow(x, 1.0 - m.theta);
    return std::pow(agg, m.p) / m.p;
}

/// beta - r p - p a1^2 / (2 (1-p) s1^2); positive iff the first assumption holds.
inline double merton_bracket(const ModelParams& m)
{
    return m.beta - m.r * m.p - assumption1_rhs(m);
}

/// Constant of the liquidate-now lower bound v >= C/p (net wealth)^p.
inline double c_star_const(const ModelParams& m)
{
    const double tp = m.theta * m.p;
    return std::pow(1.0 - tp, 1.0 - tp) * std::pow(m.theta, tp) *
           std::pow(merton_bracket(m), tp - 1.0);
}

/// Merton fraction of liquid wealth in the liquid risky asset.
inline double merton_pi1(const ModelParams& m)
{
    if (!m.liquid_risky) return 0.0;
    return m.alpha1 / ((1.0 - m.p) * m.sigma1 * m.sigma1);
}

/// Consumption-to-wealth rate of the liquid-only problem (value C/p x^p).
/// For theta == 1 this is the Merton ratio bracket/(1-p).
inline double liquid_only_consumption_ratio(const ModelParams& m)
{
    const double tp = m.theta * m.p;
    return std::pow(m.theta, 1.0 / (1.0 - tp)) * std::pow(c_star_const(m), -1.0 / (1.0 - tp));
}

/// Frictionless two-asset Merton weights (fractions of total wealth):
/// solves Sigma w = alpha / (1 - p).
inline std::pair<double, double> frictionless_weights(const ModelParams& m)
{
    if (!m.liquid_risky) return {0.0, m.alpha2 / ((1.0 - m.p) * m.sigma2 * m.sigma2)};
    const double s11 = m.sigma1 * m.sigma1;
    const double s22 = m.sigma2 * m.sigma2;
    const double s12 = m.rho * m.sigma1 * m.sigma2;
    const double b1 = m.alpha1 / (1.0 - m.p);
    const double b2 = m.alpha2 / (1.0 - m.p);
    const double det = s11 * s22 - s12 * s12;
    return {(s22 * b1 - s12 * b2) / det, (s11 * b2 - s12 * b1) / det};
}

struct MertonBaseline {
    double c_star_const = 0.0;
    double merton_pi1 = 0.0;
    std::pair<double, double> frictionless_weights;
    double frictionless_c_ratio = 0.0;
};

/// The frictionless consumption ratio is the theta == 1 two-asset Merton
/// rate [beta - r p - p alpha' Sigma^-1 alpha / (2 (1-p))] / (1-p).
inline MertonBaseline merton_baseline(const ModelParams& m)
{
    MertonBaseline b;
    b.c_star_const = c_star_const(m);
    b.merton_pi1 = merton_pi1(m);
    b.frictionless_weights = frictionless_weights(m);
    b.frictionless_c_ratio = (m.beta - m.r * m.p - assumption2_rhs(m)) / (1.0 - m.p);
    return b;
}

namespace detail {

/// (beta - r p)/p - a1^2 / (2 (1-p) s1^2)
inline double scaled_bracket(const ModelParams& m)
{
    return merton_bracket(m) / m.p;
}

/// Exponent (1-theta) p / (1 - theta p) of the liquid-wealth factor.
inline double liquidity_exponent(const ModelParams& m)
{
    return (1.0 - m.theta) * m.p / (1.0 - m.theta * m.p);
}

inline double cross_drift(const ModelParams& m)
{
    return m.liquid_risky ? m.rho * m.alpha1 * m.sigma2 / m.sigma1 : 0.0;
}

/// Generator of a power-law wedge candidate divided by A W^p, written in
/// terms of s = (illiquid net value)/(net wealth) and liquid share q.
inline double wedge_generator(double s, double q, double A, const ModelParams& m)
{
    const double tp = m.theta * m.p;
    const double a = m.liquid_risky ? m.alpha1 / ((1.0 - m.p) * m.sigma1) : 0.0;
    const double lin = m.liquid_risky ? a - m.rho * m.sigma2 * s : 0.0;
    const double util = (1.0 - tp) / m.p * std::pow(m.theta, tp / (1.0 - tp)) *
                        std::pow(A, -1.0 / (1.0 - tp)) * std::pow(q, liquidity_exponent(m));
    return (m.beta - m.r * m.p) / m.p - 0.5 * (1.0 - m.p) * lin * lin - m.alpha2 * s +
           0.5 * m.sigma2 * m.sigma2 * (1.0 - m.p) * s * s - util;
}

}  // namespace detail

/// Lower bound f(t), t = (1-mu) y / x, of the generator of the sell-wedge
/// candidate (A/p)(x + (1-mu) y)^p. Independent of A once A >= C*.
inline double wedge_f(double t, const ModelParams& m)
{
    const double k = detail::liquidity_exponent(m);
    const double cross = detail::cross_drift(m) - m.alpha2;
    const double var = (1.0 - m.rho * m.rho) * (1.0 - m.p) * m.sigma2 * m.sigma2;
    const double penalty = m.liquid_risky ? cross * cross / (2.0 * var)
                                          : m.alpha2 * m.alpha2 / (2.0 * (1.0 - m.p) * m.sigma2 * m.sigma2);
    return detail::scaled_bracket(m) * (1.0 - std::pow(1.0 + t, -k)) - penalty;
}

/// Exact generator of (A/p)(x + (1-mu) y)^p divided by A (x + (1-mu) y)^p.
/// For 0 < p < 1 and A >= C* it dominates wedge_f(t).
inline double sell_wedge_generator(double t, double A, const ModelParams& m)
{
    return detail::wedge_generator(t / (1.0 + t), 1.0 / (1.0 + t), A, m);
}

/// g(t), t = y / ((1-lam) x) in (-1, 0): numerator of the generator of the
/// buy-wedge candidate (B/p)(x + y/(1-lam))^p with B = C*.
inline double wedge_g(double t, const ModelParams& m)
{
    const double k = detail::liquidity_exponent(m);
    const double one_t = 1.0 + t;
    return detail::scaled_bracket(m) * (one_t * one_t - std::pow(one_t, 2.0 - k)) +
           0.5 * (1.0 - m.rho * m.rho) * (1.0 - m.p) * m.sigma2 * m.sigma2 * t * t *
               (m.liquid_risky ? 1.0 : 1.0 / (1.0 - m.rho * m.rho)) +
           (detail::cross_drift(m) - m.alpha2) * t * one_t;
}

/// Exact generator of (B/p)(x + y/(1-lam))^p divided by B (x + y/(1-lam))^p.
/// Equals wedge_g(t) / (1+t)^2 at B = C*.
inline double buy_wedge_generator(double t, double B, const ModelParams& m)
{
    return detail::wedge_generator(t / (1.0 + t), 1.0 / (1.0 + t), B, m);
}

/// The eight parameter cells of the reference study: scenario 1..4 and p.
inline ModelParams scenario(int id, double p, double theta)
{
    ModelParams m;
    m.p = p;
    m.theta = theta;
    switch (id) {
    case 1: break;
    case 2: m.liquid_risky = false; break;
    case 3: m.alpha2 = 0.13; break;
    case 4: m.sigma2 = 0.50; break;
    default: throw std::invalid_argument("scenario id must be 1..4");
    }
    return m;
}

}  // namespace notrade
