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

// Pointwise pieces of the reduced HJB variational inequality in the
// illiquid-share variable z = y / (x + y), where v(x, y) = (x + y)^p u(z).
//
// All functions take the node state (z, u, u', u'') by value and are pure.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "notrade/model.hpp"

namespace notrade {

/// Uniform mesh z_k = z_lo + k h, k = 0..n-1.
struct Grid {
    double z_lo = 0.0;
    double z_hi = 0.0;
    int n = 0;
    double h = 0.0;

    double z(int k) const { return z_lo + k * h; }

    static Grid uniform(double z_lo, double z_hi, int n)
    {
        if (n < 3) throw std::invalid_argument("grid needs at least 3 nodes");
        if (!(z_lo < z_hi)) throw std::invalid_argument("grid needs z_lo < z_hi");
        return Grid{z_lo, z_hi, n, (z_hi - z_lo) / (n - 1)};
    }

    /// Nearest node index to z (clamped).
    int nearest(double zq) const
    {
        const long k = std::lround((zq - z_lo) / h);
        return static_cast<int>(std::clamp<long>(k, 0, n - 1));
    }
};

/// Left end of the solvency interval, -(1-lam)/lam (-inf when lam == 0).
inline double solvency_lower_limit(const ModelParams& m)
{
    if (m.lam <= 0.0) return -std::numeric_limits<double>::infinity();
    return -(1.0 - m.lam) / m.lam;
}

/// Checks -(1-lam)/lam < z_lo < z_hi < 1.
inline void check_grid(const Grid& g, const ModelParams& m)
{
    if (!(g.z_lo > solvency_lower_limit(m)))
        throw std::invalid_argument("grid: z_lo must lie above -(1-lam)/lam");
    if (!(g.z_hi < 1.0)) throw std::invalid_argument("grid: z_hi must lie below 1");
    if (!(g.z_lo < g.z_hi) || g.n < 3) throw std::invalid_argument("grid: degenerate mesh");
}

/// Truncated mesh with `margin` spacings cut off each singular end. When the
/// solvency limit lies below `lower_cap` (small purchase costs), the mesh
/// starts at `lower_cap` instead.
inline Grid default_grid(const ModelParams& m, int n, double lower_cap = -10.0, int margin = 10)
{
    if (n < 3) throw std::invalid_argument("grid needs at least 3 nodes");
    const double lim = solvency_lower_limit(m);
    if (lim > lower_cap) {
        // z_lo = lim + margin h, z_hi = 1 - margin h, h = (z_hi - z_lo)/(n-1)
        const double h = (1.0 - lim) / (n - 1 + 2 * margin);
        return Grid{lim + margin * h, 1.0 - margin * h, n, h};
    }
    const double h = (1.0 - lower_cap) / (n - 1 + margin);
    return Grid{lower_cap, 1.0 - margin * h, n, h};
}

/// Liquid-wealth share of v_x at unit wealth: v_x(1-z, z) = p u - z u'.
inline double vx_proxy(double z, double u, double du, const ModelParams& m)
{
    return m.p * u - z * du;
}

/// v_y(1-z, z) = p u + (1-z) u'.
inline double vy_proxy(double z, double u, double du, const ModelParams& m)
{
    return m.p * u + (1.0 - z) * du;
}

/// Coefficients of the pi-quadratic pi^2/2 s1^2 Q + pi R.
struct PiQuadratic {
    double Q = 0.0;  ///< x^2 v_xx at unit wealth
    double R = 0.0;  ///< rho s1 s2 x y v_xy + a1 x v_x
};

inline PiQuadratic pi_quadratic(double z, double u, double du, double d2u, const ModelParams& m)
{
    const double p = m.p, w = 1.0 - z;
    PiQuadratic q;
    q.Q = -p * (1.0 - p) * w * w * u + 2.0 * (1.0 - p) * w * w * z * du + z * z * w * w * d2u;
    const double cross = -p * (1.0 - p) * z * w * u + (1.0 - p) * z * w * (2.0 * z - 1.0) * du -
                         z * z * w * w * d2u;
    const double lin = p * w * u - z * w * du;
    q.R = m.rho * m.sigma1 * m.sigma2 * cross + m.alpha1 * lin;
    return q;
}

inline double pi_objective(double pi, const PiQuadratic& q, const ModelParams& m)
{
    return 0.5 * pi * pi * m.sigma1 * m.sigma1 * q.Q + pi * q.R;
}

struct PiChoice {
    double pi = 0.0;
    bool concave = true;  ///< Q < 0 at the node
    bool capped = false;  ///< |pi| hit pi_cap
};

/// Maximiser of the pi-quadratic on [-pi_cap, pi_cap]. If Q >= 0 the
/// quadratic has no interior maximum and the better cap endpoint is taken.
inline PiChoice optimal_pi_node(double z, double u, double du, double d2u, const ModelParams& m,
                                double pi_cap)
{
    PiChoice c;
    if (!m.liquid_risky || pi_cap <= 0.0) return c;
    const PiQuadratic q = pi_quadratic(z, u, du, d2u, m);
    if (q.Q < 0.0) {
        const double raw = -q.R / (m.sigma1 * m.sigma1 * q.Q);
        c.pi = std::clamp(raw, -pi_cap, pi_cap);
        c.capped = std::abs(raw) > pi_cap;
        return c;
    }
    c.concave = false;
    c.capped = true;
    c.pi = pi_objective(pi_cap, q, m) >= pi_objective(-pi_cap, q, m) ? pi_cap : -pi_cap;
    return c;
}

struct DChoice {
    double d = 0.0;
    bool floored = false;  ///< p u - z u' was below the positivity floor
};

/// Consumption-to-total-wealth rate minimising
/// d (p u - z u') - (d^theta (1-z)^(1-theta))^p / p.
inline DChoice optimal_d_node(double z, double u, double du, const ModelParams& m,
                              double d_cap = std::numeric_limits<double>::infinity())
{
    DChoice c;
    const double tp = m.theta * m.p;
    const double floor = 1e-12 * std::max(1.0, std::abs(u));
    double vx = vx_proxy(z, u, du, m);
    if (!(vx >= floor)) {
        vx = floor;
        c.floored = true;
    }
    const double liquid = std::max(1.0 - z, 0.0);
    c.d = std::pow(m.theta, 1.0 / (1.0 - tp)) * std::pow(liquid, (1.0 - m.theta) * m.p / (1.0 - tp)) *
          std::pow(vx, -1.0 / (1.0 - tp));
    if (c.d > d_cap) c.d = d_cap;
    return c;
}

/// Flow utility at unit wealth, (d^theta (1-z)^(1-theta))^p / p.
inline double flow_utility(double z, double d, const ModelParams& m)
{
    const double agg = std::pow(d, m.theta) * std::pow(std::max(1.0 - z, 0.0), 1.0 - m.theta);
    return std::pow(agg, m.p) / m.p;
}

/// Variational consumption term d (p u - z u') - flow utility.
inline double consumption_term(double z, double u, double du, double d, const ModelParams& m)
{
    return d * vx_proxy(z, u, du, m) - flow_utility(z, d, m);
}

/// Continuation operator at fixed controls (pi, d):
///   beta u - p [r + a2 z - s2^2 (1-p) z^2 / 2] u
///   - [a2 z (1-z) - s2^2 (1-p) z^2 (1-z)] u' - s2^2 z^2 (1-z)^2 u'' / 2
///   + d (p u - z u') - (d^theta (1-z)^(1-theta))^p / p
///   - [pi^2 s1^2 Q / 2 + pi R]
inline double continuation_residual(double z, double u, double du, double d2u, double pi, double d,
                                    const ModelParams& m)
{
    const double p = m.p, w = 1.0 - z, s2 = m.sigma2;
    double res = m.beta * u - p * (m.r + m.alpha2 * z - 0.5 * s2 * s2 * (1.0 - p) * z * z) * u -
                 (m.alpha2 * z * w - s2 * s2 * (1.0 - p) * z * z * w) * du -
                 0.5 * s2 * s2 * z * z * w * w * d2u + consumption_term(z, u, du, d, m);
    if (m.liquid_risky && pi != 0.0) res -= pi_objective(pi, pi_quadratic(z, u, du, d2u, m), m);
    return res;
}

/// The continuation operator written as c0 u - drift u' - diffusion u'' - source.
/// drift is the z-drift of the wealth-weighted process, diffusion >= 0.
struct ContinuationCoeffs {
    double c0 = 0.0;
    double drift = 0.0;
    double diffusion = 0.0;
    double source = 0.0;
};

inline ContinuationCoeffs continuation_coeffs(double z, double pi, double d, const ModelParams& m)
{
    const double p = m.p, w = 1.0 - z;
    const double s1 = m.liquid_risky ? m.sigma1 : 0.0, s2 = m.sigma2;
    const double a1 = m.alpha1_eff();
    const double cs = m.rho * s1 * s2;
    if (!m.liquid_risky) pi = 0.0;
    ContinuationCoeffs k;
    k.c0 = m.beta - p * (m.r + m.alpha2 * z - 0.5 * s2 * s2 * (1.0 - p) * z * z) + d * p +
           0.5 * pi * pi * s1 * s1 * p * (1.0 - p) * w * w + pi * cs * p * (1.0 - p) * z * w -
           pi * a1 * p * w;
    k.drift = m.alpha2 * z * w - s2 * s2 * (1.0 - p) * z * z * w + d * z +
              pi * pi * s1 * s1 * (1.0 - p) * w * w * z + pi * cs * (1.0 - p) * z * w * (2.0 * z - 1.0) -
              pi * a1 * z * w;
    k.diffusion = 0.5 * z * z * w * w * (s2 * s2 - 2.0 * cs * pi + s1 * s1 * pi * pi);
    k.source = flow_utility(z, d, m);
    return k;
}

/// -(1-mu) v_x + v_y at unit wealth, divided by mu: p u + (1 - mu z) u' / mu.
/// For mu == 0 the unscaled form mu p u + (1 - mu z) u' = u' is returned.
inline double sell_obstacle(double z, double u, double du, const ModelParams& m)
{
    if (m.mu <= 0.0) return du;
    return m.p * u + (1.0 - m.mu * z) * du / m.mu;
}

/// v_x - (1-lam) v_y at unit wealth, divided by lam:
/// p u - (1 - lam (1-z)) u' / lam. For lam == 0 returns -u'.
inline double buy_obstacle(double z, double u, double du, const ModelParams& m)
{
    if (m.lam <= 0.0) return -du;
    return m.p * u - (1.0 - m.lam * (1.0 - z)) * du / m.lam;
}

/// Net wealth per unit total wealth after selling: 1 - mu z.
inline double sell_net(double z, const ModelParams& m) { return 1.0 - m.mu * z; }

/// Net wealth per unit total wealth valued at purchase cost, times (1-lam):
/// 1 - lam (1-z).
inline double buy_net(double z, const ModelParams& m) { return 1.0 - m.lam * (1.0 - z); }

/// u(z_from) / u(z_to) when selling from z_from down to z_to: total wealth
/// shrinks by the factor (1 - mu z_from)/(1 - mu z_to).
inline double sell_step_multiplier(double z_from, double z_to, const ModelParams& m)
{
    return std::pow(sell_net(z_from, m) / sell_net(z_to, m), m.p);
}

/// u(z_from) / u(z_to) when buying from z_from up to z_to.
inline double buy_step_multiplier(double z_from, double z_to, const ModelParams& m)
{
    return std::pow(buy_net(z_from, m) / buy_net(z_to, m), m.p);
}

}  // namespace notrade
