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

// Two-dimensional reconstruction v(x, y) = (x + y)^p u(y / (x + y)) and the
// feedback controls read off a converged Solution.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "notrade/hjb_grid.hpp"
#include "notrade/model.hpp"
#include "notrade/solver.hpp"

namespace notrade {

struct Position {
    double x = 0.0;  ///< liquid wealth
    double y = 0.0;  ///< illiquid asset value

    double total() const { return x + y; }
    double z() const { return y / (x + y); }
};

enum class PositionRegion { BR, NT, SR, FORCED_LIQUIDATION };

inline const char* to_string(PositionRegion r)
{
    switch (r) {
    case PositionRegion::BR: return "BR";
    case PositionRegion::NT: return "NT";
    case PositionRegion::SR: return "SR";
    case PositionRegion::FORCED_LIQUIDATION: return "FORCED_LIQUIDATION";
    }
    return "?";
}

/// x + (1-mu) y >= 0 and x + y/(1-lam) >= 0.
inline bool in_solvency_closure(const Position& pos, const ModelParams& m)
{
    return pos.x + (1.0 - m.mu) * pos.y >= 0.0 && pos.x + pos.y / (1.0 - m.lam) >= 0.0;
}

struct ValueAt {
    double value = 0.0;
    bool clamped = false;  ///< z fell outside [z_lo, z_hi]
};

class PolicyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Feedback maps over the no-trade nodes of a Solution. Controls use central
/// differences inside NT and one-sided differences at the first and last NT
/// node; between nodes everything is linear in z.
class PolicyField {
public:
    explicit PolicyField(Solution sol) : sol_(std::move(sol))
    {
        const int n = sol_.grid.n;
        for (int k = 0; k < n; ++k) {
            if (sol_.region[k] != Region::NT) continue;
            if (first_nt_ < 0) first_nt_ = k;
            last_nt_ = k;
        }
        if (first_nt_ < 0) throw PolicyError("policy: solution has no no-trade nodes");
        const ModelParams& m = sol_.params;
        const double h = sol_.grid.h;
        const auto& u = sol_.u;
        const int cnt = last_nt_ - first_nt_ + 1;
        du_.assign(cnt, 0.0);
        pi_.assign(cnt, 0.0);
        d_.assign(cnt, 0.0);
        for (int j = 0; j < cnt; ++j) {
            const int k = first_nt_ + j;
            double du, d2;
            const int kc = std::clamp(k, 1, n - 2);
            if (k == first_nt_ && k + 1 < n && cnt > 1) du = (u[k + 1] - u[k]) / h;
            else if (k == last_nt_ && k > 0 && cnt > 1) du = (u[k] - u[k - 1]) / h;
            else du = (u[kc + 1] - u[kc - 1]) / (2.0 * h);
            // curvature from the nearest node with both neighbours inside NT
            int kd = std::clamp(k, first_nt_ + 1, last_nt_ - 1);
            if (cnt < 3) kd = kc;
            d2 = (u[kd + 1] - 2.0 * u[kd] + u[kd - 1]) / (h * h);
            const double z = sol_.grid.z(k);
            du_[j] = du;
            pi_[j] = optimal_pi_node(z, u[k], du, d2, m, sol_.opts.pi_cap).pi;
            d_[j] = optimal_d_node(z, u[k], du, m, sol_.opts.d_cap).d;
        }
    }

    const Solution& solution() const { return sol_; }
    const ModelParams& params() const { return sol_.params; }
    double eta2() const { return sol_.eta2; }
    double eta1() const { return sol_.eta1; }
    double z_nt_lo() const { return sol_.grid.z(first_nt_); }
    double z_nt_hi() const { return sol_.grid.z(last_nt_); }

    /// u at z by linear interpolation; z outside the grid is clamped.
    ValueAt u_at(double z) const
    {
        const Grid& g = sol_.grid;
        ValueAt out;
        if (z < g.z_lo || z > g.z_hi) out.clamped = true;
        const double zc = std::clamp(z, g.z_lo, g.z_hi);
        out.value = interp_grid(sol_.u, zc);
        return out;
    }

    /// Control tables over NT, z clamped to the NT node range.
    double pi_at(double z) const { return interp_nt(pi_, z); }
    double d_at(double z) const { return interp_nt(d_, z); }
    double du_at(double z) const { return interp_nt(du_, z); }

private:
    double interp_grid(const std::vector<double>& f, double z) const
    {
        const Grid& g = sol_.grid;
        const double s = (z - g.z_lo) / g.h;
        const int k = std::clamp(static_cast<int>(std::floor(s)), 0, g.n - 2);
        const double t = s - k;
        return (1.0 - t) * f[k] + t * f[k + 1];
    }

    double interp_nt(const std::vector<double>& f, double z) const
    {
        if (f.size() == 1) return f[0];
        const Grid& g = sol_.grid;
        const double s = std::clamp((z - g.z(first_nt_)) / g.h, 0.0, static_cast<double>(f.size() - 1));
        const int k = std::min(static_cast<int>(s), static_cast<int>(f.size()) - 2);
        const double t = s - k;
        return (1.0 - t) * f[k] + t * f[k + 1];
    }

    Solution sol_;
    int first_nt_ = -1;
    int last_nt_ = -1;
    std::vector<double> du_, pi_, d_;
};

/// v(x, y). For x + y <= 0 the value at the corner is 0 (p > 0) or -inf
/// (p < 0).
inline ValueAt value(const Position& pos, const PolicyField& f)
{
    const double w = pos.total();
    if (!(w > 0.0)) return {f.params().p > 0.0 ? 0.0 : -std::numeric_limits<double>::infinity(), false};
    ValueAt v = f.u_at(pos.z());
    v.value *= std::pow(w, f.params().p);
    return v;
}

/// Region of a position; points within h/2 of a boundary ray count as NT.
inline PositionRegion classify(const Position& pos, const PolicyField& f)
{
    if (pos.x < 0.0) return PositionRegion::FORCED_LIQUIDATION;
    if (!(pos.total() > 0.0)) throw PolicyError("classify: needs x + y > 0");
    const double z = pos.z();
    const double half = 0.5 * f.solution().grid.h;
    if (z < f.eta2() - half) return PositionRegion::BR;
    if (z > f.eta1() + half) return PositionRegion::SR;
    return PositionRegion::NT;
}

/// Sell amount (units of y) taking pos to the ray z = target along (1-mu, -1).
inline double sell_amount_to(const Position& pos, double target, const ModelParams& m)
{
    return (pos.y - target * pos.total()) / (1.0 - m.mu * target);
}

/// Liquid wealth spent taking pos to the ray z = target along (-1, 1-lam).
inline double buy_amount_to(const Position& pos, double target, const ModelParams& m)
{
    return (target * pos.total() - pos.y) / (1.0 - m.lam * (1.0 - target));
}

/// Trade that moves pos onto the boundary of NT (or covers a short liquid
/// position). NT positions are returned unchanged.
inline Position initial_jump(const Position& pos, const PolicyField& f)
{
    const ModelParams& m = f.params();
    switch (classify(pos, f)) {
    case PositionRegion::NT: return pos;
    case PositionRegion::FORCED_LIQUIDATION: return {0.0, pos.y + pos.x / (1.0 - m.mu)};
    case PositionRegion::SR: {
        const double den = 1.0 - m.mu * f.eta1();
        const double dl = sell_amount_to(pos, f.eta1(), m);
        if (!(den > 0.0) || !(dl >= 0.0) || !std::isfinite(dl)) throw PolicyError("initial_jump: sell ray unreachable");
        return {pos.x + (1.0 - m.mu) * dl, pos.y - dl};
    }
    case PositionRegion::BR: {
        const double den = 1.0 - m.lam * (1.0 - f.eta2());
        const double dm = buy_amount_to(pos, f.eta2(), m);
        if (!(den > 0.0) || !(dm >= 0.0) || !std::isfinite(dm)) throw PolicyError("initial_jump: buy ray unreachable");
        return {pos.x - dm, pos.y + (1.0 - m.lam) * dm};
    }
    }
    return pos;
}

/// Optimal consumption rate (currency per year) on NT.
inline double consumption_rate(const Position& pos, const PolicyField& f)
{
    if (classify(pos, f) != PositionRegion::NT) throw PolicyError("consumption_rate: position outside NT");
    return pos.total() * f.d_at(pos.z());
}

/// Optimal fraction of liquid wealth in the liquid risky asset on NT.
inline double investment_fraction(const Position& pos, const PolicyField& f)
{
    if (classify(pos, f) != PositionRegion::NT) throw PolicyError("investment_fraction: position outside NT");
    return f.pi_at(pos.z());
}

}  // namespace notrade
