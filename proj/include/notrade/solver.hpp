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

// Policy-iteration solver for the discrete variational inequality
//
//   min{ continuation(u), sell(u), buy(u) } = 0   on the z-grid,
//
// and the post-processing that reads the buy / no-trade / sell structure off
// the converged solution.
//
// Discretisation:
//  * continuation rows: upwinded first derivative (direction from the sign of
//    the z-drift under the node's controls), central second difference;
//    controls (pi, d) come from the closed-form maximisers evaluated with the
//    central first difference.
//  * sell rows: u_k equals the value after selling down to z_{k-1}, i.e.
//    u_k = ((1 - mu z_k)/(1 - mu z_{k-1}))^p u_{k-1}; buy rows likewise move
//    to z_{k+1}. These are exact on the power-law wedge solutions.
//  * residuals of the obstacle rows are scaled to the differential obstacle
//    p u + (1 - mu z) u' / mu (resp. the buy analogue).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "notrade/hjb_grid.hpp"
#include "notrade/model.hpp"
#include "notrade/tridiagonal.hpp"

namespace notrade {

enum class Region : int { BR = 0, NT = 1, SR = 2 };

inline const char* to_string(Region r)
{
    switch (r) {
    case Region::BR: return "BR";
    case Region::NT: return "NT";
    case Region::SR: return "SR";
    }
    return "?";
}

enum class BoundaryMode {
    obstacle_pinned,  ///< buy row at z_lo, sell row at z_hi
    extrapolated,     ///< full min-equation at the ends, ghost node from the wedge power law
};

struct SolveOptions {
    double tol = 1e-8;  ///< relative to max |u|
    int max_iters = 300;
    double pi_cap = 50.0;
    double d_cap = 1e3;
    double damping = 1.0;
    BoundaryMode boundary_mode = BoundaryMode::obstacle_pinned;
};

/// Per-node controls and branch residuals of the discrete operator at a
/// given iterate.
struct NodeEval {
    double pi = 0.0;
    double d = 0.0;
    bool pi_concave = true;
    bool pi_capped = false;
    bool d_floored = false;
    int upwind = 0;  ///< +1 forward difference, -1 backward, 0 no continuation row
    double du_central = 0.0;
    double du_upwind = 0.0;
    double d2u = 0.0;
    double cont = std::numeric_limits<double>::infinity();
    double sell = std::numeric_limits<double>::infinity();
    double buy = std::numeric_limits<double>::infinity();

    double min_branch() const { return std::min({cont, sell, buy}); }
};

struct Solution {
    ModelParams params;
    Grid grid;
    SolveOptions opts;
    std::vector<double> u;
    std::vector<Region> region;
    std::vector<double> pi;  ///< pi* at continuation nodes, 0 elsewhere
    std::vector<double> d;   ///< d* at continuation nodes, 0 elsewhere
    double eta2 = 0.0;
    double eta1 = 0.0;
    bool eta2_at_domain_end = false;
    bool eta1_at_domain_end = false;
    int iters = 0;
    double final_residual = 0.0;  ///< max_k |min branch| / scale
    double final_update = 0.0;    ///< relative sup-norm of the last update
    double pi_cap_slack = 0.0;    ///< max |pi*| observed on NT nodes
    std::vector<double> residual_history;
    bool m_matrix_ok = true;  ///< every policy-evaluation matrix passed check_m_matrix
    int nonconcave_nodes = 0;  ///< continuation nodes with Q >= 0 at convergence
    int floored_nodes = 0;

    double scale() const
    {
        double s = 0.0;
        for (double v : u) s = std::max(s, std::abs(v));
        return s;
    }

    /// Node counts per region; in obstacle-pinned mode the two end nodes are
    /// excluded because their branch is imposed.
    std::size_t count(Region r) const
    {
        const bool pinned = opts.boundary_mode == BoundaryMode::obstacle_pinned;
        const std::size_t lo = pinned ? 1 : 0, hi = pinned ? region.size() - 1 : region.size();
        std::size_t c = 0;
        for (std::size_t k = lo; k < hi; ++k) c += region[k] == r;
        return c;
    }
};

class SolveError : public std::runtime_error {
public:
    SolveError(const std::string& what, std::vector<double> history, std::vector<int> nodes = {})
        : std::runtime_error(what), residual_history(std::move(history)), bad_nodes(std::move(nodes))
    {
    }

    std::vector<double> residual_history;
    std::vector<int> bad_nodes;
};

/// Liquidate-now lower bound C*/p (net wealth)^p at unit total wealth.
inline double liquidation_bound(double z, const ModelParams& m)
{
    const double cst = c_star_const(m);
    const double net = z >= 0.0 ? sell_net(z, m) : buy_net(z, m) / (1.0 - m.lam);
    return cst / m.p * std::pow(net, m.p);
}

namespace detail {

struct Ghosts {
    double below = 0.0;  ///< u at z_lo - h
    double above = 0.0;  ///< u at z_hi + h
    double mult_below = 0.0;
    double mult_above = 0.0;
};

/// Ghost values continuing the buy wedge below z_lo and the sell wedge above
/// z_hi.
inline Ghosts ghosts(const Grid& g, std::span<const double> u, const ModelParams& m)
{
    Ghosts gh;
    const double zb = g.z_lo - g.h, za = g.z_hi + g.h;
    if (!(buy_net(zb, m) > 0.0) || !(za < 1.0))
        throw std::invalid_argument("extrapolated boundary: ghost node leaves the solvency interval");
    // u(zb) = (buy_net(zb)/buy_net(z_lo))^p u(z_lo)
    gh.mult_below = buy_step_multiplier(zb, g.z_lo, m);
    gh.mult_above = sell_step_multiplier(za, g.z_hi, m);
    gh.below = gh.mult_below * u.front();
    gh.above = gh.mult_above * u.back();
    return gh;
}

inline double sell_scale(double z, const Grid& g, const ModelParams& m)
{
    return m.mu > 0.0 ? sell_net(z, m) / (m.mu * g.h) : sell_net(z, m) / g.h;
}

inline double buy_scale(double z, const Grid& g, const ModelParams& m)
{
    return m.lam > 0.0 ? buy_net(z, m) / (m.lam * g.h) : buy_net(z, m) / g.h;
}

}  // namespace detail

/// Evaluates controls and the three branch residuals at every node of the
/// iterate u.
inline std::vector<NodeEval> evaluate_nodes(const ModelParams& m, const Grid& g, std::span<const double> u,
                                            const SolveOptions& opts)
{
    const int n = g.n;
    const double h = g.h;
    std::vector<NodeEval> out(n);
    const bool pinned = opts.boundary_mode == BoundaryMode::obstacle_pinned;
    detail::Ghosts gh;
    if (!pinned) gh = detail::ghosts(g, u, m);

    for (int k = 0; k < n; ++k) {
        NodeEval& e = out[k];
        const double z = g.z(k);
        const double uk = u[k];
        const bool has_lo = k > 0, has_hi = k < n - 1;
        if (pinned && (!has_lo || !has_hi)) {
            if (!has_lo) e.buy = (uk - buy_step_multiplier(z, g.z(1), m) * u[1]) * detail::buy_scale(z, g, m);
            else e.sell = (uk - sell_step_multiplier(z, g.z(k - 1), m) * u[k - 1]) * detail::sell_scale(z, g, m);
            continue;
        }
        const double ulo = has_lo ? u[k - 1] : gh.below;
        const double uhi = has_hi ? u[k + 1] : gh.above;
        e.du_central = (uhi - ulo) / (2.0 * h);
        e.d2u = (uhi - 2.0 * uk + ulo) / (h * h);
        const PiChoice pc = optimal_pi_node(z, uk, e.du_central, e.d2u, m, opts.pi_cap);
        const DChoice dc = optimal_d_node(z, uk, e.du_central, m, opts.d_cap);
        e.pi = pc.pi;
        e.pi_concave = pc.concave;
        e.pi_capped = pc.capped;
        e.d = dc.d;
        e.d_floored = dc.floored;
        const ContinuationCoeffs cc = continuation_coeffs(z, e.pi, e.d, m);
        e.upwind = cc.drift > 0.0 ? 1 : -1;
        e.du_upwind = e.upwind > 0 ? (uhi - uk) / h : (uk - ulo) / h;
        e.cont = cc.c0 * uk - cc.drift * e.du_upwind - cc.diffusion * e.d2u - cc.source;
        e.sell = (uk - sell_step_multiplier(z, z - h, m) * ulo) * detail::sell_scale(z, g, m);
        e.buy = (uk - buy_step_multiplier(z, z + h, m) * uhi) * detail::buy_scale(z, g, m);
    }
    return out;
}

namespace detail {

enum class Branch { cont, sell, buy };

inline Branch argmin_branch(const NodeEval& e)
{
    if (e.cont <= e.sell && e.cont <= e.buy) return Branch::cont;
    return e.sell <= e.buy ? Branch::sell : Branch::buy;
}

/// Assembles the linear system of the policy fixed by `branch` and the
/// frozen controls in `evals`.
inline Tridiagonal assemble(const ModelParams& m, const Grid& g, const std::vector<NodeEval>& evals,
                            const std::vector<Branch>& branch, const SolveOptions& opts)
{
    const int n = g.n;
    const double h = g.h;
    Tridiagonal a(n);
    const bool pinned = opts.boundary_mode == BoundaryMode::obstacle_pinned;
    double mult_below = 0.0, mult_above = 0.0;
    if (!pinned) {
        mult_below = buy_step_multiplier(g.z_lo - h, g.z_lo, m);
        mult_above = sell_step_multiplier(g.z_hi + h, g.z_hi, m);
    }
    for (int k = 0; k < n; ++k) {
        const double z = g.z(k);
        switch (branch[k]) {
        case Branch::sell: {
            a.diag[k] = 1.0;
            const double mult = sell_step_multiplier(z, z - h, m);
            if (k > 0) a.lower[k] = -mult;
            else a.diag[k] -= mult * mult_below;  // ghost below
            break;
        }
        case Branch::buy: {
            a.diag[k] = 1.0;
            const double mult = buy_step_multiplier(z, z + h, m);
            if (k < n - 1) a.upper[k] = -mult;
            else a.diag[k] -= mult * mult_above;
            break;
        }
        case Branch::cont: {
            const NodeEval& e = evals[k];
            const ContinuationCoeffs cc = continuation_coeffs(z, e.pi, e.d, m);
            const double diff = cc.diffusion / (h * h);
            double lo = -diff, hi = -diff, di = cc.c0 + 2.0 * diff;
            if (cc.drift > 0.0) {
                hi -= cc.drift / h;
                di += cc.drift / h;
            } else {
                lo += cc.drift / h;
                di -= cc.drift / h;
            }
            if (k > 0) a.lower[k] = lo;
            else di += lo * mult_below;
            if (k < n - 1) a.upper[k] = hi;
            else di += hi * mult_above;
            a.diag[k] = di;
            a.rhs[k] = cc.source;
            break;
        }
        }
    }
    return a;
}

inline double sup_norm(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
}

inline std::vector<Branch> improve(const std::vector<NodeEval>& evals)
{
    std::vector<Branch> b(evals.size());
    for (std::size_t k = 0; k < evals.size(); ++k) b[k] = argmin_branch(evals[k]);
    return b;
}

/// Region labels with priority NT > SR > BR among branches within tol.
inline std::vector<Region> label(const std::vector<NodeEval>& evals, double tol_abs)
{
    std::vector<Region> r(evals.size());
    for (std::size_t k = 0; k < evals.size(); ++k) {
        const NodeEval& e = evals[k];
        const double lo = e.min_branch() + tol_abs;
        if (e.cont <= lo) r[k] = Region::NT;
        else if (e.sell <= lo) r[k] = Region::SR;
        else r[k] = Region::BR;
    }
    return r;
}

}  // namespace detail

struct Boundaries {
    double eta2 = 0.0;
    double eta1 = 0.0;
    bool eta2_at_domain_end = false;
    bool eta1_at_domain_end = false;
    double resolution = 0.0;  ///< h / 2
    bool monotone = true;     ///< labels read BR* NT* SR*
};

/// Reads the buy and sell boundaries off a label vector: midpoints between
/// the last BR and first NT node and between the last NT and first SR node.
inline Boundaries extract_boundaries(const Grid& g, const std::vector<Region>& region, bool pinned_ends = false)
{
    Boundaries b;
    b.resolution = 0.5 * g.h;
    const int n = static_cast<int>(region.size());
    int last_br = -1, first_sr = n;
    for (int k = 0; k < n; ++k)
        if (region[k] == Region::BR) last_br = k;
    for (int k = n - 1; k >= 0; --k)
        if (region[k] == Region::SR) first_sr = k;
    for (int k = 1; k < n; ++k)
        if (static_cast<int>(region[k]) < static_cast<int>(region[k - 1])) b.monotone = false;
    const int lo_end = pinned_ends ? 0 : -1;
    const int hi_end = pinned_ends ? n - 1 : n;
    b.eta2_at_domain_end = last_br <= lo_end;
    b.eta1_at_domain_end = first_sr >= hi_end;
    b.eta2 = last_br < 0 ? g.z_lo : (last_br >= n - 1 ? g.z_hi : g.z(last_br) + 0.5 * g.h);
    b.eta1 = first_sr >= n ? g.z_hi : (first_sr <= 0 ? g.z_lo : g.z(first_sr) - 0.5 * g.h);
    return b;
}

inline Boundaries extract_boundaries(const Solution& sol)
{
    return extract_boundaries(sol.grid, sol.region, sol.opts.boundary_mode == BoundaryMode::obstacle_pinned);
}

/// Solves the discrete variational inequality by policy iteration started
/// from the liquidate-now policy.
inline Solution solve(const ModelParams& m, const Grid& g, const SolveOptions& opts = {})
{
    require_valid(m);
    check_grid(g, m);
    if (m.lam <= 0.0 && m.mu <= 0.0)
        throw std::invalid_argument("solve: at least one of lam, mu must be positive");
    if (!(opts.tol > 0.0) || opts.max_iters < 1 || !(opts.damping > 0.0 && opts.damping <= 1.0))
        throw std::invalid_argument("solve: invalid options");

    const int n = g.n;
    std::vector<double> u(n);
    for (int k = 0; k < n; ++k) u[k] = liquidation_bound(g.z(k), m);

    Solution sol;
    sol.params = m;
    sol.grid = g;
    sol.opts = opts;

    double omega = opts.damping;
    std::vector<NodeEval> evals = evaluate_nodes(m, g, u, opts);
    std::vector<detail::Branch> branch = detail::improve(evals);
    double prev_res = std::numeric_limits<double>::infinity();
    int rises = 0;
    const double sgn = m.p > 0.0 ? 1.0 : -1.0;

    for (int it = 1; it <= opts.max_iters; ++it) {
        const Tridiagonal a = detail::assemble(m, g, evals, branch, opts);
        std::vector<double> un;
        try {
            un = solve_tridiagonal(a);
        } catch (const std::runtime_error& e) {
            throw SolveError(std::string("policy evaluation failed: ") + e.what(), sol.residual_history);
        }
        std::vector<double> w(n);
        for (int k = 0; k < n; ++k) w[k] = sgn * un[k];
        const MMatrixCheck mc = check_m_matrix(a, w);
        if (!mc.z_pattern || !mc.positive_diagonal)
            throw SolveError("policy matrix lost its Z-pattern", sol.residual_history,
                             {static_cast<int>(mc.first_bad_row)});
        sol.m_matrix_ok = sol.m_matrix_ok && mc.ok();

        double diff = 0.0;
        for (int k = 0; k < n; ++k) {
            const double next = omega * un[k] + (1.0 - omega) * u[k];
            diff = std::max(diff, std::abs(next - u[k]));
            u[k] = next;
        }
        const double scale = detail::sup_norm(u);
        if (!std::isfinite(scale) || scale == 0.0)
            throw SolveError("iterate became non-finite", sol.residual_history);

        evals = evaluate_nodes(m, g, u, opts);
        double res = 0.0;
        for (const auto& e : evals) res = std::max(res, std::abs(e.min_branch()));
        res /= scale;
        const double upd = diff / scale;
        sol.residual_history.push_back(res);
        sol.iters = it;
        sol.final_residual = res;
        sol.final_update = upd;

        if (upd <= opts.tol && res <= opts.tol) break;
        if (it == opts.max_iters)
            throw SolveError("policy iteration did not converge in " + std::to_string(it) + " iterations",
                             sol.residual_history);

        // oscillation guard
        rises = res > prev_res ? rises + 1 : 0;
        if (rises >= 2 && omega > 0.5) {
            omega = 0.5;
            rises = 0;
        }
        prev_res = res;
        branch = detail::improve(evals);
    }

    const double scale = detail::sup_norm(u);
    sol.u = std::move(u);
    sol.region = detail::label(evals, opts.tol * scale);
    sol.pi.assign(n, 0.0);
    sol.d.assign(n, 0.0);
    for (int k = 0; k < n; ++k) {
        if (sol.region[k] != Region::NT) continue;
        const NodeEval& e = evals[k];
        if (e.upwind == 0) continue;
        sol.pi[k] = e.pi;
        sol.d[k] = e.d;
        sol.pi_cap_slack = std::max(sol.pi_cap_slack, std::abs(e.pi));
        sol.nonconcave_nodes += !e.pi_concave && m.liquid_risky && opts.pi_cap > 0.0;
        sol.floored_nodes += e.d_floored;
    }
    const Boundaries b = extract_boundaries(sol);
    sol.eta2 = b.eta2;
    sol.eta1 = b.eta1;
    sol.eta2_at_domain_end = b.eta2_at_domain_end;
    sol.eta1_at_domain_end = b.eta1_at_domain_end;
    return sol;
}

inline Solution solve(const ModelParams& m, int n = 4001, const SolveOptions& opts = {})
{
    return solve(m, default_grid(m, n), opts);
}

struct ComplementarityReport {
    double worst_nt = 0.0;  ///< relative to max |u|
    double worst_sr = 0.0;
    double worst_br = 0.0;
    std::vector<int> flagged;     ///< nodes violating their region's conditions
    int multi_active_nodes = 0;   ///< nodes with more than one branch within tol
    int inactive_nodes = 0;       ///< nodes with no branch within tol
    double tol = 0.0;

    double worst() const { return std::max({worst_nt, worst_sr, worst_br}); }
    bool ok() const { return flagged.empty(); }
};

/// Region-wise check of the complementarity conditions on an arbitrary
/// iterate, labelled by `region`:
///  NT: |continuation| <= tol, both obstacles > 0;
///  SR: |sell| <= tol, continuation >= -tol;
///  BR: |buy| <= tol, continuation >= -tol.
inline ComplementarityReport verify_complementarity(const ModelParams& m, const Grid& g, std::span<const double> u,
                                                    const std::vector<Region>& region, const SolveOptions& opts)
{
    ComplementarityReport rep;
    rep.tol = opts.tol;
    const double scale = detail::sup_norm(u);
    const double tol = opts.tol;
    const auto evals = evaluate_nodes(m, g, u, opts);
    for (int k = 0; k < g.n; ++k) {
        const NodeEval& e = evals[k];
        const double c = e.cont / scale, s = e.sell / scale, b = e.buy / scale;
        const int active = (std::abs(c) <= tol) + (std::abs(s) <= tol) + (std::abs(b) <= tol);
        rep.multi_active_nodes += active > 1;
        rep.inactive_nodes += active == 0;
        double viol = 0.0;
        switch (region[k]) {
        case Region::NT:
            viol = std::max({std::abs(c), s > 0.0 ? 0.0 : -s + tol, b > 0.0 ? 0.0 : -b + tol});
            rep.worst_nt = std::max(rep.worst_nt, viol);
            break;
        case Region::SR:
            viol = std::max(std::abs(s), std::isfinite(c) ? std::max(0.0, -c) : 0.0);
            rep.worst_sr = std::max(rep.worst_sr, viol);
            break;
        case Region::BR:
            viol = std::max(std::abs(b), std::isfinite(c) ? std::max(0.0, -c) : 0.0);
            rep.worst_br = std::max(rep.worst_br, viol);
            break;
        }
        if (viol > tol) rep.flagged.push_back(k);
    }
    return rep;
}

inline ComplementarityReport verify_complementarity(const Solution& sol)
{
    return verify_complementarity(sol.params, sol.grid, sol.u, sol.region, sol.opts);
}

struct WedgeFit {
    std::optional<double> constant;
    double max_rel_error = 0.0;
    std::size_t nodes = 0;
};

struct WedgeConstants {
    WedgeFit sell;  ///< u = a/p (1 - mu z)^p on SR
    WedgeFit buy;   ///< u = b/p ((1 - lam (1-z))/(1-lam))^p on BR
};

namespace detail {

template <class Shape>
WedgeFit fit_power(const Grid& g, std::span<const double> u, const std::vector<Region>& region, Region which,
                   Shape shape)
{
    WedgeFit f;
    double num = 0.0, den = 0.0;
    for (int k = 0; k < g.n; ++k) {
        if (region[k] != which) continue;
        const double phi = shape(g.z(k));
        num += u[k] * phi;
        den += phi * phi;
        ++f.nodes;
    }
    if (f.nodes == 0) return f;
    const double c = num / den;
    f.constant = c;
    for (int k = 0; k < g.n; ++k) {
        if (region[k] != which) continue;
        const double model = c * shape(g.z(k));
        f.max_rel_error = std::max(f.max_rel_error, std::abs(u[k] - model) / std::abs(model));
    }
    return f;
}

}  // namespace detail

/// Least-squares constants of the power-law wedge forms over the SR and BR
/// nodes, with the worst relative misfit.
inline WedgeConstants wedge_constants(const ModelParams& m, const Grid& g, std::span<const double> u,
                                      const std::vector<Region>& region)
{
    WedgeConstants w;
    w.sell = detail::fit_power(g, u, region, Region::SR,
                               [&](double z) { return std::pow(sell_net(z, m), m.p) / m.p; });
    w.buy = detail::fit_power(g, u, region, Region::BR, [&](double z) {
        return std::pow(buy_net(z, m) / (1.0 - m.lam), m.p) / m.p;
    });
    return w;
}

inline WedgeConstants wedge_constants(const Solution& sol)
{
    return wedge_constants(sol.params, sol.grid, sol.u, sol.region);
}

struct InvariantReport {
    double max_second_difference = 0.0;  ///< relative to scale; <= tol for concave u
    bool concave = true;
    bool monotone_regions = true;
    bool sign_matches_p = true;
    double worst_lower_bound_gap = 0.0;  ///< max (bound - u)/scale, <= tol required
    bool above_lower_bound = true;

    bool ok() const { return concave && monotone_regions && sign_matches_p && above_lower_bound; }
};

inline InvariantReport check_invariants(const Solution& sol)
{
    InvariantReport rep;
    const double scale = sol.scale();
    const double tol = sol.opts.tol;
    const auto& u = sol.u;
    const int n = sol.grid.n;
    rep.max_second_difference = -std::numeric_limits<double>::infinity();
    for (int k = 1; k + 1 < n; ++k)
        rep.max_second_difference = std::max(rep.max_second_difference, (u[k + 1] - 2.0 * u[k] + u[k - 1]) / scale);
    rep.concave = rep.max_second_difference <= tol;
    rep.monotone_regions = extract_boundaries(sol).monotone;
    rep.worst_lower_bound_gap = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
        if (!(sol.params.p * u[k] > 0.0)) rep.sign_matches_p = false;
        const double gap = (liquidation_bound(sol.grid.z(k), sol.params) - u[k]) / scale;
        rep.worst_lower_bound_gap = std::max(rep.worst_lower_bound_gap, gap);
    }
    rep.above_lower_bound = rep.worst_lower_bound_gap <= tol;
    return rep;
}

}  // namespace notrade
