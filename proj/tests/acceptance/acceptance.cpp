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

// Acceptance run: one PASS/FAIL line per criterion 1..10, exit status 0 iff
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "notrade/model.hpp"
#include "notrade/policy.hpp"
#include "notrade/sim.hpp"
#include "notrade/solver.hpp"

using namespace notrade;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body)
{
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2d %-28s %s  %s  [%.1fs]\n", id, name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
}

// Solves at n = 4001, memoised per (scenario, p, theta).
const Solution& cached(int id, double p, double theta)
{
    static std::map<std::tuple<int, double, double>, Solution> cache;
    const auto key = std::make_tuple(id, p, theta);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, solve(scenario(id, p, theta), 4001)).first;
    return it->second;
}

const std::vector<double> theta_all{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
const std::vector<double> p_pair{-0.3, 0.3};

Outcome frictionless_limit()
{
    ModelParams m = scenario(1, 0.3, 1.0);
    m.lam = m.mu = 1e-4;
    const auto t0 = Clock::now();
    const Solution s = solve(m, 8001);
    const double t = seconds_since(t0);
    const double w2 = frictionless_weights(m).second;
    const double mid = 0.5 * (s.eta1 + s.eta2), width = s.eta1 - s.eta2;
    const bool ok = std::abs(mid - w2) <= 0.02 && width <= 0.05 && t < 10.0;
    return {ok, fmt::format("mid={:.5f} w2={:.5f} |diff|={:.2e}<=0.02 width={:.2e}<=0.05 solve={:.2f}s<10s", mid, w2,
                            std::abs(mid - w2), width, t)};
}

// c_ratio at the smallest NT node against the Merton ratio, when z = 0 is
// interior to NT.
struct MertonZero {
    bool interior = false;
    double eta2 = 0.0;
    double ratio = 0.0;
    double merton = 0.0;
    double rel = 0.0;
};

MertonZero merton_at_zero(const ModelParams& m)
{
    MertonZero r;
    const Solution s = solve(m, 4001);
    r.eta2 = s.eta2;
    r.merton = (m.beta - m.r * m.p - m.p * m.alpha1 * m.alpha1 / (2.0 * (1.0 - m.p) * m.sigma1 * m.sigma1)) /
               (1.0 - m.p);
    r.interior = s.eta2 <= 0.0;
    if (!r.interior) return r;
    const PolicyField f(s);
    r.ratio = f.d_at(0.0);
    r.rel = std::abs(r.ratio - r.merton) / r.merton;
    return r;
}

Outcome merton_consumption()
{
    const MertonZero base = merton_at_zero(scenario(1, 0.3, 1.0));
    std::string detail;
    bool ok = true;
    if (base.interior) {
        ok = base.rel <= 0.02;
        detail = fmt::format("scenario 1: c_ratio(0)={:.6f} merton={:.6f} rel={:.2e}<=0.02", base.ratio, base.merton,
                             base.rel);
    } else {
        detail = fmt::format("scenario 1: skipped, z=0 in BR (eta2={:.4f} > 0)", base.eta2);
    }
    // lower illiquid drift moves eta2 below 0 so z = 0 is an NT point
    ModelParams v = scenario(1, 0.3, 1.0);
    v.alpha2 = 0.03;
    const MertonZero low = merton_at_zero(v);
    if (!low.interior) return {false, detail + fmt::format("; alpha2=0.03: eta2={:.4f} not <= 0", low.eta2)};
    ok = ok && low.rel <= 0.02;
    return {ok, detail + fmt::format("; alpha2=0.03: eta2={:.4f} c_ratio(0)={:.6f} merton={:.6f} rel={:.2e}<=0.02",
                                     low.eta2, low.ratio, low.merton, low.rel)};
}

Outcome complementarity()
{
    double worst = 0.0;
    int multi = 0, inactive = 0;
    std::size_t flagged = 0;
    for (int id = 1; id <= 4; ++id)
        for (double p : p_pair) {
            const ComplementarityReport rep = verify_complementarity(cached(id, p, 0.8));
            worst = std::max(worst, rep.worst());
            multi += rep.multi_active_nodes;
            inactive += rep.inactive_nodes;
            flagged += rep.flagged.size();
        }
    const bool ok = worst <= 1e-6 && multi == 0 && inactive == 0;
    return {ok, fmt::format("8 cells: worst={:.2e}<=1e-6 multi_active={} inactive={} flagged={}", worst, multi,
                            inactive, flagged)};
}

Outcome three_regions()
{
    int cells = 0, bad = 0;
    std::string first_bad;
    for (int id = 1; id <= 4; ++id)
        for (double p : p_pair)
            for (double th : theta_all) {
                if (th >= 1.0) continue;
                const Solution& s = cached(id, p, th);
                const double lim = solvency_lower_limit(s.params);
                const bool ok = s.count(Region::BR) >= 1 && s.count(Region::NT) >= 1 && s.count(Region::SR) >= 1 &&
                                lim < s.eta2 && s.eta2 < s.eta1 && s.eta1 < 1.0;
                ++cells;
                if (!ok && bad++ == 0)
                    first_bad = fmt::format(" first=(s{},p={},th={}: BR={} NT={} SR={} eta2={:.4f} eta1={:.4f})", id,
                                            p, th, s.count(Region::BR), s.count(Region::NT), s.count(Region::SR),
                                            s.eta2, s.eta1);
            }
    return {bad == 0, fmt::format("{} cells with theta<1, {} violating{}", cells, bad, first_bad)};
}

Outcome wedge_fit()
{
    double worst = 0.0;
    int cells = 0;
    for (int id = 1; id <= 4; ++id)
        for (double p : p_pair)
            for (double th : theta_all) {
                const WedgeConstants w = wedge_constants(cached(id, p, th));
                if (!w.sell.constant || !w.buy.constant) continue;
                worst = std::max({worst, w.sell.max_rel_error, w.buy.max_rel_error});
                ++cells;
            }
    return {worst <= 1e-5 && cells > 0, fmt::format("{} cells with both wedges: worst rel error={:.2e}<=1e-5", cells, worst)};
}

Outcome figure_boundaries()
{
    const std::vector<double> th5{0.2, 0.4, 0.6, 0.8, 1.0};
    double worst = std::numeric_limits<double>::infinity();
    std::string where;
    const double h = cached(1, 0.3, 1.0).grid.h;
    auto check = [&](double diff, const std::string& what) {
        if (diff < worst) {
            worst = diff;
            where = what;
        }
    };
    for (double p : p_pair)
        for (std::size_t i = 1; i < th5.size(); ++i) {
            const Solution &a = cached(1, p, th5[i - 1]), &b = cached(1, p, th5[i]);
            check(b.eta2 - a.eta2, fmt::format("eta2 along theta at p={} th={}", p, th5[i]));
            check(b.eta1 - a.eta1, fmt::format("eta1 along theta at p={} th={}", p, th5[i]));
        }
    for (double th : th5) {
        const Solution &a = cached(1, -0.3, th), &b = cached(1, 0.3, th);
        check(b.eta2 - a.eta2, fmt::format("eta2 along p at th={}", th));
        check(b.eta1 - a.eta1, fmt::format("eta1 along p at th={}", th));
    }
    for (int other : {2, 3})
        for (double p : p_pair)
            for (double th : th5) {
                const Solution &a = cached(1, p, th), &b = cached(other, p, th);
                check(b.eta2 - a.eta2, fmt::format("eta2 s{} vs s1 at p={} th={}", other, p, th));
                check(b.eta1 - a.eta1, fmt::format("eta1 s{} vs s1 at p={} th={}", other, p, th));
            }
    return {worst >= -h, fmt::format("min increment={:.3e} >= -h={:.3e} (at {})", worst, -h, where)};
}

Outcome figure_policies()
{
    const std::vector<double> th5{0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<std::string> problems;
    std::string spreads;
    for (double p : p_pair) {
        std::vector<const Solution*> sols;
        for (double th : th5) sols.push_back(&cached(1, p, th));
        const int n = sols[0]->grid.n;
        // interior NT nodes: both neighbours also NT
        auto inner = [&](const Solution* s, int k) {
            return k > 0 && k + 1 < n && s->region[k - 1] == Region::NT && s->region[k] == Region::NT &&
                   s->region[k + 1] == Region::NT;
        };
        for (std::size_t i = 0; i < sols.size(); ++i) {
            const Solution& s = *sols[i];
            for (int k = 1; k < n; ++k)
                if (s.region[k] == Region::NT && s.region[k - 1] == Region::NT && !(s.d[k] < s.d[k - 1])) {
                    problems.push_back(fmt::format("c_ratio not decreasing in z (p={} th={} z={:.4f})", p, th5[i],
                                                   s.grid.z(k)));
                    break;
                }
            for (int k = 1; k < n; ++k)
                if (inner(&s, k) && inner(&s, k - 1)) {
                    const double dpi = s.pi[k] - s.pi[k - 1];
                    if (p > 0.0 ? !(dpi > 0.0) : !(dpi < 0.0)) {
                        problems.push_back(fmt::format("pi not {} in z (p={} th={} z={:.4f})",
                                                       p > 0.0 ? "increasing" : "decreasing", p, th5[i], s.grid.z(k)));
                        break;
                    }
                }
        }
        // adjacent theta curves compared where both NT interiors overlap
        int overlap = 0;
        for (std::size_t i = 1; i < sols.size(); ++i)
            for (int k = 0; k < n; ++k)
                if (inner(sols[i], k) && inner(sols[i - 1], k)) {
                    ++overlap;
                    if (!(sols[i]->d[k] < sols[i - 1]->d[k])) {
                        problems.push_back(fmt::format("c_ratio not decreasing in theta (p={} th={}->{} z={:.4f}: "
                                                       "{:.5f}->{:.5f})",
                                                       p, th5[i - 1], th5[i], sols[0]->grid.z(k), sols[i - 1]->d[k],
                                                       sols[i]->d[k]));
                        break;
                    }
                }
        double spread = 0.0;
        for (int k = 0; k < n; ++k) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            int m = 0;
            for (const Solution* s : sols)
                if (inner(s, k)) {
                    lo = std::min(lo, s->pi[k]);
                    hi = std::max(hi, s->pi[k]);
                    ++m;
                }
            if (m >= 2) spread = std::max(spread, hi - lo);
        }
        const double mf = merton_pi1(sols[0]->params);
        if (spread > 0.05 * mf)
            problems.push_back(fmt::format("pi spread {:.4f} > 5% of merton {:.4f} at p={}", spread, mf, p));
        spreads += fmt::format(" p={}: overlap nodes={} pi spread={:.2e}<=5% merton={:.2e};", p, overlap, spread,
                               0.05 * mf);
    }
    std::string detail = spreads;
    for (std::size_t i = 0; i < problems.size() && i < 6; ++i) detail += " " + problems[i] + ";";
    if (problems.size() > 6) detail += fmt::format(" ... {} problems", problems.size());
    return {problems.empty(), detail};
}

Outcome monte_carlo()
{
    const PolicyField f(solve(scenario(1, 0.3, 0.8), 4001));
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 200.0;
    cfg.n_paths = 100000;
    cfg.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const auto t0 = Clock::now();
    const SimResult r = simulate(f, cfg);
    const double t = seconds_since(t0);
    const ConsistencyReport rep = compare_to_solution(r, f, r.start);

    SimConfig sub = cfg;
    sub.n_paths = 10000;
    const SimResult rs = simulate(f, sub, 2.0);
    const double gap = rep.value - rs.estimate;
    const bool sub_ok = gap > 3.0 * rs.std_error;
    const bool ok = rep.consistent() && sub_ok && t < 300.0;
    return {ok, fmt::format("value={:.5f} estimate={:.5f} |diff|={:.3e}<=3se+trunc={:.3e} (se={:.2e} trunc={:.2e}) "
                            "optimal run={:.0f}s<300s jobs={}; 2x consumption: estimate={:.5f} gap={:.3e}>3se={:.3e}",
                            rep.value, r.estimate, std::abs(rep.difference), rep.tolerance, r.std_error,
                            r.truncation_bound, t, cfg.jobs, rs.estimate, gap, 3.0 * rs.std_error)};
}

Outcome grid_convergence()
{
    const ModelParams m = scenario(1, 0.3, 0.8);
    const Grid g = default_grid(m, 4001);
    const Grid g2 = Grid::uniform(g.z_lo, g.z_hi, 2 * g.n - 1);
    const Solution a = solve(m, g), b = solve(m, g2);
    const double d2 = std::abs(a.eta2 - b.eta2), d1 = std::abs(a.eta1 - b.eta1);
    return {d2 <= 2.0 * g.h && d1 <= 2.0 * g.h,
            fmt::format("|d eta2|={:.3e} |d eta1|={:.3e} <= 2h={:.3e}", d2, d1, 2.0 * g.h)};
}

Outcome negative_p_divergence()
{
    const ModelParams m = scenario(1, -0.3, 0.8);
    const double lim = solvency_lower_limit(m);
    const double z_hi = default_grid(m, 4001).z_hi;
    std::vector<double> ends;
    std::string detail;
    for (double off : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const Solution s = solve(m, Grid::uniform(lim + off, z_hi, 4001));
        ends.push_back(s.u.front());
        detail += fmt::format(" z_lo=lim+{:.0e}: u={:.5f};", off, s.u.front());
    }
    bool ok = true;
    for (std::size_t i = 1; i < ends.size(); ++i) {
        const double growth = std::abs(ends[i]) / std::abs(ends[i - 1]) - 1.0;
        ok = ok && ends[i] < ends[i - 1] && growth >= 0.10;
        detail += fmt::format(" growth={:.1f}%;", 100.0 * growth);
    }
    return {ok, detail};
}

}  // namespace

int main()
{
    const auto t0 = Clock::now();
    report(1, "frictionless limit", frictionless_limit);
    report(2, "merton consumption at z=0", merton_consumption);
    report(3, "complementarity", complementarity);
    report(4, "three regions non-empty", three_regions);
    report(5, "wedge power-law fit", wedge_fit);
    report(6, "boundary orderings", figure_boundaries);
    report(7, "policy curve orderings", figure_policies);
    report(8, "monte carlo optimality", monte_carlo);
    report(9, "grid convergence", grid_convergence);
    report(10, "p<0 divergence", negative_p_divergence);
    std::printf("acceptance: %d of 10 criteria failed [%.0fs total]\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
