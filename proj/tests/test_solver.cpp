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

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "notrade/solver.hpp"

using namespace notrade;

namespace {

const Solution& scenario1_solution()
{
    static const Solution s = solve(scenario(1, 0.3, 0.8), 2001);
    return s;
}

}  // namespace

TEST(Solve, ScenarioOneConverges)
{
    const Solution& s = scenario1_solution();
    EXPECT_TRUE(std::isfinite(s.eta2));
    EXPECT_TRUE(std::isfinite(s.eta1));
    EXPECT_LT(s.eta2, s.eta1);
    EXPECT_FALSE(s.eta2_at_domain_end);
    EXPECT_FALSE(s.eta1_at_domain_end);
    EXPECT_LE(s.final_residual, s.opts.tol);
    EXPECT_TRUE(s.m_matrix_ok);
    EXPECT_EQ(s.nonconcave_nodes, 0);
    EXPECT_EQ(s.floored_nodes, 0);
    EXPECT_TRUE(check_invariants(s).ok());
}

TEST(Solve, FrictionlessLimitCentersOnMertonWeight)
{
    ModelParams m = scenario(1, 0.3, 1.0);
    m.lam = m.mu = 1e-4;
    const Solution s = solve(m, 4001);
    EXPECT_NEAR(0.5 * (s.eta1 + s.eta2), frictionless_weights(m).second, 0.02);
}

TEST(Solve, NegativePValueIsNegativeAndFallsTowardLowerEnd)
{
    const Solution s = solve(scenario(1, -0.3, 0.8), 2001);
    for (double u : s.u) ASSERT_LT(u, 0.0);
    for (int k = 1; k < 200; ++k) EXPECT_LT(s.u[k - 1], s.u[k]);
    EXPECT_TRUE(check_invariants(s).ok());
}

TEST(Solve, SellRegionExistsBelowUnitTheta)
{
    for (double p : {-0.3, 0.3})
        for (double th : {0.2, 0.5, 0.9}) {
            const Solution s = solve(scenario(1, p, th), 1001);
            EXPECT_LT(s.eta1, 1.0 - 0.5 * s.grid.h) << p << " " << th;
            EXPECT_GE(s.count(Region::SR), 1u);
        }
}

TEST(Solve, NoTradeWedgeShrinksWithCosts)
{
    double prev = 1e9;
    for (double c : {0.1, 0.05, 0.01, 1e-3}) {
        ModelParams m = scenario(1, 0.3, 1.0);
        m.lam = m.mu = c;
        const Solution s = solve(m, 4001);
        const double width = s.eta1 - s.eta2;
        EXPECT_LT(width, prev) << "cost " << c;
        prev = width;
    }
}

TEST(Solve, GridRefinementMovesBoundariesLessThanTwoSpacings)
{
    const ModelParams m = scenario(1, 0.3, 0.8);
    const Grid g = default_grid(m, 1001);
    const Solution a = solve(m, g), b = solve(m, Grid::uniform(g.z_lo, g.z_hi, 2 * g.n - 1));
    EXPECT_LE(std::abs(a.eta2 - b.eta2), 2.0 * g.h);
    EXPECT_LE(std::abs(a.eta1 - b.eta1), 2.0 * g.h);
}

TEST(Solve, ExtrapolatedEndsAgreeWithPinnedEnds)
{
    SolveOptions o;
    o.boundary_mode = BoundaryMode::extrapolated;
    const Solution a = solve(scenario(1, 0.3, 0.8), 1001);
    const Solution b = solve(scenario(1, 0.3, 0.8), 1001, o);
    EXPECT_NEAR(a.eta2, b.eta2, 2.0 * a.grid.h);
    EXPECT_NEAR(a.eta1, b.eta1, 2.0 * a.grid.h);
}

TEST(Solve, RejectsBadInputs)
{
    ModelParams m = scenario(1, 0.3, 0.8);
    m.lam = m.mu = 0.0;
    EXPECT_THROW(solve(m, 101), std::invalid_argument);
    m = scenario(1, 0.3, 0.8);
    m.sigma2 = -1.0;
    EXPECT_THROW(solve(m, 101), InvalidParams);
    SolveOptions o;
    o.tol = 0.0;
    EXPECT_THROW(solve(scenario(1, 0.3, 0.8), 101, o), std::invalid_argument);
}

TEST(Solve, IterationBudgetExhaustionCarriesHistory)
{
    SolveOptions o;
    o.max_iters = 1;
    try {
        solve(scenario(1, 0.3, 0.8), 1001, o);
        FAIL() << "expected SolveError";
    } catch (const SolveError& e) {
        EXPECT_EQ(e.residual_history.size(), 1u);
    }
}

TEST(ExtractBoundaries, MidpointsOfLabelChanges)
{
    const Grid g = Grid::uniform(0.0, 1.0, 6);
    const std::vector<Region> r{Region::BR, Region::BR, Region::NT, Region::NT, Region::NT, Region::SR};
    const Boundaries b = extract_boundaries(g, r);
    EXPECT_NEAR(b.eta2, 0.3, 1e-15);
    EXPECT_NEAR(b.eta1, 0.9, 1e-15);
    EXPECT_TRUE(b.monotone);
    EXPECT_NEAR(b.resolution, 0.1, 1e-15);
}

TEST(ExtractBoundaries, MissingRegionsAndDisorder)
{
    const Grid g = Grid::uniform(0.0, 1.0, 4);
    const Boundaries nt = extract_boundaries(g, std::vector<Region>(4, Region::NT));
    EXPECT_TRUE(nt.eta2_at_domain_end);
    EXPECT_TRUE(nt.eta1_at_domain_end);
    const Boundaries bad = extract_boundaries(g, {Region::NT, Region::BR, Region::NT, Region::SR});
    EXPECT_FALSE(bad.monotone);
}

TEST(Complementarity, ConvergedSolutionPasses)
{
    const ComplementarityReport rep = verify_complementarity(scenario1_solution());
    EXPECT_TRUE(rep.ok());
    EXPECT_LE(rep.worst(), 1e-6);
    EXPECT_EQ(rep.multi_active_nodes, 0);
    EXPECT_EQ(rep.inactive_nodes, 0);
}

TEST(Complementarity, SellFormEverywhereIsFlagged)
{
    const Solution& s = scenario1_solution();
    const ModelParams& m = s.params;
    const double a = *wedge_constants(s).sell.constant;
    std::vector<double> u(s.grid.n);
    for (int k = 0; k < s.grid.n; ++k) u[k] = a / m.p * std::pow(1.0 - m.mu * s.grid.z(k), m.p);
    const std::vector<Region> all_sr(s.grid.n, Region::SR);
    const ComplementarityReport rep = verify_complementarity(m, s.grid, u, all_sr, s.opts);
    EXPECT_FALSE(rep.ok());
    ASSERT_FALSE(rep.flagged.empty());
    EXPECT_LT(s.grid.z(rep.flagged.front()), s.eta1);
}

TEST(Complementarity, PerturbedNoTradeNodeIsFlagged)
{
    const Solution& s = scenario1_solution();
    const int k = s.grid.nearest(0.5 * (s.eta1 + s.eta2));
    ASSERT_EQ(s.region[k], Region::NT);
    std::vector<double> u = s.u;
    u[k] += 10.0 * s.opts.tol * s.scale();
    const ComplementarityReport rep = verify_complementarity(s.params, s.grid, u, s.region, s.opts);
    EXPECT_NE(std::find(rep.flagged.begin(), rep.flagged.end(), k), rep.flagged.end());
}

TEST(Complementarity, SellObstacleBindsOnlyAtTheSellBoundary)
{
    const Solution& s = scenario1_solution();
    const auto ev = evaluate_nodes(s.params, s.grid, s.u, s.opts);
    const int first_sr = s.grid.nearest(s.eta1 + 0.5 * s.grid.h);
    ASSERT_EQ(s.region[first_sr], Region::SR);
    EXPECT_LE(std::abs(ev[first_sr].sell) / s.scale(), s.opts.tol);
    EXPECT_GT(ev[first_sr - 10].sell, 0.0);
}

TEST(WedgeFit, RecoversPlantedConstants)
{
    for (double p : {0.3, -0.3}) {
        const ModelParams m = scenario(1, p, 0.8);
        const Grid g = Grid::uniform(-3.0, 0.95, 101);
        const double a = 2.5, b = 1.75;
        std::vector<double> u(g.n);
        std::vector<Region> r(g.n);
        for (int k = 0; k < g.n; ++k) {
            const double z = g.z(k);
            if (z < 0.0) {
                r[k] = Region::BR;
                u[k] = b / p * std::pow((1.0 - m.lam * (1.0 - z)) / (1.0 - m.lam), p);
            } else {
                r[k] = Region::SR;
                u[k] = a / p * std::pow(1.0 - m.mu * z, p);
            }
        }
        const WedgeConstants w = wedge_constants(m, g, u, r);
        ASSERT_TRUE(w.sell.constant && w.buy.constant);
        EXPECT_NEAR(*w.sell.constant, a, 1e-10 * a);
        EXPECT_NEAR(*w.buy.constant, b, 1e-10 * b);
        EXPECT_LE(w.sell.max_rel_error, 1e-12);
    }
}

TEST(WedgeFit, ConvergedConstantsArePositiveAndFitTightly)
{
    for (double p : {0.3, -0.3}) {
        const Solution s = solve(scenario(1, p, 0.8), 2001);
        const WedgeConstants w = wedge_constants(s);
        ASSERT_TRUE(w.sell.constant && w.buy.constant);
        EXPECT_GT(*w.sell.constant, 0.0);
        EXPECT_GT(*w.buy.constant, 0.0);
        EXPECT_LE(w.sell.max_rel_error, 10.0 * s.opts.tol);
        EXPECT_LE(w.buy.max_rel_error, 10.0 * s.opts.tol);
    }
}

TEST(Invariants, LowerBoundAndSign)
{
    for (int id = 1; id <= 4; ++id)
        for (double p : {0.3, -0.3}) {
            const Solution s = solve(scenario(id, p, 0.6), 1001);
            const InvariantReport inv = check_invariants(s);
            EXPECT_TRUE(inv.sign_matches_p) << id << " " << p;
            EXPECT_TRUE(inv.above_lower_bound) << id << " " << p;
            EXPECT_TRUE(inv.monotone_regions) << id << " " << p;
            EXPECT_TRUE(inv.concave) << id << " " << p;
        }
}
