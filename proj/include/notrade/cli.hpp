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

// Batch runs behind the command-line front end. Each run_* function computes
// all cells first (concurrently, up to `jobs`), then writes its output files
// from a single thread, and returns 0 iff every cell converged.
//
// Files:
//   boundaries.csv  scenario,theta,p,eta2,eta1,resolution
//   policy.csv      theta,p,z,u,du,region,pi,c_ratio   (NT nodes only)
//   summary.json    per-cell diagnostics
//   sim.json        Monte Carlo estimate and its verdict against v(start)

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "notrade/config.hpp"
#include "notrade/model.hpp"
#include "notrade/policy.hpp"
#include "notrade/sim.hpp"
#include "notrade/solver.hpp"

namespace notrade {

struct CliOverrides {
    std::optional<int> grid_n;
    std::optional<double> tol;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

inline void apply_overrides(RunConfig& c, const CliOverrides& o)
{
    if (o.grid_n) {
        if (*o.grid_n < 3) throw ConfigError("--grid-n must be at least 3");
        c.grid.n = *o.grid_n;
    }
    if (o.tol) {
        if (!(*o.tol > 0.0)) throw ConfigError("--tol must be positive");
        c.solve.tol = *o.tol;
    }
    if (o.seed) c.sim.master_seed = *o.seed;
    if (o.jobs < 1) throw ConfigError("--jobs must be at least 1");
    c.sim.jobs = o.jobs;
}

inline Grid make_grid(const GridSpec& g, const ModelParams& m)
{
    if (!g.z_lo && !g.z_hi) return default_grid(m, g.n);
    const Grid d = default_grid(m, g.n);
    return Grid::uniform(g.z_lo.value_or(d.z_lo), g.z_hi.value_or(d.z_hi), g.n);
}

/// One (scenario, theta, p) solve and its diagnostics.
struct Cell {
    int scenario = 0;
    ModelParams params;
    std::optional<Solution> sol;
    std::string error;
    double complementarity = std::numeric_limits<double>::quiet_NaN();
    bool single_active = false;
    WedgeConstants wedges;

    bool ok() const { return sol.has_value(); }
};

inline Cell solve_cell(int scenario_id, const ModelParams& m, const GridSpec& gs, const SolveOptions& opts)
{
    Cell c;
    c.scenario = scenario_id;
    c.params = m;
    try {
        Solution s = solve(m, make_grid(gs, m), opts);
        const ComplementarityReport rep = verify_complementarity(s);
        c.complementarity = rep.worst();
        c.single_active = rep.multi_active_nodes == 0 && rep.inactive_nodes == 0;
        c.wedges = wedge_constants(s);
        c.sol = std::move(s);
    } catch (const std::exception& e) {
        c.error = e.what();
    }
    return c;
}

/// Solves every cell, up to `jobs` at a time; order of the result matches
/// the input order.
inline std::vector<Cell> solve_cells(const std::vector<std::pair<int, ModelParams>>& cells, const GridSpec& gs,
                                     const SolveOptions& opts, int jobs)
{
    std::vector<Cell> out(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            out[i] = solve_cell(cells[i].first, cells[i].second, gs, opts);
            if (out[i].ok())
                spdlog::debug("cell scenario={} theta={} p={}: eta2={} eta1={} iters={}", cells[i].first,
                              cells[i].second.theta, cells[i].second.p, out[i].sol->eta2, out[i].sol->eta1,
                              out[i].sol->iters);
            else
                spdlog::warn("cell scenario={} theta={} p={} failed: {}", cells[i].first, cells[i].second.theta,
                             cells[i].second.p, out[i].error);
        }
    };
    const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
    std::vector<std::thread> pool;
    for (int j = 1; j < n; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

namespace io {

inline std::string num(double v)
{
    if (std::isnan(v)) return "nan";
    return format_double(v);
}

inline void write_boundaries(const std::filesystem::path& file, const std::vector<Cell>& cells)
{
    std::ofstream f(file);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    f << "scenario,theta,p,eta2,eta1,resolution\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const Cell& c : cells) {
        f << c.scenario << ',' << num(c.params.theta) << ',' << num(c.params.p) << ',';
        if (c.ok()) f << num(c.sol->eta2) << ',' << num(c.sol->eta1) << ',' << num(0.5 * c.sol->grid.h) << '\n';
        else f << num(nan) << ',' << num(nan) << ',' << num(nan) << '\n';
    }
}

/// Rows of policy.csv for one converged cell: every NT node.
inline void append_policy_rows(std::ostream& f, const Cell& c)
{
    if (!c.ok()) return;
    const PolicyField field(*c.sol);
    const Solution& s = field.solution();
    for (int k = 0; k < s.grid.n; ++k) {
        if (s.region[k] != Region::NT) continue;
        const double z = s.grid.z(k);
        f << num(c.params.theta) << ',' << num(c.params.p) << ',' << num(z) << ',' << num(s.u[k]) << ','
          << num(field.du_at(z)) << ',' << to_string(s.region[k]) << ',' << num(field.pi_at(z)) << ','
          << num(field.d_at(z)) << '\n';
    }
}

inline void write_policy(const std::filesystem::path& file, const std::vector<Cell>& cells)
{
    std::ofstream f(file);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    f << "theta,p,z,u,du,region,pi,c_ratio\n";
    for (const Cell& c : cells) append_policy_rows(f, c);
}

inline nlohmann::json finite_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json params_json(const ModelParams& m)
{
    return {{"r", m.r},         {"alpha1", m.alpha1}, {"sigma1", m.sigma1}, {"alpha2", m.alpha2},
            {"sigma2", m.sigma2}, {"rho", m.rho},     {"lam", m.lam},       {"mu", m.mu},
            {"beta", m.beta},   {"p", m.p},           {"theta", m.theta},   {"liquid_risky", m.liquid_risky}};
}

inline nlohmann::json cell_json(const Cell& c)
{
    nlohmann::json j;
    j["scenario"] = c.scenario;
    j["theta"] = c.params.theta;
    j["p"] = c.params.p;
    j["params"] = params_json(c.params);
    const ValidationReport v = validate(c.params);
    j["assumption1_slack"] = v.slack("assumption1");
    j["assumption2_slack"] = v.slack("assumption2");
    j["converged"] = c.ok();
    if (!c.ok()) {
        j["error"] = c.error;
        return j;
    }
    const Solution& s = *c.sol;
    j["iters"] = s.iters;
    j["final_residual"] = s.final_residual;
    j["final_update"] = s.final_update;
    j["eta2"] = s.eta2;
    j["eta1"] = s.eta1;
    j["eta2_at_domain_end"] = s.eta2_at_domain_end;
    j["eta1_at_domain_end"] = s.eta1_at_domain_end;
    j["resolution"] = 0.5 * s.grid.h;
    j["grid"] = {{"z_lo", s.grid.z_lo}, {"z_hi", s.grid.z_hi}, {"n", s.grid.n}, {"h", s.grid.h}};
    j["counts"] = {{"BR", s.count(Region::BR)}, {"NT", s.count(Region::NT)}, {"SR", s.count(Region::SR)}};
    j["pi_cap_slack"] = s.pi_cap_slack;
    j["m_matrix_ok"] = s.m_matrix_ok;
    j["complementarity_worst"] = c.complementarity;
    j["single_active_branch"] = c.single_active;
    auto fit = [](const WedgeFit& w) {
        return nlohmann::json{{"constant", w.constant ? nlohmann::json(*w.constant) : nlohmann::json(nullptr)},
                              {"max_rel_error", w.max_rel_error},
                              {"nodes", w.nodes}};
    };
    j["wedge_sell"] = fit(c.wedges.sell);
    j["wedge_buy"] = fit(c.wedges.buy);
    const MertonBaseline mb = merton_baseline(c.params);
    j["merton"] = {{"c_star_const", mb.c_star_const},
                   {"merton_pi1", mb.merton_pi1},
                   {"frictionless_w1", mb.frictionless_weights.first},
                   {"frictionless_w2", mb.frictionless_weights.second},
                   {"frictionless_c_ratio", mb.frictionless_c_ratio}};
    return j;
}

inline void write_json(const std::filesystem::path& file, const nlohmann::json& j)
{
    std::ofstream f(file);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    f << j.dump(2) << '\n';
}

inline void write_summary(const std::filesystem::path& file, const std::string& mode, const std::vector<Cell>& cells)
{
    nlohmann::json j;
    j["mode"] = mode;
    j["cells"] = nlohmann::json::array();
    bool all = true;
    for (const Cell& c : cells) {
        j["cells"].push_back(cell_json(c));
        all = all && c.ok();
    }
    j["all_converged"] = all;
    write_json(file, j);
}

inline nlohmann::json sim_json(const SimResult& r, const ConsistencyReport& rep, std::uint64_t seed,
                               double consumption_scale)
{
    return {{"estimate", r.estimate},
            {"std_error", finite_or_null(r.std_error)},
            {"n_paths", r.n_paths},
            {"n_units", r.n_units},
            {"n_steps", r.n_steps},
            {"dt", r.dt},
            {"T", r.horizon},
            {"seed", seed},
            {"consumption_scale", consumption_scale},
            {"start", {{"x", r.start.x}, {"y", r.start.y}}},
            {"truncation_factor", r.truncation_factor},
            {"truncation_bound", r.truncation_bound},
            {"bankrupt_paths", r.bankrupt_paths},
            {"mean_L", r.mean_L},
            {"mean_M", r.mean_M},
            {"z_min", r.z_min},
            {"z_max", r.z_max},
            {"value", rep.value},
            {"difference", rep.difference},
            {"relative_difference", rep.relative},
            {"tolerance", finite_or_null(rep.tolerance)},
            {"verdict", rep.verdict}};
}

}  // namespace io

inline void ensure_dir(const std::filesystem::path& out)
{
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out.string() + ": " + ec.message());
}

inline int exit_status(const std::vector<Cell>& cells)
{
    for (const Cell& c : cells)
        if (!c.ok()) return 1;
    return 0;
}

/// Single solve of the configured parameters.
inline int run_solve(const RunConfig& cfg, const std::filesystem::path& out)
{
    ensure_dir(out);
    const auto cells = solve_cells({{cfg.scenario, cfg.params}}, cfg.grid, cfg.solve, 1);
    io::write_boundaries(out / "boundaries.csv", cells);
    io::write_policy(out / "policy.csv", cells);
    io::write_summary(out / "summary.json", "solve", cells);
    return exit_status(cells);
}

/// theta_list x p_list over the configured parameters.
inline int run_sweep(const RunConfig& cfg, const std::filesystem::path& out)
{
    ensure_dir(out);
    std::vector<std::pair<int, ModelParams>> in;
    for (double p : cfg.sweep.p_list)
        for (double th : cfg.sweep.theta_list) {
            ModelParams m = cfg.params;
            m.p = p;
            m.theta = th;
            in.emplace_back(cfg.scenario, m);
        }
    std::vector<Cell> cells;
    std::vector<std::pair<int, ModelParams>> valid;
    for (const auto& c : in) {
        if (validate(c.second).ok()) {
            valid.push_back(c);
        } else {
            Cell bad;
            bad.scenario = c.first;
            bad.params = c.second;
            bad.error = "invalid model parameters: " + validate(c.second).failures();
            cells.push_back(bad);
        }
    }
    auto solved = solve_cells(valid, cfg.grid, cfg.solve, cfg.sim.jobs);
    cells.insert(cells.end(), solved.begin(), solved.end());
    io::write_boundaries(out / "boundaries.csv", cells);
    io::write_policy(out / "policy.csv", cells);
    io::write_summary(out / "summary.json", "sweep", cells);
    return exit_status(cells);
}

/// Reference scenarios x theta_list x p_list; a failed cell is written with
/// NaN boundaries and the run continues.
inline int run_scenarios(const RunConfig& cfg, const std::filesystem::path& out)
{
    ensure_dir(out);
    std::vector<std::pair<int, ModelParams>> in;
    for (int s : cfg.sweep.scenarios)
        for (double p : cfg.sweep.p_list)
            for (double th : cfg.sweep.theta_list) in.emplace_back(s, scenario(s, p, th));
    const auto cells = solve_cells(in, cfg.grid, cfg.solve, cfg.sim.jobs);
    io::write_boundaries(out / "boundaries.csv", cells);
    io::write_summary(out / "summary.json", "scenarios", cells);
    return exit_status(cells);
}

/// Solve, then simulate the optimal policy (or a consumption-scaled variant)
/// from the configured start.
inline int run_simulate(const RunConfig& cfg, const std::filesystem::path& out)
{
    ensure_dir(out);
    const auto cells = solve_cells({{cfg.scenario, cfg.params}}, cfg.grid, cfg.solve, 1);
    io::write_boundaries(out / "boundaries.csv", cells);
    io::write_summary(out / "summary.json", "simulate", cells);
    if (!cells[0].ok()) throw std::runtime_error("simulate: solve failed: " + cells[0].error);
    const PolicyField field(*cells[0].sol);
    const SimResult r = simulate(field, cfg.sim, cfg.consumption_scale);
    const ConsistencyReport rep = compare_to_solution(r, field, r.start);
    spdlog::info("simulate: estimate={} se={} value={} verdict={}", r.estimate, r.std_error, rep.value, rep.verdict);
    io::write_json(out / "sim.json", io::sim_json(r, rep, cfg.sim.master_seed, cfg.consumption_scale));
    return 0;
}

}  // namespace notrade
