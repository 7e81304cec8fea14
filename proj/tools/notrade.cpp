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

// notrade {solve|sweep|scenarios|simulate} --config FILE --out DIR
//         [--grid-n N] [--tol T] [--seed S] [--jobs J]

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "notrade/cli.hpp"

int main(int argc, char** argv)
{
    spdlog::set_level(spdlog::level::info);
    if (const char* lv = std::getenv("NOTRADE_LOG")) spdlog::set_level(spdlog::level::from_str(lv));

    CLI::App app{"Consumption and investment with a transaction-cost illiquid asset"};
    app.footer(notrade::config_help());
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    notrade::CliOverrides ov;
    int grid_n = 0;
    double tol = 0.0;
    std::uint64_t seed = 0;
    ov.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "configuration file (empty: built-in defaults)");
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--grid-n", grid_n, "grid nodes (overrides [grid] n)");
        sub->add_option("--tol", tol, "solver tolerance (overrides [solve] tol)");
        sub->add_option("--seed", seed, "master seed (overrides [sim] seed)");
        sub->add_option("--jobs", ov.jobs, "worker threads")->check(CLI::PositiveNumber);
    };
    CLI::App* solve = app.add_subcommand("solve", "solve one parameter set");
    CLI::App* sweep = app.add_subcommand("sweep", "solve over theta_list x p_list");
    CLI::App* scen = app.add_subcommand("scenarios", "solve the reference scenarios over theta_list x p_list");
    CLI::App* sim = app.add_subcommand("simulate", "solve, then Monte Carlo the resulting policy");
    for (CLI::App* s : {solve, sweep, scen, sim}) add_common(s);

    CLI11_PARSE(app, argc, argv);

    try {
        notrade::RunConfig cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw notrade::ConfigError("cannot open config file " + config_path);
            cfg = notrade::parse_config(in);
        }
        auto counted = [](CLI::App* s, const char* name) { return s->count(name) > 0; };
        CLI::App* active = app.get_subcommands().front();
        if (counted(active, "--grid-n")) ov.grid_n = grid_n;
        if (counted(active, "--tol")) ov.tol = tol;
        if (counted(active, "--seed")) ov.seed = seed;
        notrade::apply_overrides(cfg, ov);

        int rc = 0;
        if (active == solve) rc = notrade::run_solve(cfg, out_dir);
        else if (active == sweep) rc = notrade::run_sweep(cfg, out_dir);
        else if (active == scen) rc = notrade::run_scenarios(cfg, out_dir);
        else rc = notrade::run_simulate(cfg, out_dir);
        if (rc != 0) spdlog::error("one or more cells failed; see summary.json");
        return rc;
    } catch (const notrade::ConfigError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}
