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

// Run configuration: `[section]` headers with `key = value` lines.
//
//   [params]  scenario r alpha1 sigma1 alpha2 sigma2 rho lam mu beta p theta liquid_risky
//   [grid]    n z_lo z_hi
//   [solve]   tol max_iters pi_cap d_cap damping boundary_mode
//   [sweep]   scenarios theta_list p_list
//   [sim]     dt T n_paths seed start_x start_y antithetic consumption_scale
//
// Every key is optional; unknown sections and keys are rejected before any
// computation starts.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "notrade/model.hpp"
#include "notrade/sim.hpp"
#include "notrade/solver.hpp"

namespace notrade {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    int n = 4001;
    std::optional<double> z_lo;
    std::optional<double> z_hi;
};

struct SweepSpec {
    std::vector<int> scenarios{1, 2, 3, 4};
    std::vector<double> theta_list{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<double> p_list{-0.3, 0.3};
};

struct RunConfig {
    int scenario = 0;  ///< 0: custom parameters, 1..4: reference scenario base
    ModelParams params;
    GridSpec grid;
    SolveOptions solve;
    SweepSpec sweep;
    SimConfig sim;
    double consumption_scale = 1.0;
};

/// Shortest decimal text that parses back to the same double (at most 17
/// significant digits).
inline std::string format_double(double v)
{
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& text)
{
    std::size_t used = 0;
    double v;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + ": not a number: '" + text + "'");
    }
    if (used != text.size()) throw ConfigError("config: " + key + ": trailing characters in '" + text + "'");
    return v;
}

inline std::int64_t parse_int(const std::string& key, const std::string& text)
{
    std::size_t used = 0;
    long long v;
    try {
        v = std::stoll(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + ": not an integer: '" + text + "'");
    }
    if (used != text.size()) throw ConfigError("config: " + key + ": trailing characters in '" + text + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text)
{
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("config: " + key + ": expected true/false, got '" + text + "'");
}

/// Comma- or space-separated list.
template <class T, class Parse>
std::vector<T> parse_list(const std::string& key, const std::string& text, Parse parse)
{
    std::string s = text;
    for (char& ch : s)
        if (ch == ',') ch = ' ';
    std::istringstream in(s);
    std::vector<T> out;
    std::string tok;
    while (in >> tok) out.push_back(static_cast<T>(parse(key, tok)));
    if (out.empty()) throw ConfigError("config: " + key + ": empty list");
    return out;
}

inline const std::map<std::string, std::set<std::string>>& schema()
{
    static const std::map<std::string, std::set<std::string>> s{
        {"params",
         {"scenario", "r", "alpha1", "sigma1", "alpha2", "sigma2", "rho", "lam", "mu", "beta", "p", "theta",
          "liquid_risky"}},
        {"grid", {"n", "z_lo", "z_hi"}},
        {"solve", {"tol", "max_iters", "pi_cap", "d_cap", "damping", "boundary_mode"}},
        {"sweep", {"scenarios", "theta_list", "p_list"}},
        {"sim", {"dt", "T", "n_paths", "seed", "start_x", "start_y", "antithetic", "consumption_scale"}},
    };
    return s;
}

}  // namespace detail

/// Parses a configuration stream; throws ConfigError naming the offending key.
inline RunConfig parse_config(std::istream& in)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    const auto& schema = detail::schema();
    for (const auto& [section, body] : tree) {
        const auto it = schema.find(section);
        if (it == schema.end()) {
            if (body.empty()) throw ConfigError("config: key outside any section: " + section);
            throw ConfigError("config: unknown section [" + section + "]");
        }
        for (const auto& [key, leaf] : body) {
            (void)leaf;
            if (!it->second.count(key)) throw ConfigError("config: unknown key " + section + "." + key);
        }
    }

    auto get = [&](const std::string& sec, const std::string& key) -> std::optional<std::string> {
        const auto s = tree.get_child_optional(sec);
        if (!s) return std::nullopt;
        const auto v = s->get_optional<std::string>(key);
        if (!v) return std::nullopt;
        return *v;
    };

    RunConfig c;
    if (auto v = get("params", "scenario")) {
        c.scenario = static_cast<int>(detail::parse_int("params.scenario", *v));
        if (c.scenario < 0 || c.scenario > 4) throw ConfigError("config: params.scenario must be 0..4");
    }
    const double p0 = c.params.p, th0 = c.params.theta;
    if (c.scenario > 0) c.params = scenario(c.scenario, p0, th0);

    auto num = [&](const std::string& sec, const std::string& key, double& dst) {
        if (auto v = get(sec, key)) dst = detail::parse_double(sec + "." + key, *v);
    };
    ModelParams& m = c.params;
    num("params", "r", m.r);
    num("params", "alpha1", m.alpha1);
    num("params", "sigma1", m.sigma1);
    num("params", "alpha2", m.alpha2);
    num("params", "sigma2", m.sigma2);
    num("params", "rho", m.rho);
    num("params", "lam", m.lam);
    num("params", "mu", m.mu);
    num("params", "beta", m.beta);
    num("params", "p", m.p);
    num("params", "theta", m.theta);
    if (auto v = get("params", "liquid_risky")) m.liquid_risky = detail::parse_bool("params.liquid_risky", *v);

    if (auto v = get("grid", "n")) c.grid.n = static_cast<int>(detail::parse_int("grid.n", *v));
    if (auto v = get("grid", "z_lo")) c.grid.z_lo = detail::parse_double("grid.z_lo", *v);
    if (auto v = get("grid", "z_hi")) c.grid.z_hi = detail::parse_double("grid.z_hi", *v);
    if (c.grid.n < 3) throw ConfigError("config: grid.n must be at least 3");

    num("solve", "tol", c.solve.tol);
    if (auto v = get("solve", "max_iters"))
        c.solve.max_iters = static_cast<int>(detail::parse_int("solve.max_iters", *v));
    num("solve", "pi_cap", c.solve.pi_cap);
    num("solve", "d_cap", c.solve.d_cap);
    num("solve", "damping", c.solve.damping);
    if (auto v = get("solve", "boundary_mode")) {
        if (*v == "obstacle_pinned") c.solve.boundary_mode = BoundaryMode::obstacle_pinned;
        else if (*v == "extrapolated") c.solve.boundary_mode = BoundaryMode::extrapolated;
        else throw ConfigError("config: solve.boundary_mode must be obstacle_pinned or extrapolated");
    }
    if (!(c.solve.tol > 0.0)) throw ConfigError("config: solve.tol must be positive");
    if (c.solve.max_iters < 1) throw ConfigError("config: solve.max_iters must be at least 1");
    if (!(c.solve.damping > 0.0 && c.solve.damping <= 1.0)) throw ConfigError("config: solve.damping must be in (0, 1]");
    if (!(c.solve.pi_cap >= 0.0)) throw ConfigError("config: solve.pi_cap must be nonnegative");

    if (auto v = get("sweep", "scenarios")) {
        c.sweep.scenarios = detail::parse_list<int>("sweep.scenarios", *v, detail::parse_int);
        for (int s : c.sweep.scenarios)
            if (s < 1 || s > 4) throw ConfigError("config: sweep.scenarios entries must be 1..4");
    }
    if (auto v = get("sweep", "theta_list"))
        c.sweep.theta_list = detail::parse_list<double>("sweep.theta_list", *v, detail::parse_double);
    if (auto v = get("sweep", "p_list"))
        c.sweep.p_list = detail::parse_list<double>("sweep.p_list", *v, detail::parse_double);

    num("sim", "dt", c.sim.dt);
    num("sim", "T", c.sim.horizon);
    if (auto v = get("sim", "n_paths")) c.sim.n_paths = detail::parse_int("sim.n_paths", *v);
    if (auto v = get("sim", "seed")) {
        const auto s = detail::parse_int("sim.seed", *v);
        if (s < 0) throw ConfigError("config: sim.seed must be nonnegative");
        c.sim.master_seed = static_cast<std::uint64_t>(s);
    }
    if (auto v = get("sim", "antithetic")) c.sim.antithetic = detail::parse_bool("sim.antithetic", *v);
    const auto sx = get("sim", "start_x"), sy = get("sim", "start_y");
    if (sx.has_value() != sy.has_value()) throw ConfigError("config: sim.start_x and sim.start_y go together");
    if (sx) c.sim.start = Position{detail::parse_double("sim.start_x", *sx), detail::parse_double("sim.start_y", *sy)};
    num("sim", "consumption_scale", c.consumption_scale);
    try {
        check_config(c.sim);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    const ValidationReport rep = validate(c.params);
    if (!rep.ok()) throw ConfigError("config: invalid model parameters: " + rep.failures());
    return c;
}

inline RunConfig parse_config_text(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(in);
}

/// Help text listing every key.
inline std::string config_help()
{
    return R"(Configuration file: [section] headers, `key = value` lines, ';' or '#' comments.
  [params]  scenario (0 custom, 1..4 reference base), r, alpha1, sigma1, alpha2, sigma2,
            rho, lam, mu, beta, p, theta, liquid_risky (true/false)
  [grid]    n, z_lo, z_hi
  [solve]   tol, max_iters, pi_cap, d_cap, damping, boundary_mode (obstacle_pinned|extrapolated)
  [sweep]   scenarios, theta_list, p_list (comma-separated)
  [sim]     dt, T, n_paths, seed, start_x, start_y, antithetic, consumption_scale
Unknown sections or keys are errors.)";
}

}  // namespace notrade
