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

// Monte Carlo evaluation of a feedback policy: Euler-Maruyama for the
// liquid/illiquid wealth pair, projection onto the no-trade wedge at the end
// of every step, left-endpoint quadrature of the discounted utility.
//
// Paths are grouped into units (an antithetic pair, or a single path). Unit
// i draws from the Philox stream (master_seed, i), so the result does not
// depend on scheduling or on the number of worker threads.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "notrade/model.hpp"
#include "notrade/policy.hpp"

namespace notrade {

/// Philox4x32-10 block function.
struct Philox4x32 {
    using ctr_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static ctr_type block(ctr_type c, key_type k)
    {
        for (int i = 0; i < 10; ++i) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
            k[0] += 0x9E3779B9u;
            k[1] += 0xBB67AE85u;
        }
        return c;
    }
};

/// 64-bit uniform random bit generator over the Philox stream
/// counter = (block lo, block hi, stream lo, stream hi), key = seed.
class PhiloxEngine {
public:
    using result_type = std::uint64_t;

    PhiloxEngine(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          s0_(static_cast<std::uint32_t>(stream)), s1_(static_cast<std::uint32_t>(stream >> 32))
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()()
    {
        if (pos_ == kWords) refill();
        return buf_[pos_++];
    }

    std::uint64_t blocks_used() const { return block_; }

private:
    static constexpr int kBlocks = 4;
    static constexpr int kWords = 2 * kBlocks;

    // kBlocks consecutive counters in lockstep; same output as one at a time
    void refill()
    {
        std::uint32_t a[kBlocks], b[kBlocks], c[kBlocks], d[kBlocks];
        for (int j = 0; j < kBlocks; ++j) {
            const std::uint64_t n = block_ + j;
            a[j] = static_cast<std::uint32_t>(n);
            b[j] = static_cast<std::uint32_t>(n >> 32);
            c[j] = s0_;
            d[j] = s1_;
        }
        std::uint32_t k0 = key_[0], k1 = key_[1];
        for (int i = 0; i < 10; ++i) {
            for (int j = 0; j < kBlocks; ++j) {
                const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * a[j];
                const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[j];
                const std::uint32_t na = static_cast<std::uint32_t>(p1 >> 32) ^ b[j] ^ k0;
                const std::uint32_t nc = static_cast<std::uint32_t>(p0 >> 32) ^ d[j] ^ k1;
                b[j] = static_cast<std::uint32_t>(p1);
                d[j] = static_cast<std::uint32_t>(p0);
                a[j] = na;
                c[j] = nc;
            }
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        for (int j = 0; j < kBlocks; ++j) {
            buf_[2 * j] = (std::uint64_t{a[j]} << 32) | b[j];
            buf_[2 * j + 1] = (std::uint64_t{c[j]} << 32) | d[j];
        }
        block_ += kBlocks;
        pos_ = 0;
    }

    Philox4x32::key_type key_;
    std::uint32_t s0_, s1_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, kWords> buf_{};
    int pos_ = kWords;
};

struct SimConfig {
    double dt = 1e-3;
    double horizon = 200.0;
    std::int64_t n_paths = 100000;
    std::uint64_t master_seed = 20240601;
    std::optional<Position> start;  ///< default: NT midpoint with x + y = 1
    bool antithetic = true;
    int jobs = 1;
    double utility_floor = -1e6;  ///< tail credited to a p<0 path that hits x = 0

    std::int64_t n_steps() const { return static_cast<std::int64_t>(std::ceil(horizon / dt - 1e-9)); }
};

inline void check_config(const SimConfig& c)
{
    if (!(c.dt > 0.0)) throw std::invalid_argument("sim: dt must be positive");
    if (!(c.horizon >= c.dt)) throw std::invalid_argument("sim: horizon must be at least dt");
    if (c.n_paths < 1) throw std::invalid_argument("sim: n_paths must be at least 1");
    if (c.jobs < 1) throw std::invalid_argument("sim: jobs must be at least 1");
}

/// Feedback controls tabulated on the NT nodes: pi(z), d(z) = c/(x+y) and
/// the flow-utility factor g(z) = (d^theta (1-z)^(1-theta))^p / p, linear in
/// between, clamped outside. Reflection at eta2 / eta1.
class ControlTable {
public:
    struct Ctl {
        double pi = 0.0;
        double d = 0.0;
        double g = 0.0;
    };

    ControlTable() = default;

    /// Optimal controls of `f`; consumption_scale multiplies d (a value
    /// other than 1 gives a deliberately suboptimal policy).
    static ControlTable from_field(const PolicyField& f, double consumption_scale = 1.0)
    {
        ControlTable t;
        const ModelParams& m = f.params();
        const Grid& g = f.solution().grid;
        t.z0_ = f.z_nt_lo();
        t.inv_h_ = 1.0 / g.h;
        t.eta2 = f.eta2();
        t.eta1 = f.eta1();
        const int cnt = static_cast<int>(std::lround((f.z_nt_hi() - f.z_nt_lo()) / g.h)) + 1;
        std::vector<Ctl> v(cnt);
        for (int j = 0; j < cnt; ++j) {
            const double z = t.z0_ + j * g.h;
            v[j].pi = f.pi_at(z);
            v[j].d = consumption_scale * f.d_at(z);
            v[j].g = v[j].d > 0.0 ? flow_utility(z, v[j].d, m) : 0.0;
        }
        t.build(v);
        return t;
    }

    /// Constant controls on the whole line with the given reflection bounds.
    static ControlTable constant(double pi, double d, double g, double eta2, double eta1)
    {
        ControlTable t;
        t.z0_ = 0.0;
        t.inv_h_ = 1.0;
        t.eta2 = eta2;
        t.eta1 = eta1;
        t.build({Ctl{pi, d, g}, Ctl{pi, d, g}});
        return t;
    }

    Ctl at(double z) const
    {
        double s = (z - z0_) * inv_h_;
        s = std::clamp(s, 0.0, last_);
        const int k = std::min(static_cast<int>(s), static_cast<int>(node_.size()) - 2);
        const double t = s - k;
        const Node& n = node_[k];
        return {n.pi + t * n.dpi, n.d + t * n.dd, n.g + t * n.dg};
    }

    double eta2 = -std::numeric_limits<double>::infinity();
    double eta1 = std::numeric_limits<double>::infinity();

private:
    struct Node {
        double pi, dpi, d, dd, g, dg;
    };

    void build(const std::vector<Ctl>& v)
    {
        std::vector<Ctl> w = v;
        if (w.size() == 1) w.push_back(w[0]);
        node_.resize(w.size());
        for (std::size_t k = 0; k < w.size(); ++k) {
            const Ctl& b = k + 1 < w.size() ? w[k + 1] : w[k];
            node_[k] = {w[k].pi, b.pi - w[k].pi, w[k].d, b.d - w[k].d, w[k].g, b.g - w[k].g};
        }
        last_ = static_cast<double>(w.size() - 1);
    }

    double z0_ = 0.0;
    double inv_h_ = 1.0;
    double last_ = 1.0;
    std::vector<Node> node_;
};

struct StepResult {
    Position pos;
    double dL = 0.0;  ///< liquid wealth spent on purchases
    double dM = 0.0;  ///< illiquid value sold
    bool aborted = false;
};

/// One Euler-Maruyama step of (X, Y) under frozen (pi, c), followed by the
/// projection back onto [eta2, eta1] along the buy or sell direction.
inline StepResult step(const Position& s, double pi, double c, const ModelParams& m, double eta2, double eta1,
                       double dW1, double dW2, double dt)
{
    StepResult out;
    const double s1 = m.liquid_risky ? m.sigma1 : 0.0;
    const double a1 = m.alpha1_eff();
    double x = s.x + ((m.r + a1 * pi) * s.x - c) * dt + s1 * pi * s.x * dW1;
    double y = s.y + (m.r + m.alpha2) * s.y * dt + m.sigma2 * s.y * dW2;
    const double w = x + y;
    if (!(w > 0.0)) {
        out.pos = {x, y};
        out.aborted = true;
        return out;
    }
    const double z = y / w;
    if (z > eta1) {
        out.dM = (y - eta1 * w) / (1.0 - m.mu * eta1);
        x += (1.0 - m.mu) * out.dM;
        y -= out.dM;
    } else if (z < eta2) {
        out.dL = (eta2 * w - y) / (1.0 - m.lam * (1.0 - eta2));
        x -= out.dL;
        y += (1.0 - m.lam) * out.dL;
    }
    out.pos = {x, y};
    out.aborted = !(x >= 0.0) || !in_solvency_closure(out.pos, m);
    return out;
}

struct PathOutcome {
    double utility = 0.0;   ///< discounted utility up to the horizon
    double tail_mass = 0.0;  ///< e^(-beta T) (X_T + Y_T)^p
    double L = 0.0;
    double M = 0.0;
    double z_min = std::numeric_limits<double>::infinity();
    double z_max = -std::numeric_limits<double>::infinity();
    bool bankrupt = false;
};

namespace detail {

/// Binomial-series coefficients of (1 + e)^q up to e^8.
struct Pow1p {
    double q = 1.0;
    std::array<double, 9> c{};

    explicit Pow1p(double exponent = 1.0) : q(exponent)
    {
        c[0] = 1.0;
        for (int i = 1; i < 9; ++i) c[i] = c[i - 1] * (q - (i - 1)) / i;
    }

    double operator()(double e) const
    {
        if (std::abs(e) > 0.03) return std::pow(1.0 + e, q);
        double s = c[8];
        for (int i = 7; i >= 0; --i) s = c[i] + e * s;
        return s;
    }
};

/// Path state at unit total wealth: z, wealth W and the discounted weight
/// P = e^(-beta t) W^p. The Euler step is 1-homogeneous in (x, y) under
/// feedback controls, so scaling out W leaves the scheme unchanged.
struct PathState {
    double z = 0.0;
    double W = 1.0;
    double P = 1.0;
    double sum = 0.0;
    PathOutcome out;
    bool alive = true;
};

struct StepConsts {
    double dt, disc, r, a1, s1, a2g, s2, lam, mu, p;
    double rho, rho_c, sqdt;
    Pow1p growth;
};

inline StepConsts step_consts(const ModelParams& m, double dt)
{
    StepConsts k;
    k.dt = dt;
    k.disc = std::exp(-m.beta * dt);
    k.r = m.r;
    k.a1 = m.alpha1_eff();
    k.s1 = m.liquid_risky ? m.sigma1 : 0.0;
    k.a2g = 1.0 + (m.r + m.alpha2) * dt;
    k.s2 = m.sigma2;
    k.lam = m.lam;
    k.mu = m.mu;
    k.p = m.p;
    k.rho = m.rho;
    k.rho_c = std::sqrt(1.0 - m.rho * m.rho);
    k.sqdt = std::sqrt(dt);
    k.growth = Pow1p(m.p);
    return k;
}

inline void advance(PathState& s, const ControlTable& tab, const StepConsts& k, double dW1, double dW2)
{
    if (!s.alive) return;
    const ControlTable::Ctl c = tab.at(s.z);
    s.sum += s.P * c.g;
    const double x0 = 1.0 - s.z;
    const double xn = x0 + ((k.r + k.a1 * c.pi) * x0 - c.d) * k.dt + k.s1 * c.pi * x0 * dW1;
    const double yn = s.z * (k.a2g + k.s2 * dW2);
    double wn = xn + yn;
    if (!(wn > 0.0) || !(xn + yn * (1.0 - k.mu) >= 0.0)) {
        s.alive = false;
        s.out.bankrupt = true;
        return;
    }
    double zn = yn / wn;
    if (zn > tab.eta1) {
        const double dm = (yn - tab.eta1 * wn) / (1.0 - k.mu * tab.eta1);
        wn -= k.mu * dm;
        zn = tab.eta1;
        s.out.M += dm * s.W;
    } else if (zn < tab.eta2) {
        const double dl = (tab.eta2 * wn - yn) / (1.0 - k.lam * (1.0 - tab.eta2));
        wn -= k.lam * dl;
        zn = tab.eta2;
        s.out.L += dl * s.W;
    }
    if (!(zn < 1.0)) {
        s.alive = false;
        s.out.bankrupt = true;
        return;
    }
    s.P *= k.disc * k.growth(wn - 1.0);
    s.W *= wn;
    s.z = zn;
    s.out.z_min = std::min(s.out.z_min, zn);
    s.out.z_max = std::max(s.out.z_max, zn);
}

inline void finish(PathState& s, const StepConsts& k, double floor)
{
    s.out.utility = s.sum * k.dt;
    if (s.alive) s.out.tail_mass = s.P;
    else if (k.p < 0.0) s.out.utility += floor;
}

}  // namespace detail

/// Simulates one unit: a single path, or an antithetic pair sharing the
/// normals with opposite signs. Returns one or two outcomes.
inline std::vector<PathOutcome> simulate_unit(const ControlTable& tab, const ModelParams& m, const SimConfig& cfg,
                                              double z_start, std::uint64_t unit, bool pair)
{
    const detail::StepConsts k = detail::step_consts(m, cfg.dt);
    PhiloxEngine eng(cfg.master_seed, unit);
    boost::random::normal_distribution<double> nd;
    detail::PathState a, b;
    a.z = b.z = z_start;
    const std::int64_t n = cfg.n_steps();
    for (std::int64_t i = 0; i < n; ++i) {
        const double g1 = nd(eng), g2 = nd(eng);
        const double dW1 = k.sqdt * g1;
        const double dW2 = k.sqdt * (k.rho * g1 + k.rho_c * g2);
        detail::advance(a, tab, k, dW1, dW2);
        if (pair) detail::advance(b, tab, k, -dW1, -dW2);
    }
    detail::finish(a, k, cfg.utility_floor);
    if (!pair) return {a.out};
    detail::finish(b, k, cfg.utility_floor);
    return {a.out, b.out};
}

struct SimResult {
    double estimate = 0.0;
    double std_error = std::numeric_limits<double>::quiet_NaN();  ///< NaN when fewer than two units
    std::int64_t n_paths = 0;
    std::int64_t n_units = 0;
    std::int64_t n_steps = 0;
    double dt = 0.0;
    double horizon = 0.0;
    double truncation_factor = 0.0;  ///< e^(-beta T)
    double truncation_bound = 0.0;   ///< sup|u| * mean e^(-beta T) (X_T+Y_T)^p
    std::int64_t bankrupt_paths = 0;
    double mean_L = 0.0;
    double mean_M = 0.0;
    double z_min = 0.0;
    double z_max = 0.0;
    Position start;

    bool has_std_error() const { return std::isfinite(std_error); }
};

/// Runs cfg.n_paths paths of the tabulated policy from `start` (W scaled to
/// 1 internally, then rescaled). `u_sup` is the bound on |u| used for the
/// truncation term.
inline SimResult simulate_table(const ControlTable& tab, const ModelParams& m, const SimConfig& cfg,
                                const Position& start, double u_sup)
{
    check_config(cfg);
    const double w0 = start.total();
    if (!(w0 > 0.0)) throw std::invalid_argument("simulate: start needs x + y > 0");
    const double z0 = start.z();
    const bool pairs = cfg.antithetic && cfg.n_paths > 1;
    const std::int64_t n_units = pairs ? (cfg.n_paths + 1) / 2 : cfg.n_paths;

    struct Unit {
        double mean = 0.0;
        double weight = 0.0;
        double tail = 0.0, L = 0.0, M = 0.0;
        double z_min = 0.0, z_max = 0.0;
        int bankrupt = 0;
    };
    std::vector<Unit> units(static_cast<std::size_t>(n_units));
    auto work = [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const bool pair = pairs && !(i == n_units - 1 && cfg.n_paths % 2 == 1);
            const auto outs = simulate_unit(tab, m, cfg, z0, static_cast<std::uint64_t>(i), pair);
            Unit& u = units[static_cast<std::size_t>(i)];
            u.z_min = std::numeric_limits<double>::infinity();
            u.z_max = -std::numeric_limits<double>::infinity();
            for (const auto& o : outs) {
                u.mean += o.utility;
                u.tail += o.tail_mass;
                u.L += o.L;
                u.M += o.M;
                u.z_min = std::min(u.z_min, o.z_min);
                u.z_max = std::max(u.z_max, o.z_max);
                u.bankrupt += o.bankrupt;
            }
            u.weight = static_cast<double>(outs.size());
            u.mean /= u.weight;
        }
    };
    const int jobs = static_cast<int>(std::min<std::int64_t>(cfg.jobs, n_units));
    if (jobs <= 1) {
        work(0, n_units);
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back(work, n_units * j / jobs, n_units * (j + 1) / jobs);
        for (auto& t : pool) t.join();
    }

    // ordered reduction
    SimResult r;
    r.n_paths = cfg.n_paths;
    r.n_units = n_units;
    r.n_steps = cfg.n_steps();
    r.dt = cfg.dt;
    r.horizon = cfg.horizon;
    r.start = start;
    double wsum = 0.0, acc = 0.0, tail = 0.0, L = 0.0, M = 0.0;
    r.z_min = std::numeric_limits<double>::infinity();
    r.z_max = -std::numeric_limits<double>::infinity();
    for (const Unit& u : units) {
        wsum += u.weight;
        acc += u.weight * u.mean;
        tail += u.tail;
        L += u.L;
        M += u.M;
        r.z_min = std::min(r.z_min, u.z_min);
        r.z_max = std::max(r.z_max, u.z_max);
        r.bankrupt_paths += u.bankrupt;
    }
    const double scale = std::pow(w0, m.p);
    const double est = acc / wsum;
    if (n_units >= 2) {
        double ss = 0.0;
        for (const Unit& u : units) ss += u.weight * u.weight * (u.mean - est) * (u.mean - est);
        r.std_error = scale * std::sqrt(ss / (wsum * wsum) * static_cast<double>(n_units) / (n_units - 1));
    }
    r.estimate = scale * est;
    r.truncation_factor = std::exp(-m.beta * r.n_steps * cfg.dt);
    r.truncation_bound = scale * u_sup * tail / wsum;
    r.mean_L = w0 * L / wsum;
    r.mean_M = w0 * M / wsum;
    return r;
}

/// NT midpoint at unit total wealth.
inline Position nt_midpoint(const PolicyField& f)
{
    const double z = 0.5 * (f.eta2() + f.eta1());
    return {1.0 - z, z};
}

/// sup |u| over the grid.
inline double u_sup(const PolicyField& f) { return f.solution().scale(); }

/// Simulates the optimal feedback policy of `f`; a start outside NT is first
/// moved onto the wedge by the initial trade.
inline SimResult simulate(const PolicyField& f, const SimConfig& cfg, double consumption_scale = 1.0)
{
    const Position start = cfg.start.value_or(nt_midpoint(f));
    if (classify(start, f) == PositionRegion::FORCED_LIQUIDATION)
        throw std::invalid_argument("simulate: start must lie in the solvency region");
    const Position s0 = initial_jump(start, f);
    SimResult r = simulate_table(ControlTable::from_field(f, consumption_scale), f.params(), cfg, s0, u_sup(f));
    r.start = start;
    return r;
}

struct ConsistencyReport {
    double value = 0.0;        ///< v(start) from the solver
    double estimate = 0.0;
    double difference = 0.0;   ///< estimate - value
    double relative = 0.0;     ///< difference / |value|
    double tolerance = 0.0;    ///< 3 std_error + truncation_bound
    std::string verdict;       ///< consistent | inconsistent | undetermined
    bool consistent() const { return verdict == "consistent"; }
};

inline ConsistencyReport compare_to_solution(const SimResult& r, const PolicyField& f, const Position& start)
{
    ConsistencyReport c;
    c.value = value(start, f).value;
    c.estimate = r.estimate;
    c.difference = r.estimate - c.value;
    c.relative = c.difference / std::abs(c.value);
    if (!r.has_std_error()) {
        c.tolerance = std::numeric_limits<double>::quiet_NaN();
        c.verdict = "undetermined";
        return c;
    }
    c.tolerance = 3.0 * r.std_error + r.truncation_bound;
    c.verdict = std::abs(c.difference) <= c.tolerance ? "consistent" : "inconsistent";
    return c;
}

}  // namespace notrade
