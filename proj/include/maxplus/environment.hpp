#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "maxplus/box.hpp"
#include "maxplus/errors.hpp"
#include "maxplus/rng.hpp"

namespace maxplus {

// One offline transition (x, u) -> (x_plus, r).
struct Sample {
    std::vector<double> x;
    double u = 0.0;
    std::vector<double> x_plus;
    double r = 0.0;

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    std::vector<Sample> samples;
    std::string env_id;
    std::uint64_t seed = 0;

    std::size_t size() const { return samples.size(); }
    std::size_t state_dim() const { return samples.empty() ? 0 : samples.front().x.size(); }

    bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// DC motor: linear dynamics with per-coordinate saturation to the state box,
// quadratic costs (reward = negative cost), five discrete torque levels.
struct DcMotorParams {
    Eigen::Matrix2d a_dyn;
    Eigen::Vector2d b_dyn;
    Eigen::Matrix2d q_cost; // state cost weight; reward carries the minus sign
    double r_cost = 0.0;    // action cost weight
    Box state_box;
    std::vector<double> actions;
    double gamma = 0.95;

    static DcMotorParams defaults() {
        DcMotorParams p;
        p.a_dyn << 1.0, 0.0049, 0.0, 0.9540;
        p.b_dyn << 0.0021, 0.8505;
        p.q_cost << 5.0, 0.0, 0.0, 0.01;
        p.r_cost = 0.01;
        const double pi = std::numbers::pi;
        p.state_box = Box({-pi, -16.0 * pi}, {pi, 16.0 * pi});
        p.actions = {-10.0, -5.0, 0.0, 5.0, 10.0};
        p.gamma = 0.95;
        return p;
    }

    void validate() const {
        if (gamma <= 0.0 || gamma >= 1.0)
            throw validation_error("DcMotorParams: gamma must lie in (0,1)");
        if (r_cost <= 0.0)
            throw validation_error("DcMotorParams: action cost weight must be positive");
        if (state_box.dim() != 2)
            throw validation_error("DcMotorParams: state box must be 2-dimensional");
        if (actions.empty())
            throw validation_error("DcMotorParams: empty action set");
    }
};

struct StepResult {
    std::vector<double> x_plus;
    double reward = 0.0;
};

// Reward is charged at the current (x, u); the successor saturates to the
// box coordinate-wise. u may be any real (the LQR baseline is continuous),
// not just a member of the discrete action set.
inline StepResult dc_step(const DcMotorParams& p, std::span<const double> x, double u) {
    if (x.size() != 2)
        throw validation_error("dc_step: state must be 2-dimensional");
    const Eigen::Vector2d xv(x[0], x[1]);
    const Eigen::Vector2d raw = p.a_dyn * xv + p.b_dyn * u;
    const std::array<double, 2> raw_arr{raw(0), raw(1)};
    StepResult out;
    out.x_plus = p.state_box.clamped(raw_arr);
    out.reward = -(xv.dot(p.q_cost * xv)) - p.r_cost * u * u;
    return out;
}

// Uniform offline dataset. Per sample the RNG stream is consumed in fixed
// order (x coordinates ascending, then the action index), so the content is
// pinned by (n, seed) alone, and a longer run extends a shorter one.
inline Dataset sample_uniform(const DcMotorParams& p, std::size_t n, std::uint64_t seed) {
    if (n == 0)
        throw validation_error("sample_uniform: n must be at least 1");
    p.validate();
    SplitMix64 rng(seed);
    Dataset d;
    d.env_id = "dc-motor";
    d.seed = seed;
    d.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.x.resize(2);
        for (std::size_t dim = 0; dim < 2; ++dim)
            s.x[dim] = rng.uniform(p.state_box.lo[dim], p.state_box.hi[dim]);
        s.u = p.actions[rng.pick(p.actions.size())];
        auto step = dc_step(p, s.x, s.u);
        s.x_plus = std::move(step.x_plus);
        s.r = step.reward;
        d.samples.push_back(std::move(s));
    }
    return d;
}

// ---------------------------------------------------------------------------
// Dataset persistence: CSV with the fixed header x1,x2,u,xp1,xp2,r, one
// sample per line, 17 significant digits so doubles round-trip exactly.
inline constexpr const char* kDatasetHeader = "x1,x2,u,xp1,xp2,r";

namespace detail {
inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_field(const std::string& field, std::size_t line_no) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw validation_error("dataset line " + std::to_string(line_no) +
                               ": non-numeric field '" + field + "'");
    return v;
}
} // namespace detail

inline void save_dataset(const Dataset& d, const std::string& path) {
    if (d.samples.empty())
        throw validation_error("save_dataset: no samples");
    if (d.state_dim() != 2)
        throw validation_error("save_dataset: format is fixed to 2-dimensional states");
    std::ofstream out(path, std::ios::binary); // binary: LF line endings everywhere
    if (!out)
        throw validation_error("save_dataset: cannot open '" + path + "' for writing");
    out << kDatasetHeader << '\n';
    for (const Sample& s : d.samples) {
        out << detail::fmt17(s.x[0]) << ',' << detail::fmt17(s.x[1]) << ','
            << detail::fmt17(s.u) << ',' << detail::fmt17(s.x_plus[0]) << ','
            << detail::fmt17(s.x_plus[1]) << ',' << detail::fmt17(s.r) << '\n';
    }
    if (!out)
        throw validation_error("save_dataset: write failed for '" + path + "'");
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw validation_error("load_dataset: cannot open '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line))
        throw validation_error("load_dataset: no samples in '" + path + "'");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kDatasetHeader)
        throw validation_error("dataset line 1: expected header '" +
                               std::string(kDatasetHeader) + "', got '" + line + "'");
    Dataset d;
    d.env_id = "dc-motor";
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos
                                                                           : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 6)
            throw validation_error("dataset line " + std::to_string(line_no) + ": expected 6 columns, got " +
                                   std::to_string(fields.size()));
        Sample s;
        s.x = {detail::parse_field(fields[0], line_no), detail::parse_field(fields[1], line_no)};
        s.u = detail::parse_field(fields[2], line_no);
        s.x_plus = {detail::parse_field(fields[3], line_no), detail::parse_field(fields[4], line_no)};
        s.r = detail::parse_field(fields[5], line_no);
        d.samples.push_back(std::move(s));
    }
    if (d.samples.empty())
        throw validation_error("load_dataset: no samples in '" + path + "'");
    return d;
}

// ---------------------------------------------------------------------------
// Deterministic finite MDP, used as an exactness oracle: with an exhaustive
// dataset the empirical Bellman operator coincides with the true one, so the
// solvers must reproduce plain Q-value iteration.
struct FiniteMdp {
    std::size_t n_states = 0, n_actions = 0;
    std::vector<std::size_t> next;  // row-major [s * n_actions + a]
    std::vector<double> reward;
    double gamma = 0.9;

    std::size_t next_state(std::size_t s, std::size_t a) const { return next[s * n_actions + a]; }
    double reward_at(std::size_t s, std::size_t a) const { return reward[s * n_actions + a]; }

    void validate() const {
        if (n_states == 0 || n_actions == 0)
            throw validation_error("FiniteMdp: empty state or action set");
        if (next.size() != n_states * n_actions || reward.size() != n_states * n_actions)
            throw validation_error("FiniteMdp: table size mismatch");
        if (gamma <= 0.0 || gamma >= 1.0)
            throw validation_error("FiniteMdp: gamma must lie in (0,1)");
        for (std::size_t ns : next)
            if (ns >= n_states)
                throw validation_error("FiniteMdp: transition target out of range");
    }
};

// Q-iteration to a sup-norm Bellman residual of at most tol. The stopping
// rule uses the standard bound ||Q_k - Q*|| <= gamma/(1-gamma) * diff_k, so
// the returned table is within tol of Q* as well.
inline std::vector<double> finite_mdp_value_iteration(const FiniteMdp& m, double tol,
                                                      std::size_t max_iter = 1000000) {
    m.validate();
    if (tol <= 0.0)
        throw validation_error("finite_mdp_value_iteration: tol must be positive");
    std::vector<double> q(m.n_states * m.n_actions, 0.0), qn(q.size());
    const double stop = tol * (1.0 - m.gamma) / m.gamma;
    for (std::size_t it = 0; it < max_iter; ++it) {
        double diff = 0.0;
        for (std::size_t s = 0; s < m.n_states; ++s) {
            for (std::size_t a = 0; a < m.n_actions; ++a) {
                const std::size_t ns = m.next_state(s, a);
                double best = q[ns * m.n_actions];
                for (std::size_t ap = 1; ap < m.n_actions; ++ap)
                    best = std::max(best, q[ns * m.n_actions + ap]);
                const double v = m.reward_at(s, a) + m.gamma * best;
                diff = std::max(diff, std::abs(v - q[s * m.n_actions + a]));
                qn[s * m.n_actions + a] = v;
            }
        }
        std::swap(q, qn);
        if (diff <= stop) return q;
    }
    throw solver_error("finite_mdp_value_iteration: no convergence within iteration budget");
}

// One sample per (state, action), states embedded as 1-D reals and actions
// as their indices, ordered s-major. n = n_states * n_actions.
inline Dataset finite_mdp_dataset(const FiniteMdp& m) {
    m.validate();
    Dataset d;
    d.env_id = "finite-mdp";
    d.samples.reserve(m.n_states * m.n_actions);
    for (std::size_t s = 0; s < m.n_states; ++s) {
        for (std::size_t a = 0; a < m.n_actions; ++a) {
            Sample smp;
            smp.x = {static_cast<double>(s)};
            smp.u = static_cast<double>(a);
            smp.x_plus = {static_cast<double>(m.next_state(s, a))};
            smp.r = m.reward_at(s, a);
            d.samples.push_back(std::move(smp));
        }
    }
    return d;
}

// State box enclosing the embedded states with unit-width bins per state.
inline Box finite_mdp_state_box(const FiniteMdp& m) {
    return Box({-0.5}, {static_cast<double>(m.n_states) - 0.5});
}

} // namespace maxplus
