#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "maxplus/environment.hpp"
#include "maxplus/features.hpp"
#include "maxplus/rng.hpp"
#include "maxplus/solvers.hpp"

namespace maxplus {

// Greedy action for either algebra: evaluate the per-action Q-value from the
// state features and the kept coefficient columns, ties broken by the lowest
// action index. An action block with no kept column scores -inf (max-plus)
// or 0 (conventional), matching the respective Q-value conventions.
inline double greedy_action(const FeatureBank& bank, std::span<const double> theta,
                            std::span<const std::size_t> kept, std::span<const double> x) {
    if (theta.size() != kept.size())
        throw validation_error("greedy_action: theta/kept size mismatch");
    const std::size_t px = bank.state_count(), pu = bank.action_count();
    std::vector<double> block_value(pu, 0.0);
    if (bank.algebra == Algebra::max_plus) {
        const auto fx = state_features_mp(bank, x);
        for (double& v : block_value) v = ExtReal::neg_inf_raw();
        for (std::size_t t = 0; t < kept.size(); ++t) {
            const std::size_t k = kept[t] / px, j = kept[t] % px;
            const double cand = fx[j].v + theta[t];
            if (cand > block_value[k]) block_value[k] = cand;
        }
    } else {
        const auto fx = state_features_linear(bank, x);
        for (std::size_t t = 0; t < kept.size(); ++t) {
            const std::size_t k = kept[t] / px, j = kept[t] % px;
            block_value[k] += fx[j] * theta[t];
        }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < pu; ++k)
        if (block_value[k] > block_value[best]) best = k;
    if (bank.algebra == Algebra::max_plus && block_value[best] == ExtReal::neg_inf_raw())
        throw solver_error("greedy_action: no action has a finite Q-value at this state");
    return bank.actions[best];
}

// ---------------------------------------------------------------------------
// Policies. begin_instance(i) lets stochastic policies reseed per evaluation
// instance so reports stay reproducible under any instance ordering.
class Policy {
public:
    virtual ~Policy() = default;
    virtual double act(std::span<const double> x) = 0;
    virtual void begin_instance(std::size_t /*instance*/) {}
};

class GreedyPolicy final : public Policy {
public:
    GreedyPolicy(FeatureBank bank, std::vector<double> theta, std::vector<std::size_t> kept)
        : bank_(std::move(bank)), theta_(std::move(theta)), kept_(std::move(kept)) {
        bank_.validate();
        if (theta_.size() != kept_.size() || theta_.empty())
            throw validation_error("GreedyPolicy: theta/kept size mismatch");
        for (std::size_t col : kept_)
            if (col >= bank_.size())
                throw validation_error("GreedyPolicy: kept column out of range for the bank");
        for (double v : theta_)
            if (!std::isfinite(v))
                throw validation_error("GreedyPolicy: coefficients must be finite");
    }

    double act(std::span<const double> x) override {
        return greedy_action(bank_, theta_, kept_, x);
    }

private:
    FeatureBank bank_;
    std::vector<double> theta_;
    std::vector<std::size_t> kept_;
};

class ConstantPolicy final : public Policy {
public:
    explicit ConstantPolicy(double u) : u_(u) {}
    double act(std::span<const double>) override { return u_; }

private:
    double u_;
};

// Continuous saturated linear state feedback u = clamp(-K x); the baseline
// is NOT quantized to the discrete action set.
class LqrPolicy final : public Policy {
public:
    LqrPolicy(const Eigen::RowVector2d& k, double u_lo, double u_hi)
        : k_(k), lo_(u_lo), hi_(u_hi) {}

    double act(std::span<const double> x) override {
        const double u = -(k_(0) * x[0] + k_(1) * x[1]);
        return std::min(std::max(u, lo_), hi_);
    }

private:
    Eigen::RowVector2d k_;
    double lo_, hi_;
};

class RandomPolicy final : public Policy {
public:
    RandomPolicy(std::vector<double> actions, std::uint64_t seed)
        : actions_(std::move(actions)), seed_(seed), rng_(seed) {
        if (actions_.empty())
            throw validation_error("RandomPolicy: empty action set");
    }

    void begin_instance(std::size_t instance) override {
        rng_ = SplitMix64(seed_ + 0x51ed2701u * static_cast<std::uint64_t>(instance + 1));
    }

    double act(std::span<const double>) override { return actions_[rng_.pick(actions_.size())]; }

private:
    std::vector<double> actions_;
    std::uint64_t seed_;
    SplitMix64 rng_;
};

// ---------------------------------------------------------------------------
// Discounted LQR via the Riccati fixed point
//   P = Q + gamma A'PA - gamma^2 A'PB (R + gamma B'PB)^{-1} B'PA
// iterated from P = 0, gain K = gamma (R + gamma B'PB)^{-1} B'PA.
// Stabilization in the discounted sense means rho(sqrt(gamma) (A - BK)) < 1.
struct LqrSolution {
    Eigen::Matrix2d p = Eigen::Matrix2d::Zero();
    Eigen::RowVector2d k = Eigen::RowVector2d::Zero();
    double spectral_radius = 0.0;
    std::size_t iterations = 0;
};

inline LqrSolution lqr_gain(const DcMotorParams& params) {
    params.validate();
    const Eigen::Matrix2d& a = params.a_dyn;
    const Eigen::Vector2d& b = params.b_dyn;
    const Eigen::Matrix2d& q = params.q_cost;
    const double r = params.r_cost;
    const double g = params.gamma;

    LqrSolution sol;
    Eigen::Matrix2d p = Eigen::Matrix2d::Zero();
    constexpr std::size_t kMaxIter = 100000;
    constexpr double kTol = 1e-12;
    for (std::size_t it = 1; it <= kMaxIter; ++it) {
        const double s = r + g * b.dot(p * b);
        const Eigen::RowVector2d bpa = b.transpose() * p * a;
        const Eigen::Matrix2d pn =
            q + g * a.transpose() * p * a - (g * g / s) * bpa.transpose() * bpa;
        const double diff = (pn - p).cwiseAbs().maxCoeff();
        p = pn;
        if (diff <= kTol) {
            sol.iterations = it;
            break;
        }
        if (it == kMaxIter)
            throw solver_error("lqr_gain: Riccati iteration did not converge");
    }
    sol.p = p;
    const double s = r + g * b.dot(p * b);
    sol.k = (g / s) * (b.transpose() * p * a);

    const Eigen::Matrix2d closed = std::sqrt(g) * (a - b * sol.k);
    const Eigen::EigenSolver<Eigen::Matrix2d> eig(closed, /*computeEigenvectors=*/false);
    sol.spectral_radius = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (!(sol.spectral_radius < 1.0))
        throw solver_error("lqr_gain: closed loop is not stabilizing in the discounted sense");
    return sol;
}

// ---------------------------------------------------------------------------
// Deterministic discounted rollout from x0.
inline double rollout(const DcMotorParams& params, Policy& policy, std::span<const double> x0,
                      std::size_t horizon, double gamma) {
    if (horizon == 0)
        throw validation_error("rollout: horizon must be at least 1");
    std::vector<double> x(x0.begin(), x0.end());
    double value = 0.0, discount = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        const double u = policy.act(x);
        auto step = dc_step(params, x, u);
        value += discount * step.reward;
        discount *= gamma;
        x = std::move(step.x_plus);
    }
    return value;
}

struct RolloutReport {
    std::vector<double> policy_rewards, baseline_rewards;
    double mean_policy = 0.0, mean_baseline = 0.0;
    double normalized_score = 0.0; // mean_policy / mean_baseline; 1 from above ~ near-baseline
    std::size_t instances = 0, horizon = 0;
    std::uint64_t seed = 0;
    double gamma = 0.0;
};

// Evaluate a policy against a baseline from shared random initial states.
// All initial states are drawn up front from one seeded stream, so the
// draw sequence is independent of how either policy consumes randomness.
inline RolloutReport evaluate(const DcMotorParams& params, Policy& policy, Policy& baseline,
                              std::size_t instances, std::size_t horizon, double gamma,
                              std::uint64_t seed) {
    if (instances == 0)
        throw validation_error("evaluate: instances must be at least 1");
    params.validate();
    SplitMix64 rng(seed);
    std::vector<std::vector<double>> starts(instances);
    for (auto& x0 : starts) {
        x0.resize(params.state_box.dim());
        for (std::size_t d = 0; d < x0.size(); ++d)
            x0[d] = rng.uniform(params.state_box.lo[d], params.state_box.hi[d]);
    }

    RolloutReport rep;
    rep.instances = instances;
    rep.horizon = horizon;
    rep.seed = seed;
    rep.gamma = gamma;
    rep.policy_rewards.reserve(instances);
    rep.baseline_rewards.reserve(instances);
    for (std::size_t i = 0; i < instances; ++i) {
        policy.begin_instance(i);
        rep.policy_rewards.push_back(rollout(params, policy, starts[i], horizon, gamma));
        baseline.begin_instance(i);
        rep.baseline_rewards.push_back(rollout(params, baseline, starts[i], horizon, gamma));
    }
    double sp = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
        sp += rep.policy_rewards[i];
        sb += rep.baseline_rewards[i];
    }
    rep.mean_policy = sp / static_cast<double>(instances);
    rep.mean_baseline = sb / static_cast<double>(instances);
    // identical means (same policy both sides) must score exactly 1, even at 0
    rep.normalized_score =
        rep.mean_policy == rep.mean_baseline ? 1.0 : rep.mean_policy / rep.mean_baseline;
    return rep;
}

// ---------------------------------------------------------------------------
enum class RunOutcome { converged, diverged, max_iterations };

inline const char* to_string(RunOutcome o) {
    switch (o) {
        case RunOutcome::converged: return "converged";
        case RunOutcome::diverged: return "diverged";
        case RunOutcome::max_iterations: return "max-iterations";
    }
    return "?";
}

inline RunOutcome classify_trace(std::span<const TraceEntry> trace, double guard = 1e12) {
    if (trace.empty())
        throw validation_error("classify_trace: empty trace");
    for (const TraceEntry& e : trace)
        if (!std::isfinite(e.diff_inf) || !std::isfinite(e.theta_norm) || e.theta_norm > guard)
            return RunOutcome::diverged;
    if (trace.back().met_tol) return RunOutcome::converged;
    return RunOutcome::max_iterations;
}

} // namespace maxplus
