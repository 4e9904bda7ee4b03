#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "maxplus/bellman.hpp"
#include "maxplus/environment.hpp"
#include "maxplus/features.hpp"
#include "maxplus/mp_matrix.hpp"

namespace maxplus {

struct SolverConfig {
    double gamma = 0.95;
    double eps = 1e-6;          // termination tolerance on ||theta_next - theta||_inf
    bool rel = false;           // true: tolerance is relative to ||theta||_inf
    std::size_t max_iter = 1000;
    double lambda = 1e-8;       // ridge coefficient (standard_fqi only)
    double guard = 1e12;        // overflow guard on ||theta||_inf
    std::optional<std::vector<double>> warm_start; // default start is the zero vector

    void validate() const {
        if (gamma <= 0.0 || gamma >= 1.0)
            throw validation_error("SolverConfig: gamma must lie in (0,1)");
        if (eps <= 0.0)
            throw validation_error("SolverConfig: eps must be positive");
        if (max_iter == 0)
            throw validation_error("SolverConfig: max_iter must be at least 1");
        if (lambda < 0.0)
            throw validation_error("SolverConfig: lambda must be nonnegative");
        if (guard <= 0.0)
            throw validation_error("SolverConfig: guard must be positive");
    }
};

struct TraceEntry {
    std::size_t iter = 0;       // 1-based count of operator applications
    double diff_inf = 0.0;      // ||theta_next - theta||_inf for this application
    double delta = 0.0;         // accumulated shift after this application
    double ms = 0.0;            // wall time of this application
    double residual_half = 0.0; // this application's shift increment
    double theta_norm = 0.0;    // ||theta_next||_inf
    bool met_tol = false;
};

struct SolverResult {
    std::vector<double> theta;
    double delta = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    bool diverged = false;
    std::vector<TraceEntry> trace;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

// Shared termination loop. `step` maps theta to (theta_next, shift
// increment). Non-finite or guard-exceeding iterates either flag the run as
// diverged (the reportable outcome of the conventional baseline) or abort
// (the max-plus maps are gamma-contractions; escaping the guard means the
// inputs are broken, not the experiment).
template <typename Step>
SolverResult run_fixed_point(Step&& step, std::size_t p, const SolverConfig& cfg,
                             const char* who, bool nonfinite_is_divergence) {
    cfg.validate();
    std::vector<double> theta;
    if (cfg.warm_start) {
        if (cfg.warm_start->size() != p)
            throw validation_error(std::string(who) + ": warm start has wrong dimension");
        for (double v : *cfg.warm_start)
            if (!std::isfinite(v))
                throw validation_error(std::string(who) + ": warm start must be finite");
        theta = *cfg.warm_start;
    } else {
        theta.assign(p, 0.0);
    }

    SolverResult res;
    double delta = 0.0;
    for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        auto [next, residual_half] = step(theta);
        const double ms = elapsed_ms(t0);

        bool finite = true;
        for (double v : next)
            if (!std::isfinite(v)) { finite = false; break; }
        double norm_next = finite ? inf_norm(next) : std::numeric_limits<double>::infinity();
        const bool guarded = !finite || norm_next > cfg.guard;
        if (guarded && !nonfinite_is_divergence)
            throw solver_error(std::string(who) + ": iterate escaped the overflow guard "
                               "(non-finite or oversized coefficients)");

        const double diff = finite ? inf_norm_diff(next, theta)
                                   : std::numeric_limits<double>::infinity();
        delta = cfg.gamma * delta + residual_half;
        const bool met = !guarded &&
                         (cfg.rel ? diff <= cfg.eps * inf_norm(theta) : diff <= cfg.eps);
        res.trace.push_back({it, diff, delta, ms, residual_half, norm_next, met});
        theta = std::move(next);
        if (guarded) {
            res.diverged = true;
            break;
        }
        if (met) {
            res.converged = true;
            break;
        }
    }
    res.theta = std::move(theta);
    res.delta = delta;
    res.iterations = res.trace.size();
    return res;
}

} // namespace detail

// ---------------------------------------------------------------------------
// The max-plus regression step theta -> D(theta): right-hand side
// b = G (x) (gamma theta), then the greatest subsolution of F (x) c <= b.
// Row asticity of G keeps b finite; double asticity of F keeps c finite.
// Exposed as a class so contraction properties can be probed directly.
//
// F is held as a column-compressed list of its finite entries. Feature
// matrices from action-indexed banks are mostly -inf (a basis element is
// finite only at its own action), so this keeps per-iteration memory
// traffic proportional to the finite entries instead of the dense shape.
// The residuation and the achieved-image pass visit exactly the finite
// entries the dense loops would, and min/max are visit-order independent,
// so results are unchanged.
class MpFixedPointMap {
public:
    MpFixedPointMap(MpMatrix f, MpMatrix g, double gamma)
        : g_(std::move(g)), gamma_(gamma) {
        if (f.rows() != g_.rows() || f.cols() != g_.cols())
            throw validation_error("mp solver: feature/backup shape mismatch");
        if (gamma_ <= 0.0 || gamma_ >= 1.0)
            throw validation_error("mp solver: gamma must lie in (0,1)");
        if (!astic_check(f).doubly())
            throw validation_error("mp solver: feature matrix must be doubly R-astic "
                                   "(validate and prune the system first)");
        if (!astic_check(g_).row)
            throw validation_error("mp solver: backup matrix must be row R-astic");
        if (f.rows() > std::numeric_limits<std::uint32_t>::max())
            throw validation_error("mp solver: row count exceeds the index type");
        rows_ = f.rows();
        cols_ = f.cols();
        col_ptr_.assign(cols_ + 1, 0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                if (f(i, j).finite()) ++col_ptr_[j + 1];
        for (std::size_t j = 0; j < cols_; ++j) col_ptr_[j + 1] += col_ptr_[j];
        row_idx_.resize(col_ptr_[cols_]);
        val_.resize(col_ptr_[cols_]);
        std::vector<std::size_t> cursor(col_ptr_.begin(), col_ptr_.end() - 1);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) {
                const ExtReal e = f(i, j);
                if (!e.finite()) continue;
                row_idx_[cursor[j]] = static_cast<std::uint32_t>(i);
                val_[cursor[j]] = e.v;
                ++cursor[j];
            }
    }

    std::size_t dim() const { return cols_; }

    struct Applied {
        std::vector<double> theta;
        double residual_half; // half the regression residual of this application
    };

    Applied apply(std::span<const double> theta) const {
        if (theta.size() != cols_)
            throw validation_error("mp solver: theta has wrong dimension");
        const auto scaled = scale(theta, gamma_);
        const auto b = mp_apply(g_, std::span<const double>(scaled));
        // Greatest subsolution of F (x) c <= b, column by column. Double
        // R-asticity (checked in the constructor) guarantees every column
        // holds a finite entry, so every coefficient leaves +inf behind.
        Applied out;
        out.theta.resize(cols_);
        for (std::size_t j = 0; j < cols_; ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k)
                best = std::min(best, b[row_idx_[k]].v - val_[k]);
            out.theta[j] = best;
        }
        // Achieved image F (x) theta over the same finite entries (row
        // asticity keeps every component finite), then the residual.
        std::vector<double> fc(rows_, ExtReal::neg_inf_raw());
        for (std::size_t j = 0; j < cols_; ++j) {
            const double cj = out.theta[j];
            for (std::size_t k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) {
                const double cand = val_[k] + cj;
                double& slot = fc[row_idx_[k]];
                if (cand > slot) slot = cand;
            }
        }
        double residual = 0.0;
        for (std::size_t i = 0; i < rows_; ++i)
            residual = std::max(residual, std::abs(fc[i] - b[i].v));
        out.residual_half = residual / 2.0;
        return out;
    }

private:
    MpMatrix g_;
    std::vector<std::size_t> col_ptr_;
    std::vector<std::uint32_t> row_idx_;
    std::vector<double> val_;
    std::size_t rows_ = 0, cols_ = 0;
    double gamma_;
};

// Fitted Q-iteration in the max-plus algebra: iterate the regression step on
// the n-row system. Per-iteration cost is O(np).
inline SolverResult mp_fqi(const MpMatrix& f, const MpMatrix& g, const SolverConfig& cfg) {
    MpFixedPointMap map(f, g, cfg.gamma);
    return detail::run_fixed_point(
        [&map](std::span<const double> th) {
            auto a = map.apply(th);
            return std::pair<std::vector<double>, double>{std::move(a.theta), a.residual_half};
        },
        map.dim(), cfg, "mp_fqi", /*nonfinite_is_divergence=*/false);
}

// Variational variant: identical loop on the test-projected q x p system,
// making the per-iteration cost O(pq), independent of the sample count.
inline SolverResult v_mp_fqi(const MpMatrix& f_proj, const MpMatrix& g_proj,
                             const SolverConfig& cfg) {
    MpFixedPointMap map(f_proj, g_proj, cfg.gamma);
    return detail::run_fixed_point(
        [&map](std::span<const double> th) {
            auto a = map.apply(th);
            return std::pair<std::vector<double>, double>{std::move(a.theta), a.residual_half};
        },
        map.dim(), cfg, "v_mp_fqi", /*nonfinite_is_divergence=*/false);
}

// ---------------------------------------------------------------------------
// Compile the p x p fixed-point matrix C: column j is the infinity-norm
// regression of backup column j onto the feature span, so that
// theta -> C (x) (gamma theta) iterates the whole Bellman update with
// per-iteration cost O(p^2), independent of n. Compile cost is O(n p^2).
//
// A -inf backup entry is representable: the greatest subsolution simply
// pins every feature active in that row to -inf. What is not representable
// is a column whose finite targets end up covered by no finite feature
// coefficient; that raises an error naming the column.
inline MpMatrix build_fixed_point_matrix(const MpMatrix& f, const MpMatrix& g) {
    if (f.rows() != g.rows() || f.cols() != g.cols())
        throw validation_error("build_fixed_point_matrix: feature/backup shape mismatch");
    if (!astic_check(f).doubly())
        throw validation_error("build_fixed_point_matrix: feature matrix must be doubly "
                               "R-astic (validate and prune the system first)");
    const MpMatrix ft = f.transposed();
    const std::size_t n = f.rows(), p = f.cols();
    MpMatrix c(p, p);
    std::vector<ExtReal> b(n);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) b[i] = g(i, j);
        const auto col = greatest_subsolution_t(ft, std::span<const ExtReal>(b));
        const auto fc = mp_apply(f, std::span<const ExtReal>(col));
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!b[i].finite()) continue; // fc[i] is -inf too: every feature active here was pinned
            if (!fc[i].finite())
                throw solver_error("build_fixed_point_matrix: backup column " +
                                   std::to_string(j) +
                                   " cannot be represented in the feature span");
            residual = std::max(residual, std::abs(fc[i].v - b[i].v));
        }
        for (std::size_t row = 0; row < p; ++row)
            c(row, j) = col[row].finite() ? ExtReal{col[row].v + residual / 2.0}
                                          : ExtReal::neg_inf();
    }
    return c;
}

// Iterate theta -> C (x) (gamma theta). The per-column regression residuals
// were folded into C at compile time, so the running shift stays zero.
inline SolverResult fp_mp_fqi(const MpMatrix& c, const SolverConfig& cfg) {
    if (c.rows() != c.cols())
        throw validation_error("fp_mp_fqi: fixed-point matrix must be square");
    if (!astic_check(c).row)
        throw validation_error("fp_mp_fqi: fixed-point matrix must be row R-astic");
    if (cfg.gamma <= 0.0 || cfg.gamma >= 1.0)
        throw validation_error("fp_mp_fqi: gamma must lie in (0,1)");
    return detail::run_fixed_point(
        [&c, &cfg](std::span<const double> th) {
            const auto scaled = scale(th, cfg.gamma);
            const auto y = mp_apply(c, std::span<const double>(scaled));
            std::vector<double> next(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) next[i] = y[i].v;
            return std::pair<std::vector<double>, double>{std::move(next), 0.0};
        },
        c.rows(), cfg, "fp_mp_fqi", /*nonfinite_is_divergence=*/false);
}

// ---------------------------------------------------------------------------
// Conventional fitted Q-iteration baseline: targets from the empirical
// Bellman backup, coefficients from ridge-regularized least squares. The
// normal matrix is factored once (Cholesky); each iteration is one target
// build plus one solve. May genuinely diverge; that is reported in-band via
// diverged=true, not as an error.
inline SolverResult standard_fqi(const Dataset& d, const FeatureBank& bank,
                                 const SolverConfig& cfg) {
    bank.validate();
    cfg.validate();
    if (bank.algebra != Algebra::conventional)
        throw validation_error("standard_fqi: bank must be conventional-algebra");
    if (d.samples.empty())
        throw validation_error("standard_fqi: empty dataset");

    const std::size_t n = d.size();
    const std::size_t px = bank.state_count(), pu = bank.action_count();
    const std::size_t p = bank.size();

    Eigen::MatrixXd ftil(n, p), next_feats(n, px);
    Eigen::VectorXd rewards(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = eval_feature_linear(bank, d.samples[i].x, d.samples[i].u);
        for (std::size_t j = 0; j < p; ++j) ftil(i, j) = row[j];
        const auto nf = state_features_linear(bank, d.samples[i].x_plus);
        for (std::size_t j = 0; j < px; ++j) next_feats(i, j) = nf[j];
        rewards(i) = d.samples[i].r;
    }

    Eigen::MatrixXd normal = ftil.transpose() * ftil;
    normal.diagonal().array() += cfg.lambda;
    const Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success)
        throw solver_error("standard_fqi: normal matrix is not positive definite "
                           "(singular design; increase lambda)");

    return detail::run_fixed_point(
        [&](std::span<const double> th) {
            const Eigen::Map<const Eigen::MatrixXd> tmat(th.data(),
                                                         static_cast<Eigen::Index>(px),
                                                         static_cast<Eigen::Index>(pu));
            const Eigen::VectorXd future = (next_feats * tmat).rowwise().maxCoeff();
            const Eigen::VectorXd targets = rewards + cfg.gamma * future;
            const Eigen::VectorXd sol = llt.solve(ftil.transpose() * targets);
            return std::pair<std::vector<double>, double>{
                std::vector<double>(sol.data(), sol.data() + p), 0.0};
        },
        p, cfg, "standard_fqi", /*nonfinite_is_divergence=*/true);
}

} // namespace maxplus
