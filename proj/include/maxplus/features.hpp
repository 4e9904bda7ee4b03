#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maxplus/box.hpp"
#include "maxplus/errors.hpp"
#include "maxplus/ext_real.hpp"

namespace maxplus {

// Feature families over the state-action space. All banks are separable:
// a state part (one entry per grid point / bin) combined with an action
// selector, so a bank with p_x state features and p_u actions has
// p = p_x * p_u columns, ordered action-major: column(j, k) = k*p_x + j.
//
// Max-plus banks add a 0/-inf action selector to the state feature;
// conventional banks multiply by a 0/1 selector.
enum class FeatureKind { quadratic, distance, rbf, indicator };
enum class Algebra { max_plus, conventional };

inline const char* to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::quadratic: return "quadratic";
        case FeatureKind::distance: return "distance";
        case FeatureKind::rbf: return "rbf";
        case FeatureKind::indicator: return "indicator";
    }
    return "?";
}

inline const char* to_string(Algebra a) {
    return a == Algebra::max_plus ? "max-plus" : "conventional";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "quadratic") return FeatureKind::quadratic;
    if (s == "distance") return FeatureKind::distance;
    if (s == "rbf") return FeatureKind::rbf;
    if (s == "indicator") return FeatureKind::indicator;
    throw validation_error("unknown feature kind '" + s + "'");
}

// Uniform grid over a box: m bins per dimension, m^d cells. Cell centers
// double as the point grid for center-based kinds so banks of equal size
// are geometrically comparable. Index decomposition is dimension-0 fastest.
struct GridGeometry {
    std::vector<std::vector<double>> centers;
    std::vector<Box> bins;
};

inline GridGeometry build_grid(const Box& box, std::size_t m) {
    if (m == 0)
        throw validation_error("build_grid: m must be at least 1");
    const std::size_t d = box.dim();
    if (d == 0)
        throw validation_error("build_grid: empty box");
    std::size_t p = 1;
    for (std::size_t k = 0; k < d; ++k) p *= m;
    std::vector<double> width(d);
    for (std::size_t k = 0; k < d; ++k) width[k] = (box.hi[k] - box.lo[k]) / static_cast<double>(m);
    GridGeometry g;
    g.centers.reserve(p);
    g.bins.reserve(p);
    for (std::size_t j = 0; j < p; ++j) {
        std::vector<double> lo(d), hi(d), c(d);
        std::size_t rem = j;
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t idx = rem % m;
            rem /= m;
            lo[k] = box.lo[k] + static_cast<double>(idx) * width[k];
            // the top cell reuses the exact box bound so the bins tile the box
            hi[k] = idx + 1 == m ? box.hi[k] : box.lo[k] + static_cast<double>(idx + 1) * width[k];
            c[k] = box.lo[k] + (static_cast<double>(idx) + 0.5) * width[k];
        }
        g.bins.emplace_back(std::move(lo), std::move(hi));
        g.centers.push_back(std::move(c));
    }
    return g;
}

struct FeatureBank {
    FeatureKind kind = FeatureKind::quadratic;
    Algebra algebra = Algebra::max_plus;
    Box domain;
    std::vector<std::vector<double>> centers; // quadratic / rbf
    std::vector<Box> bins;                    // distance / indicator
    double curvature = 1.0;
    std::vector<double> actions;
    std::size_t grid_m = 0; // >0 when built on a uniform grid (enables O(1) bin lookup)
    double alpha = 1.0;     // curvature scale the bank was built with

    std::size_t state_count() const {
        return kind == FeatureKind::quadratic || kind == FeatureKind::rbf ? centers.size()
                                                                          : bins.size();
    }
    std::size_t action_count() const { return actions.size(); }
    std::size_t size() const { return state_count() * action_count(); }
    std::size_t column(std::size_t j, std::size_t k) const { return k * state_count() + j; }

    void validate() const {
        const bool centers_kind = kind == FeatureKind::quadratic || kind == FeatureKind::rbf;
        if (centers_kind && (centers.empty() || !bins.empty()))
            throw validation_error("FeatureBank: center-based kind must populate centers only");
        if (!centers_kind && (bins.empty() || !centers.empty()))
            throw validation_error("FeatureBank: bin-based kind must populate bins only");
        if (actions.empty())
            throw validation_error("FeatureBank: empty action set");
        if (curvature <= 0.0)
            throw validation_error("FeatureBank: curvature must be positive");
        if (algebra == Algebra::max_plus && kind == FeatureKind::rbf)
            throw validation_error("FeatureBank: rbf features are conventional-algebra only");
        if (algebra == Algebra::conventional &&
            (kind == FeatureKind::quadratic || kind == FeatureKind::distance))
            throw validation_error("FeatureBank: quadratic/distance features are max-plus only");
    }
};

// Grid bank with the curvature rule c = alpha * p_x^(1/d). Max-plus banks
// take kinds {quadratic, distance, indicator}; conventional take
// {rbf, indicator}. (Indicator in the max-plus algebra is the 0/-inf
// membership feature used by exact finite-MDP representations.)
inline FeatureBank make_grid_bank(FeatureKind kind, Algebra algebra, const Box& box,
                                  std::size_t m, double alpha, std::vector<double> actions) {
    if (alpha <= 0.0)
        throw validation_error("make_grid_bank: alpha must be positive");
    auto geom = build_grid(box, m);
    FeatureBank b;
    b.kind = kind;
    b.algebra = algebra;
    b.domain = box;
    if (kind == FeatureKind::quadratic || kind == FeatureKind::rbf)
        b.centers = std::move(geom.centers);
    else
        b.bins = std::move(geom.bins);
    const double px = static_cast<double>(b.state_count());
    b.curvature = alpha * std::pow(px, 1.0 / static_cast<double>(box.dim()));
    b.actions = std::move(actions);
    b.grid_m = m;
    b.alpha = alpha;
    b.validate();
    return b;
}

// ---------------------------------------------------------------------------
// Bin membership. Grid banks locate the bin arithmetically, which maps every
// point of the box (including the upper faces, where saturated states live)
// to exactly one bin. Hand-assembled banks fall back to a half-open scan.
inline std::optional<std::size_t> state_bin_index(const FeatureBank& bank,
                                                  std::span<const double> x) {
    if (bank.bins.empty())
        throw validation_error("state_bin_index: bank has no bins");
    const std::size_t d = bank.domain.dim();
    if (bank.grid_m > 0) {
        const std::size_t m = bank.grid_m;
        std::size_t idx = 0, stride = 1;
        for (std::size_t k = 0; k < d; ++k) {
            const double w = (bank.domain.hi[k] - bank.domain.lo[k]) / static_cast<double>(m);
            auto cell = static_cast<long long>(std::floor((x[k] - bank.domain.lo[k]) / w));
            if (cell < 0) cell = 0;
            if (cell >= static_cast<long long>(m)) cell = static_cast<long long>(m) - 1;
            idx += static_cast<std::size_t>(cell) * stride;
            stride *= m;
        }
        return idx;
    }
    for (std::size_t j = 0; j < bank.bins.size(); ++j)
        if (bank.bins[j].contains_half_open(x)) return j;
    for (std::size_t j = 0; j < bank.bins.size(); ++j)
        if (bank.bins[j].contains(x)) return j; // upper boundary of the outermost bin
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// State-feature evaluation.
//   quadratic: -c * ||x - y_j||^2            (max-plus)
//   distance:  -c * dist(x, Y_j)^2           (max-plus; 0 inside the bin)
//   indicator: 0 / -inf membership           (max-plus)
//   rbf:       exp(-||x - y_j||^2 / c)       (conventional)
//   indicator: 1 / 0 membership              (conventional)
inline std::vector<ExtReal> state_features_mp(const FeatureBank& bank, std::span<const double> x) {
    if (bank.algebra != Algebra::max_plus)
        throw validation_error("state_features_mp: bank is not max-plus");
    const std::size_t px = bank.state_count();
    std::vector<ExtReal> out(px, ExtReal::neg_inf());
    switch (bank.kind) {
        case FeatureKind::quadratic:
            for (std::size_t j = 0; j < px; ++j)
                out[j] = ExtReal{-bank.curvature * squared_distance(x, bank.centers[j])};
            break;
        case FeatureKind::distance:
            for (std::size_t j = 0; j < px; ++j)
                out[j] = ExtReal{-bank.curvature * bank.bins[j].squared_distance(x)};
            break;
        case FeatureKind::indicator: {
            const auto j = state_bin_index(bank, x);
            if (j) out[*j] = ExtReal{0.0};
            break;
        }
        case FeatureKind::rbf:
            throw validation_error("state_features_mp: rbf is not a max-plus kind");
    }
    return out;
}

inline std::vector<double> state_features_linear(const FeatureBank& bank,
                                                 std::span<const double> x) {
    if (bank.algebra != Algebra::conventional)
        throw validation_error("state_features_linear: bank is not conventional");
    const std::size_t px = bank.state_count();
    std::vector<double> out(px, 0.0);
    switch (bank.kind) {
        case FeatureKind::rbf:
            for (std::size_t j = 0; j < px; ++j)
                out[j] = std::exp(-squared_distance(x, bank.centers[j]) / bank.curvature);
            break;
        case FeatureKind::indicator: {
            const auto j = state_bin_index(bank, x);
            if (j) out[*j] = 1.0;
            break;
        }
        default:
            throw validation_error("state_features_linear: not a conventional kind");
    }
    return out;
}

inline std::size_t action_index(const FeatureBank& bank, double u) {
    for (std::size_t k = 0; k < bank.actions.size(); ++k)
        if (bank.actions[k] == u) return k;
    throw validation_error("action " + std::to_string(u) + " is not in the bank's action set");
}

// Full state-action feature vector, max-plus algebra: the action selects a
// contiguous block of p_x entries, every other block is -inf.
inline std::vector<ExtReal> eval_feature(const FeatureBank& bank, std::span<const double> x,
                                         double u) {
    const std::size_t k = action_index(bank, u);
    const auto fx = state_features_mp(bank, x);
    std::vector<ExtReal> out(bank.size(), ExtReal::neg_inf());
    const std::size_t px = bank.state_count();
    for (std::size_t j = 0; j < px; ++j) out[k * px + j] = fx[j];
    return out;
}

// Conventional counterpart: one 0/1-masked block.
inline std::vector<double> eval_feature_linear(const FeatureBank& bank, std::span<const double> x,
                                               double u) {
    const std::size_t k = action_index(bank, u);
    const auto fx = state_features_linear(bank, x);
    std::vector<double> out(bank.size(), 0.0);
    const std::size_t px = bank.state_count();
    for (std::size_t j = 0; j < px; ++j) out[k * px + j] = fx[j];
    return out;
}

// Q_theta(x, u) = max over kept columns of (feature + coefficient). `kept`
// maps coefficient index -> original bank column (identity when nothing was
// pruned); columns outside `kept` are treated as absent.
inline double q_value(const FeatureBank& bank, std::span<const double> theta,
                      std::span<const std::size_t> kept, std::span<const double> x, double u) {
    if (theta.size() != kept.size())
        throw validation_error("q_value: theta/kept size mismatch");
    const std::size_t k = action_index(bank, u);
    const std::size_t px = bank.state_count();
    const std::size_t lo = k * px, hi = lo + px;
    const auto fx = state_features_mp(bank, x);
    double best = ExtReal::neg_inf_raw();
    for (std::size_t t = 0; t < kept.size(); ++t) {
        const std::size_t col = kept[t];
        if (col < lo || col >= hi) continue;
        const double cand = fx[col - lo].v + theta[t];
        if (cand > best) best = cand;
    }
    if (best == ExtReal::neg_inf_raw())
        throw solver_error("q_value: no finite feature at the queried state-action pair");
    return best;
}

// Conventional Q-value: inner product over the action's block.
inline double q_value_linear(const FeatureBank& bank, std::span<const double> theta,
                             std::span<const std::size_t> kept, std::span<const double> x,
                             double u) {
    if (theta.size() != kept.size())
        throw validation_error("q_value_linear: theta/kept size mismatch");
    const std::size_t k = action_index(bank, u);
    const std::size_t px = bank.state_count();
    const std::size_t lo = k * px, hi = lo + px;
    const auto fx = state_features_linear(bank, x);
    double sum = 0.0;
    for (std::size_t t = 0; t < kept.size(); ++t) {
        const std::size_t col = kept[t];
        if (col < lo || col >= hi) continue;
        sum += fx[col - lo] * theta[t];
    }
    return sum;
}

inline std::vector<std::size_t> identity_columns(std::size_t p) {
    std::vector<std::size_t> v(p);
    for (std::size_t i = 0; i < p; ++i) v[i] = i;
    return v;
}

} // namespace maxplus
