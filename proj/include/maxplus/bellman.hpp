#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "maxplus/environment.hpp"
#include "maxplus/features.hpp"
#include "maxplus/mp_matrix.hpp"

namespace maxplus {

// r + gamma * future with the convention 0 * (-inf) = 0: at gamma = 0 the
// backup drops the future term entirely instead of manufacturing a NaN.
inline ExtReal discounted_backup(double r, ExtReal future, double gamma) {
    if (gamma == 0.0) return ExtReal{r};
    return ExtReal{r + gamma * future.v};
}

// Feature matrix: row i holds the bank's features at sample i's (x_i, u_i).
inline MpMatrix build_feature_matrix(const Dataset& d, const FeatureBank& bank) {
    bank.validate();
    if (bank.algebra != Algebra::max_plus)
        throw validation_error("build_feature_matrix: bank must be max-plus");
    if (d.samples.empty())
        throw validation_error("build_feature_matrix: empty dataset");
    MpMatrix f(d.size(), bank.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto row = eval_feature(bank, d.samples[i].x, d.samples[i].u);
        auto fi = f.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) fi[j] = row[j];
    }
    return f;
}

// Backup matrix: entry (i, col) is the one-step empirical Bellman backup of
// feature `col` at sample i, i.e. r_i + gamma * max over successor actions
// of the feature at (x_i_plus, u_plus). For these separable banks the inner
// max collapses: the action selector contributes 0 at its own action, so
// every action block shares the state-feature value at x_i_plus.
inline MpMatrix build_backup_matrix(const Dataset& d, const FeatureBank& bank, double gamma) {
    bank.validate();
    if (bank.algebra != Algebra::max_plus)
        throw validation_error("build_backup_matrix: bank must be max-plus");
    if (d.samples.empty())
        throw validation_error("build_backup_matrix: empty dataset");
    if (gamma < 0.0 || gamma >= 1.0)
        throw validation_error("build_backup_matrix: gamma must lie in [0,1)");
    const std::size_t px = bank.state_count(), pu = bank.action_count();
    MpMatrix g(d.size(), bank.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto fx = state_features_mp(bank, d.samples[i].x_plus);
        auto gi = g.row(i);
        for (std::size_t j = 0; j < px; ++j) {
            const ExtReal v = discounted_backup(d.samples[i].r, fx[j], gamma);
            for (std::size_t k = 0; k < pu; ++k) gi[k * px + j] = v;
        }
    }
    return g;
}

// Reference path that performs the successor-action max explicitly instead
// of using the separable shortcut; exists to pin the shortcut's correctness.
inline MpMatrix build_backup_matrix_explicit(const Dataset& d, const FeatureBank& bank,
                                             double gamma) {
    bank.validate();
    if (bank.algebra != Algebra::max_plus)
        throw validation_error("build_backup_matrix_explicit: bank must be max-plus");
    MpMatrix g(d.size(), bank.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto gi = g.row(i);
        std::vector<ExtReal> best(bank.size(), ExtReal::neg_inf());
        for (double u_plus : bank.actions) {
            const auto feat = eval_feature(bank, d.samples[i].x_plus, u_plus);
            for (std::size_t col = 0; col < feat.size(); ++col)
                best[col] = mp_max(best[col], feat[col]);
        }
        for (std::size_t col = 0; col < best.size(); ++col)
            gi[col] = discounted_backup(d.samples[i].r, best[col], gamma);
    }
    return g;
}

// Test matrix: the feature matrix of the test bank. Kept as its own entry
// point because the test bank may differ from the feature bank in kind,
// resolution, and curvature.
inline MpMatrix build_test_matrix(const Dataset& d, const FeatureBank& testbank) {
    return build_feature_matrix(d, testbank);
}

// ---------------------------------------------------------------------------
// Structural validation. A feature column that no sample activates carries
// no information and would break column asticity, so it is pruned from the
// feature AND backup matrices (the coefficient simply disappears, recorded
// in `kept`/`pruned`). Row failures are not repairable: an all--inf feature
// row means some sample activates no feature at all, and an all--inf backup
// row means some successor state is invisible to the bank.
struct ValidatedSystem {
    MpMatrix features; // pruned F
    MpMatrix backups;  // pruned G
    std::optional<MpMatrix> tests;
    std::vector<std::size_t> kept, pruned;           // feature columns
    std::vector<std::size_t> kept_tests, pruned_tests;
    std::vector<std::string> diagnostics;
};

namespace detail {
inline MpMatrix select_columns(const MpMatrix& a, const std::vector<std::size_t>& cols) {
    MpMatrix out(a.rows(), cols.size());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto src = a.row(i);
        auto dst = out.row(i);
        for (std::size_t t = 0; t < cols.size(); ++t) dst[t] = src[cols[t]];
    }
    return out;
}

inline std::vector<std::size_t> finite_columns(const MpMatrix& a) {
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        bool hit = false;
        for (std::size_t i = 0; i < a.rows() && !hit; ++i) hit = a(i, j).finite();
        if (hit) keep.push_back(j);
    }
    return keep;
}

inline std::string join_indices(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(v[i]);
    }
    return s;
}
} // namespace detail

inline ValidatedSystem validate_system(const MpMatrix& f, const MpMatrix& g,
                                       const std::optional<MpMatrix>& h = std::nullopt) {
    if (f.rows() != g.rows() || f.cols() != g.cols())
        throw validation_error("validate_system: feature/backup shape mismatch");
    if (h && h->rows() != f.rows())
        throw validation_error("validate_system: test matrix row count mismatch");

    ValidatedSystem out;
    out.kept = detail::finite_columns(f);
    for (std::size_t j = 0, t = 0; j < f.cols(); ++j) {
        if (t < out.kept.size() && out.kept[t] == j) ++t;
        else out.pruned.push_back(j);
    }
    if (out.kept.empty())
        throw validation_error("validate_system: every feature column is all -inf; "
                               "the bank is empty after pruning");
    if (!out.pruned.empty())
        out.diagnostics.push_back("pruned " + std::to_string(out.pruned.size()) +
                                  " feature column(s) never activated by the dataset: " +
                                  detail::join_indices(out.pruned));
    out.features = out.pruned.empty() ? f : detail::select_columns(f, out.kept);
    out.backups = out.pruned.empty() ? g : detail::select_columns(g, out.kept);

    const auto fa = astic_check(out.features);
    if (!fa.row)
        throw validation_error("validate_system: a sample activates no feature "
                               "(feature matrix has an all--inf row)");
    if (!astic_check(out.backups).row)
        throw validation_error("validate_system: a successor state activates no feature "
                               "(backup matrix has an all--inf row)");

    if (h) {
        out.kept_tests = detail::finite_columns(*h);
        for (std::size_t j = 0, t = 0; j < h->cols(); ++j) {
            if (t < out.kept_tests.size() && out.kept_tests[t] == j) ++t;
            else out.pruned_tests.push_back(j);
        }
        if (out.kept_tests.empty())
            throw validation_error("validate_system: every test column is all -inf");
        if (!out.pruned_tests.empty())
            out.diagnostics.push_back("pruned " + std::to_string(out.pruned_tests.size()) +
                                      " test column(s) never activated by the dataset: " +
                                      detail::join_indices(out.pruned_tests));
        out.tests = out.pruned_tests.empty() ? *h : detail::select_columns(*h, out.kept_tests);
        if (!astic_check(*out.tests).row)
            throw validation_error("validate_system: a sample activates no test function "
                                   "(test matrix has an all--inf row)");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Variational projection: compress the n-row system through the test
// matrix, F_proj = H^T (x) F and G_proj = H^T (x) G (both q x p). Inputs
// must satisfy the standing structure (F doubly, G row, H doubly R-astic);
// the projected pair then provably inherits F_proj doubly / G_proj row
// R-astic, which is re-checked defensively.
struct ProjectedSystem {
    MpMatrix features; // q x p
    MpMatrix backups;  // q x p
};

inline ProjectedSystem project_system(const MpMatrix& f, const MpMatrix& g, const MpMatrix& h) {
    if (f.rows() != g.rows() || f.cols() != g.cols() || h.rows() != f.rows())
        throw validation_error("project_system: shape mismatch");
    if (!astic_check(f).doubly())
        throw validation_error("project_system: feature matrix must be doubly R-astic "
                               "(run validate_system first)");
    if (!astic_check(g).row)
        throw validation_error("project_system: backup matrix must be row R-astic");
    if (!astic_check(h).doubly())
        throw validation_error("project_system: test matrix must be doubly R-astic");
    const MpMatrix ht = h.transposed();
    ProjectedSystem out{mp_mul(ht, f), mp_mul(ht, g)};
    if (!astic_check(out.features).doubly())
        throw solver_error("project_system: projected feature matrix lost double asticity");
    if (!astic_check(out.backups).row)
        throw solver_error("project_system: projected backup matrix lost row asticity");
    return out;
}

// ---------------------------------------------------------------------------
// Empirical Bellman functional for an arbitrary state-action function:
// (B q)(z_i) = r_i + gamma * max over the action set of q(x_i_plus, u_plus).
// Used by property tests; the matrix builders above are its specialization
// to feature columns.
inline std::vector<ExtReal> empirical_bellman(
    const Dataset& d, double gamma, std::span<const double> actions,
    const std::function<ExtReal(std::span<const double>, double)>& q) {
    std::vector<ExtReal> out(d.size(), ExtReal::neg_inf());
    for (std::size_t i = 0; i < d.size(); ++i) {
        ExtReal best = ExtReal::neg_inf();
        for (double u : actions) best = mp_max(best, q(d.samples[i].x_plus, u));
        out[i] = discounted_backup(d.samples[i].r, best, gamma);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form projected feature matrix for quadratic/quadratic bank pairs:
// entry (test col, feature col) is
//
//   max over (x, u) in box x actions of (h(x, u) + f(x, u))
//
// which is -inf across action blocks (the two selectors disagree) and
// otherwise max over x of -(ct ||x - wt||^2 + c ||x - w||^2). That objective
// is concave and separable per coordinate, so the box-constrained maximizer
// is the coordinate-wise clamp of (c w + ct wt) / (c + ct), with interior
// value -(c ct)/(c + ct) ||w - wt||^2.
//
// Curvature convention: this library's quadratic features carry -c||.||^2.
// Texts that write the same feature as -(c/2)||.||^2 describe the identical
// bank at c_half = 2c; the interior value in that convention reads
// -(c_half ct_half)/(2 (c_half + ct_half)) ||w - wt||^2.
inline double quadratic_pair_max(double c_feat, std::span<const double> w, double c_test,
                                 std::span<const double> wt, const Box& domain) {
    if (w.size() != domain.dim() || wt.size() != domain.dim())
        throw validation_error("quadratic_pair_max: dimension mismatch");
    if (c_feat <= 0.0 || c_test <= 0.0)
        throw validation_error("quadratic_pair_max: curvatures must be positive");
    double value = 0.0;
    for (std::size_t dd = 0; dd < domain.dim(); ++dd) {
        double z = (c_feat * w[dd] + c_test * wt[dd]) / (c_feat + c_test);
        z = std::min(std::max(z, domain.lo[dd]), domain.hi[dd]);
        const double gw = z - w[dd], gt = z - wt[dd];
        value -= c_feat * gw * gw + c_test * gt * gt;
    }
    return value;
}

inline MpMatrix exact_projected_features_quadratic(const FeatureBank& testbank,
                                                   const FeatureBank& bank) {
    testbank.validate();
    bank.validate();
    if (bank.kind != FeatureKind::quadratic || testbank.kind != FeatureKind::quadratic)
        throw validation_error("exact_projected_features_quadratic: both banks must be quadratic");
    if (bank.actions != testbank.actions)
        throw validation_error("exact_projected_features_quadratic: action sets must match");
    if (!(bank.domain == testbank.domain))
        throw validation_error("exact_projected_features_quadratic: domains must match");
    const std::size_t px = bank.state_count(), qx = testbank.state_count();
    const std::size_t pu = bank.action_count();
    MpMatrix out(qx * pu, px * pu);
    for (std::size_t k = 0; k < pu; ++k)
        for (std::size_t jt = 0; jt < qx; ++jt)
            for (std::size_t jf = 0; jf < px; ++jf)
                out(k * qx + jt, k * px + jf) =
                    ExtReal{quadratic_pair_max(bank.curvature, bank.centers[jf],
                                               testbank.curvature, testbank.centers[jt],
                                               bank.domain)};
    return out;
}

} // namespace maxplus
