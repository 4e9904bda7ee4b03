#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "maxplus/errors.hpp"
#include "maxplus/ext_real.hpp"

namespace maxplus {

// Dense row-major matrix over the max-plus semiring. Sizes are fixed at
// construction; entries default to -inf (the semiring zero), so a fresh
// matrix is the zero matrix.
class MpMatrix {
public:
    MpMatrix() = default;
    MpMatrix(std::size_t rows, std::size_t cols, ExtReal fill = ExtReal::neg_inf())
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    // Max-plus identity: 0 on the diagonal, -inf elsewhere.
    static MpMatrix identity(std::size_t n) {
        MpMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = ExtReal{0.0};
        return m;
    }

    // Row-by-row literal, for tests and small examples.
    static MpMatrix from_rows(std::initializer_list<std::initializer_list<ExtReal>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        MpMatrix m(r, c);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != c)
                throw validation_error("from_rows: ragged rows");
            std::size_t j = 0;
            for (ExtReal e : row) m(i, j++) = e;
            ++i;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    ExtReal& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    ExtReal operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const ExtReal> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<ExtReal> row(std::size_t i) {
        return {data_.data() + i * cols_, cols_};
    }

    MpMatrix transposed() const {
        MpMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    bool operator==(const MpMatrix&) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<ExtReal> data_;
};

// ---------------------------------------------------------------------------
// Asticity: which rows/columns carry at least one finite entry. A matrix is
// row R-astic if every row does, column R-astic if every column does, and
// doubly R-astic if both hold. Residuation needs column R-asticity to return
// finite coefficients; the variational build needs more (see bellman.hpp).
struct Asticity {
    bool row = false;
    bool col = false;
    bool doubly() const { return row && col; }
};

inline Asticity astic_check(const MpMatrix& a) {
    if (a.rows() == 0 || a.cols() == 0)
        throw validation_error("astic_check: empty matrix");
    Asticity r{true, true};
    std::vector<bool> col_hit(a.cols(), false);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        bool row_hit = false;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (a(i, j).finite()) {
                row_hit = true;
                col_hit[j] = true;
            }
        }
        if (!row_hit) r.row = false;
    }
    r.col = std::all_of(col_hit.begin(), col_hit.end(), [](bool b) { return b; });
    return r;
}

// ---------------------------------------------------------------------------
// Max-plus matrix product: [A (x) B]_{ij} = max_k (A_{ik} + B_{kj}).
// -inf rows of A are skipped; every surviving candidate is a single rounded
// add, so the result is independent of loop order.
inline MpMatrix mp_mul(const MpMatrix& a, const MpMatrix& b) {
    if (a.cols() != b.rows())
        throw validation_error("mp_mul: inner dimensions disagree (" +
                               std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
    MpMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        auto ai = a.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = ai[k].v;
            if (aik == ExtReal::neg_inf_raw()) continue;
            auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                const double cand = aik + bk[j].v;
                if (cand > ci[j].v) ci[j].v = cand;
            }
        }
    }
    return c;
}

// A (x) x for a column vector x. No -inf skip needed: -inf entries of x are
// absorbing and can never win the max against a finite candidate, and an
// all--inf result row is legitimate (it means the row of A is -inf).
inline std::vector<ExtReal> mp_apply(const MpMatrix& a, std::span<const ExtReal> x) {
    if (a.cols() != x.size())
        throw validation_error("mp_apply: dimension mismatch");
    std::vector<ExtReal> y(a.rows(), ExtReal::neg_inf());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        double best = ExtReal::neg_inf_raw();
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double aik = ai[k].v;
            if (aik == ExtReal::neg_inf_raw()) continue;
            const double cand = aik + x[k].v;
            if (cand > best) best = cand;
        }
        y[i].v = best;
    }
    return y;
}

inline std::vector<ExtReal> to_ext(std::span<const double> x) {
    return std::vector<ExtReal>(x.begin(), x.end());
}

inline std::vector<ExtReal> mp_apply(const MpMatrix& a, std::span<const double> x) {
    const auto xe = to_ext(x);
    return mp_apply(a, std::span<const ExtReal>(xe));
}

// Discounting enters the fixed-point maps as the conventional scalar
// multiple gamma * theta: coefficient vectors live on the reals, and the
// contraction argument needs ordinary homogeneity, not a max-plus scalar.
inline std::vector<double> scale(std::span<const double> x, double gamma) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = gamma * x[i];
    return y;
}

inline double inf_norm(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

inline double inf_norm_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw validation_error("inf_norm_diff: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double inf_norm_ext(std::span<const ExtReal> x) {
    double m = 0.0;
    for (ExtReal e : x) {
        if (!e.finite())
            throw solver_error("inf_norm: -inf entry has no finite norm");
        m = std::max(m, std::abs(e.v));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Residuation. greatest_subsolution(at, b) returns the greatest c with
// A (x) c <= b, working from the transpose At = A^T for row-contiguous
// access:
//
//   c_j = min over { i : A_{ij} finite } of (b_i - A_{ij})
//
// which equals -(A^T (x) (-b)) when b is finite, but is defined here for
// b with -inf entries too: a -inf target forces c_j = -inf for every j its
// row touches. Rows of At with no finite entry (columns of A that constrain
// nothing) would make c_j = +inf; that is unrepresentable and an error.
inline std::vector<ExtReal> greatest_subsolution_t(const MpMatrix& at,
                                                   std::span<const ExtReal> b) {
    if (at.cols() != b.size())
        throw validation_error("greatest_subsolution: dimension mismatch");
    std::vector<ExtReal> c(at.rows(), ExtReal::neg_inf());
    for (std::size_t j = 0; j < at.rows(); ++j) {
        auto atj = at.row(j);
        double best = std::numeric_limits<double>::infinity();
        bool touched = false;
        for (std::size_t i = 0; i < b.size(); ++i) {
            const double aij = atj[i].v;
            if (aij == ExtReal::neg_inf_raw()) continue;
            touched = true;
            const double cand = b[i].v - aij; // -inf - finite = -inf, as required
            if (cand < best) best = cand;
        }
        if (!touched)
            throw solver_error("greatest_subsolution: column " + std::to_string(j) +
                               " of the system matrix is all -inf (unconstrained "
                               "coefficient has no finite greatest value)");
        c[j].v = best;
    }
    return c;
}

// Principal solution of A (x) theta <= b for finite b: the greatest
// subsolution, and the infinity-norm-optimal solution up to a half-residual
// shift (see regress_inf below). Requires column R-astic A and finite b.
inline std::vector<double> principal_solution(const MpMatrix& a, std::span<const double> b) {
    if (a.rows() != b.size())
        throw validation_error("principal_solution: dimension mismatch");
    if (!astic_check(a).col)
        throw validation_error("principal_solution: system matrix is not column R-astic");
    for (double v : b)
        if (!std::isfinite(v))
            throw validation_error("principal_solution: target must be finite");
    const auto be = to_ext(b);
    const auto c = greatest_subsolution_t(a.transposed(), std::span<const ExtReal>(be));
    std::vector<double> out(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) out[j] = c[j].v; // finite: every column touched a finite b_i
    return out;
}

struct MpRegression {
    std::vector<double> theta; // infinity-norm minimizer
    double residual = 0.0;     // ||A (x) theta - b||_inf, exactly half the principal residual
};

// Unconstrained infinity-norm regression min_theta ||A (x) theta - b||_inf.
// The principal solution under-shoots b one-sidedly; shifting every
// coefficient up by half its residual centers the error band, which is
// optimal and halves the residual exactly.
inline MpRegression regress_inf(const MpMatrix& a, std::span<const double> b) {
    auto theta = principal_solution(a, b);
    const auto te = to_ext(std::span<const double>(theta));
    const auto ax = mp_apply(a, std::span<const ExtReal>(te));
    double r = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (!ax[i].finite())
            throw solver_error("regress_inf: row " + std::to_string(i) +
                               " of the system matrix is all -inf and cannot reach a finite target");
        r = std::max(r, std::abs(ax[i].v - b[i]));
    }
    for (double& t : theta) t += r / 2.0;
    return {std::move(theta), r / 2.0};
}

} // namespace maxplus
