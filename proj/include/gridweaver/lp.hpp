#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "gridweaver/common.hpp"

namespace gridweaver {

inline constexpr double kLpInf = std::numeric_limits<double>::infinity();

/// General-form linear program:
///   min c'x + constant
///   s.t. row_lower <= A x <= row_upper,  col_lower <= x <= col_upper.
/// Equality rows have row_lower == row_upper; one-sided rows use +-inf.
struct LpProblem {
    std::string name = "LP";
    std::string objective_name = "COST";
    double objective_constant = 0;

    std::vector<double> obj;
    std::vector<double> col_lower, col_upper;
    std::vector<std::string> col_names;

    std::vector<double> row_lower, row_upper;
    std::vector<std::string> row_names;

    struct Entry {
        int row;
        int col;
        double value;
    };
    std::vector<Entry> entries;

    /// Advisory starting-basis assignments (column, row) from whoever
    /// built the problem and knows its structure; columns placed on rows
    /// where their basic value starts feasible. Not serialized.
    std::vector<std::pair<int, int>> crash_hints;

    int num_cols() const { return static_cast<int>(obj.size()); }
    int num_rows() const { return static_cast<int>(row_lower.size()); }

    int add_col(std::string name, double lower, double upper, double cost) {
        col_names.push_back(std::move(name));
        col_lower.push_back(lower);
        col_upper.push_back(upper);
        obj.push_back(cost);
        return num_cols() - 1;
    }

    int add_row(std::string name, double lower, double upper) {
        row_names.push_back(std::move(name));
        row_lower.push_back(lower);
        row_upper.push_back(upper);
        return num_rows() - 1;
    }

    void add_entry(int row, int col, double value) {
        if (value != 0.0) entries.push_back({row, col, value});
    }

    void validate() const {
        for (int j = 0; j < num_cols(); ++j)
            if (col_lower[static_cast<std::size_t>(j)] > col_upper[static_cast<std::size_t>(j)])
                throw ConfigError("LP column " + col_names[static_cast<std::size_t>(j)] +
                                  ": lower bound exceeds upper bound");
        for (int i = 0; i < num_rows(); ++i)
            if (row_lower[static_cast<std::size_t>(i)] > row_upper[static_cast<std::size_t>(i)])
                throw ConfigError("LP row " + row_names[static_cast<std::size_t>(i)] +
                                  ": lower bound exceeds upper bound");
        for (const Entry& e : entries)
            if (e.row < 0 || e.row >= num_rows() || e.col < 0 || e.col >= num_cols())
                throw ConfigError("LP entry out of range");
    }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

inline std::string to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
        case LpStatus::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

struct LpSolution {
    LpStatus status = LpStatus::iteration_limit;
    double objective = 0;               // includes the constant term
    std::vector<double> x;              // structural column values
    std::vector<double> row_activity;   // A x
    std::vector<double> y;              // row duals (shadow prices)
    std::vector<double> z;              // column reduced costs
    long iterations = 0;
    int factorizations = 0;
    std::string pivot_policy;           // recorded pricing rule
};

struct SimplexOptions {
    double feas_tol = 1e-9;
    double opt_tol = 1e-9;
    double pivot_tol = 1e-9;
    long max_iterations = 0;  // 0: 2000 + 40 * (rows + cols)
    int refactor_interval = 64;
    bool scale = true;
    bool crash = true;       // apply builder crash hints for the initial basis
    double crash_pivot_tol = 1e-3;
    /// consecutive degenerate pivots before switching to Bland's rule
    int bland_trigger = 200;
};

namespace lpdetail {

enum class VarState : std::int8_t { at_lower, at_upper, nonbasic_free, basic };

/// Bounded-variable revised simplex over the computational form
/// [A | -I] z = 0 with row activities carried by logical variables.
/// Base factorization via sparse LU, product-form eta updates between
/// refactorizations. Deterministic: Dantzig pricing with lowest-index
/// tie-breaks, Bland's rule after a degeneracy streak.
class Simplex {
public:
    Simplex(const LpProblem& p, const SimplexOptions& opt) : opt_(opt), crash_hints_(p.crash_hints) {
        p.validate();
        n_ = p.num_cols();
        m_ = p.num_rows();
        total_ = n_ + m_;

        cost_.assign(static_cast<std::size_t>(total_), 0.0);
        lower_.resize(static_cast<std::size_t>(total_));
        upper_.resize(static_cast<std::size_t>(total_));
        for (int j = 0; j < n_; ++j) {
            cost_[static_cast<std::size_t>(j)] = p.obj[static_cast<std::size_t>(j)];
            lower_[static_cast<std::size_t>(j)] = p.col_lower[static_cast<std::size_t>(j)];
            upper_[static_cast<std::size_t>(j)] = p.col_upper[static_cast<std::size_t>(j)];
        }
        for (int i = 0; i < m_; ++i) {
            lower_[static_cast<std::size_t>(n_ + i)] = p.row_lower[static_cast<std::size_t>(i)];
            upper_[static_cast<std::size_t>(n_ + i)] = p.row_upper[static_cast<std::size_t>(i)];
        }

        assemble(p);
        if (opt_.scale) equilibrate();

        max_iter_ = opt_.max_iterations > 0 ? opt_.max_iterations
                                            : 2000 + 40L * static_cast<long>(total_);
    }

    LpSolution run() {
        initial_basis();
        refactor();
        compute_basic_values();

        LpSolution sol;
        sol.pivot_policy = "dantzig+bland";

        if (!loop(/*phase1=*/true, sol)) return finish(sol);
        if (total_infeasibility() > phase1_exit_tol()) {
            sol.status = LpStatus::infeasible;
            return finish(sol);
        }
        if (!loop(/*phase1=*/false, sol)) return finish(sol);
        sol.status = LpStatus::optimal;
        return finish(sol);
    }

private:
    // ---- setup -----------------------------------------------------------

    void assemble(const LpProblem& p) {
        // CSC for structural columns with duplicate entries summed
        std::vector<LpProblem::Entry> entries = p.entries;
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            if (a.col != b.col) return a.col < b.col;
            return a.row < b.row;
        });
        colptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
        rowidx_.reserve(entries.size());
        vals_.reserve(entries.size());
        std::size_t k = 0;
        for (int j = 0; j < n_; ++j) {
            colptr_[static_cast<std::size_t>(j)] = static_cast<int>(rowidx_.size());
            while (k < entries.size() && entries[k].col == j) {
                const int row = entries[k].row;
                double v = 0;
                while (k < entries.size() && entries[k].col == j && entries[k].row == row)
                    v += entries[k++].value;
                if (v != 0.0) {
                    rowidx_.push_back(row);
                    vals_.push_back(v);
                }
            }
        }
        colptr_[static_cast<std::size_t>(n_)] = static_cast<int>(rowidx_.size());
    }

    static double pow2_round(double s) {
        if (s <= 0 || !std::isfinite(s)) return 1.0;
        return std::exp2(std::round(std::log2(s)));
    }

    /// Geometric-mean equilibration with power-of-two factors (exact in
    /// floating point). Bounds, costs and the stored matrix are scaled
    /// in place; duals and primals are unscaled on exit.
    void equilibrate() {
        row_scale_.assign(static_cast<std::size_t>(m_), 1.0);
        col_scale_.assign(static_cast<std::size_t>(n_), 1.0);
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<double> row_max(static_cast<std::size_t>(m_), 0.0),
                row_min(static_cast<std::size_t>(m_), kLpInf);
            for (std::size_t k = 0; k < vals_.size(); ++k) {
                const double a = std::abs(vals_[k]);
                if (a == 0) continue;
                auto r = static_cast<std::size_t>(rowidx_[k]);
                row_max[r] = std::max(row_max[r], a);
                row_min[r] = std::min(row_min[r], a);
            }
            std::vector<double> rs(static_cast<std::size_t>(m_), 1.0);
            for (int i = 0; i < m_; ++i) {
                auto si = static_cast<std::size_t>(i);
                if (row_max[si] > 0) rs[si] = pow2_round(1.0 / std::sqrt(row_max[si] * row_min[si]));
            }
            for (int j = 0; j < n_; ++j)
                for (int k = colptr_[static_cast<std::size_t>(j)];
                     k < colptr_[static_cast<std::size_t>(j) + 1]; ++k)
                    vals_[static_cast<std::size_t>(k)] *= rs[static_cast<std::size_t>(rowidx_[static_cast<std::size_t>(k)])];
            for (int i = 0; i < m_; ++i) row_scale_[static_cast<std::size_t>(i)] *= rs[static_cast<std::size_t>(i)];

            std::vector<double> cs(static_cast<std::size_t>(n_), 1.0);
            for (int j = 0; j < n_; ++j) {
                double cmax = 0, cmin = kLpInf;
                for (int k = colptr_[static_cast<std::size_t>(j)];
                     k < colptr_[static_cast<std::size_t>(j) + 1]; ++k) {
                    const double a = std::abs(vals_[static_cast<std::size_t>(k)]);
                    if (a == 0) continue;
                    cmax = std::max(cmax, a);
                    cmin = std::min(cmin, a);
                }
                if (cmax > 0) cs[static_cast<std::size_t>(j)] = pow2_round(1.0 / std::sqrt(cmax * cmin));
                for (int k = colptr_[static_cast<std::size_t>(j)];
                     k < colptr_[static_cast<std::size_t>(j) + 1]; ++k)
                    vals_[static_cast<std::size_t>(k)] *= cs[static_cast<std::size_t>(j)];
            }
            for (int j = 0; j < n_; ++j) col_scale_[static_cast<std::size_t>(j)] *= cs[static_cast<std::size_t>(j)];
        }

        // x = C x'  =>  bounds scale by 1/C; c' = C c keeps c'x invariant
        for (int j = 0; j < n_; ++j) {
            auto sj = static_cast<std::size_t>(j);
            cost_[sj] *= col_scale_[sj];
            if (std::isfinite(lower_[sj])) lower_[sj] /= col_scale_[sj];
            if (std::isfinite(upper_[sj])) upper_[sj] /= col_scale_[sj];
        }
        // logical s' = R s  =>  bounds scale by R
        for (int i = 0; i < m_; ++i) {
            auto si = static_cast<std::size_t>(n_ + i);
            const double r = row_scale_[static_cast<std::size_t>(i)];
            if (std::isfinite(lower_[si])) lower_[si] *= r;
            if (std::isfinite(upper_[si])) upper_[si] *= r;
        }
    }

    void initial_basis() {
        state_.assign(static_cast<std::size_t>(total_), VarState::at_lower);
        xval_.assign(static_cast<std::size_t>(total_), 0.0);
        basis_.assign(static_cast<std::size_t>(m_), -1);
        basis_pos_.assign(static_cast<std::size_t>(total_), -1);

        // every column starts nonbasic at a bound (or free at zero);
        // the basis assignment below overrides the chosen ones
        for (int j = 0; j < total_; ++j) {
            auto sj = static_cast<std::size_t>(j);
            if (std::isfinite(lower_[sj])) {
                state_[sj] = VarState::at_lower;
                xval_[sj] = lower_[sj];
            } else if (std::isfinite(upper_[sj])) {
                state_[sj] = VarState::at_upper;
                xval_[sj] = upper_[sj];
            } else {
                state_[sj] = VarState::nonbasic_free;
                xval_[sj] = 0.0;
            }
        }

        // structural starting basis from builder hints: each hint places
        // a column on a row where its basic value is known to start
        // feasible (e.g. load-shedding slack on its balance row)
        if (opt_.crash) {
            for (const auto& [col, row] : crash_hints_) {
                if (col < 0 || col >= n_ || row < 0 || row >= m_) continue;
                auto sj = static_cast<std::size_t>(col);
                if (basis_pos_[sj] >= 0 || basis_[static_cast<std::size_t>(row)] >= 0) continue;
                double piv = 0;
                for (int k = colptr_[sj]; k < colptr_[sj + 1]; ++k)
                    if (rowidx_[static_cast<std::size_t>(k)] == row)
                        piv = vals_[static_cast<std::size_t>(k)];
                if (std::abs(piv) < opt_.crash_pivot_tol) continue;
                basis_[static_cast<std::size_t>(row)] = col;
                basis_pos_[sj] = row;
                state_[sj] = VarState::basic;
            }
        }

        for (int i = 0; i < m_; ++i) {
            if (basis_[static_cast<std::size_t>(i)] >= 0) continue;
            const int col = n_ + i;
            basis_[static_cast<std::size_t>(i)] = col;
            basis_pos_[static_cast<std::size_t>(col)] = i;
            state_[static_cast<std::size_t>(col)] = VarState::basic;
        }
    }

    // ---- linear algebra ---------------------------------------------------

    void column_into(int col, Eigen::VectorXd& out) const {
        out.setZero(m_);
        if (col < n_) {
            for (int k = colptr_[static_cast<std::size_t>(col)];
                 k < colptr_[static_cast<std::size_t>(col) + 1]; ++k)
                out[rowidx_[static_cast<std::size_t>(k)]] = vals_[static_cast<std::size_t>(k)];
        } else {
            out[col - n_] = -1.0;
        }
    }

    void refactor() {
        if (m_ == 0) {
            etas_.clear();
            ++factorizations_;
            return;
        }
        using Triplet = Eigen::Triplet<double>;
        std::vector<Triplet> trip;
        trip.reserve(vals_.size() + static_cast<std::size_t>(m_));
        for (int p = 0; p < m_; ++p) {
            const int col = basis_[static_cast<std::size_t>(p)];
            if (col < n_) {
                for (int k = colptr_[static_cast<std::size_t>(col)];
                     k < colptr_[static_cast<std::size_t>(col) + 1]; ++k)
                    trip.emplace_back(rowidx_[static_cast<std::size_t>(k)], p,
                                      vals_[static_cast<std::size_t>(k)]);
            } else {
                trip.emplace_back(col - n_, p, -1.0);
            }
        }
        Eigen::SparseMatrix<double> B(m_, m_);
        B.setFromTriplets(trip.begin(), trip.end());
        lu_.compute(B);
        if (lu_.info() != Eigen::Success)
            throw std::runtime_error("simplex: basis factorization failed");
        etas_.clear();
        ++factorizations_;
    }

    void ftran(Eigen::VectorXd& v) const {
        if (m_ == 0) return;
        v = lu_.solve(v);
        for (const Eta& e : etas_) {
            const double pr = v[e.r] / e.wr;
            v[e.r] = pr;
            if (pr != 0.0)
                for (std::size_t k = 0; k < e.idx.size(); ++k) {
                    if (e.idx[k] == e.r) continue;
                    v[e.idx[k]] -= e.val[k] * pr;
                }
        }
    }

    void btran(Eigen::VectorXd& v) {
        if (m_ == 0) return;
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            double dot = 0;
            for (std::size_t k = 0; k < it->idx.size(); ++k) {
                if (it->idx[k] == it->r) continue;
                dot += it->val[k] * v[it->idx[k]];
            }
            v[it->r] = (v[it->r] - dot) / it->wr;
        }
        v = lu_.transpose().solve(v);
    }

    void compute_basic_values() {
        // x_B = -B^{-1} A_N x_N
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
        for (int j = 0; j < total_; ++j) {
            if (state_[static_cast<std::size_t>(j)] == VarState::basic) continue;
            const double xj = xval_[static_cast<std::size_t>(j)];
            if (xj == 0.0) continue;
            if (j < n_) {
                for (int k = colptr_[static_cast<std::size_t>(j)];
                     k < colptr_[static_cast<std::size_t>(j) + 1]; ++k)
                    rhs[rowidx_[static_cast<std::size_t>(k)]] -= vals_[static_cast<std::size_t>(k)] * xj;
            } else {
                rhs[j - n_] += xj;
            }
        }
        ftran(rhs);
        for (int p = 0; p < m_; ++p)
            xval_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])] = rhs[p];
    }

    // ---- phase machinery ----------------------------------------------------

    double phase1_exit_tol() const { return opt_.feas_tol * 10.0; }

    double total_infeasibility() const {
        double inf = 0;
        for (int p = 0; p < m_; ++p) {
            auto j = static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)]);
            if (xval_[j] < lower_[j]) inf += lower_[j] - xval_[j];
            if (xval_[j] > upper_[j]) inf += xval_[j] - upper_[j];
        }
        return inf;
    }

    /// Effective cost of a variable in the current phase.
    double phase_cost(int j, bool phase1) const {
        auto sj = static_cast<std::size_t>(j);
        if (!phase1) return cost_[sj];
        if (state_[sj] != VarState::basic) return 0.0;
        if (xval_[sj] < lower_[sj] - opt_.feas_tol) return -1.0;
        if (xval_[sj] > upper_[sj] + opt_.feas_tol) return 1.0;
        return 0.0;
    }

    /// Main simplex loop; returns false when the run must stop with the
    /// status already stored in sol (unbounded / iteration limit).
    bool loop(bool phase1, LpSolution& sol) {
        Eigen::VectorXd y(m_), w(m_);
        int degenerate_streak = 0;
        bool bland = false;

        while (true) {
            if (phase1 && total_infeasibility() <= phase1_exit_tol()) break;
            if (sol.iterations >= max_iter_) {
                sol.status = LpStatus::iteration_limit;
                return false;
            }

            // duals for the current phase: y = B^{-T} c_B
            for (int p = 0; p < m_; ++p)
                y[p] = phase_cost(basis_[static_cast<std::size_t>(p)], phase1);
            btran(y);

            // pricing
            int entering = -1;
            double best_violation = 0;
            int direction = +1;
            for (int j = 0; j < total_; ++j) {
                auto sj = static_cast<std::size_t>(j);
                const VarState st = state_[sj];
                if (st == VarState::basic) continue;
                if (lower_[sj] == upper_[sj]) continue;  // fixed
                double d = phase1 ? 0.0 : cost_[sj];
                if (j < n_) {
                    for (int k = colptr_[sj]; k < colptr_[sj + 1]; ++k)
                        d -= vals_[static_cast<std::size_t>(k)] * y[rowidx_[static_cast<std::size_t>(k)]];
                } else {
                    d += y[j - n_];
                }
                double violation = 0;
                int dir = 0;
                if (st == VarState::at_lower && d < -opt_.opt_tol) {
                    violation = -d;
                    dir = +1;
                } else if (st == VarState::at_upper && d > opt_.opt_tol) {
                    violation = d;
                    dir = -1;
                } else if (st == VarState::nonbasic_free && std::abs(d) > opt_.opt_tol) {
                    violation = std::abs(d);
                    dir = d < 0 ? +1 : -1;
                }
                if (violation <= 0) continue;
                if (bland) {
                    entering = j;
                    direction = dir;
                    break;
                }
                if (violation > best_violation) {
                    best_violation = violation;
                    entering = j;
                    direction = dir;
                }
            }
            if (entering < 0) break;  // phase optimal

            // pivot column
            column_into(entering, w);
            ftran(w);

            const RatioResult rr = ratio_test(entering, direction, w, phase1, bland);
            if (rr.kind == RatioResult::kUnbounded) {
                if (phase1) {
                    // cannot happen for a consistent phase-1 direction;
                    // treat as numerical trouble
                    refactor();
                    compute_basic_values();
                    continue;
                }
                sol.status = LpStatus::unbounded;
                return false;
            }
            if (rr.kind == RatioResult::kNoPivot) {
                // every candidate pivot was numerically tiny: refactor and
                // retry under Bland's rule; give up after repeated stalls
                if (++nopivot_streak_ > 5) {
                    sol.status = LpStatus::iteration_limit;
                    return false;
                }
                refactor();
                compute_basic_values();
                bland = true;
                continue;
            }
            nopivot_streak_ = 0;

            apply_step(entering, direction, w, rr);
            ++sol.iterations;

            if (rr.step <= opt_.feas_tol) {
                if (++degenerate_streak >= opt_.bland_trigger) bland = true;
            } else {
                degenerate_streak = 0;
                bland = false;
            }

            if (static_cast<int>(etas_.size()) >= opt_.refactor_interval) {
                refactor();
                compute_basic_values();
            }
        }
        return true;
    }

    struct RatioResult {
        enum Kind { kStep, kBoundFlip, kUnbounded, kNoPivot } kind = kUnbounded;
        double step = 0;
        int leaving_pos = -1;     // basis position of the leaving variable
        VarState leaving_state = VarState::at_lower;
    };

    /// Per-basic step limit in the moving direction; infinite when the
    /// basic never blocks. In phase 1 an infeasible basic blocks only at
    /// the bound it is violating (reached from outside).
    double basic_limit(int p, double wp, bool phase1, VarState* target) const {
        auto j = static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)]);
        const double xj = xval_[j];
        const bool below = phase1 && xj < lower_[j] - opt_.feas_tol;
        const bool above = phase1 && xj > upper_[j] + opt_.feas_tol;
        double limit = kLpInf;
        if (below) {
            if (wp < 0 && std::isfinite(lower_[j])) {
                limit = (lower_[j] - xj) / (-wp);
                *target = VarState::at_lower;
            }
        } else if (above) {
            if (wp > 0 && std::isfinite(upper_[j])) {
                limit = (xj - upper_[j]) / wp;
                *target = VarState::at_upper;
            }
        } else if (wp > 0) {
            if (std::isfinite(lower_[j])) {
                limit = (xj - lower_[j]) / wp;
                *target = VarState::at_lower;
            }
        } else {
            if (std::isfinite(upper_[j])) {
                limit = (xj - upper_[j]) / wp;
                *target = VarState::at_upper;
            }
        }
        return std::isfinite(limit) ? std::max(limit, 0.0) : kLpInf;
    }

    /// Two-pass ratio test: first the tightest step, then among
    /// candidates within a relative tie window the largest pivot (or the
    /// lowest variable index under Bland's rule).
    RatioResult ratio_test(int entering, int direction, const Eigen::VectorXd& w, bool phase1,
                           bool bland) const {
        auto se = static_cast<std::size_t>(entering);
        RatioResult best;
        best.kind = RatioResult::kUnbounded;
        best.step = kLpInf;
        if (std::isfinite(lower_[se]) && std::isfinite(upper_[se])) {
            best.step = upper_[se] - lower_[se];
            best.kind = RatioResult::kBoundFlip;
        }

        const double sigma = static_cast<double>(direction);
        int tiny_candidates = 0;
        double t_min = best.step;
        for (int p = 0; p < m_; ++p) {
            const double wp = sigma * w[p];
            if (std::abs(wp) < opt_.pivot_tol) {
                if (std::abs(wp) > 1e-14) ++tiny_candidates;
                continue;
            }
            VarState target;
            t_min = std::min(t_min, basic_limit(p, wp, phase1, &target));
        }
        if (!std::isfinite(t_min)) {
            if (tiny_candidates > 0) best.kind = RatioResult::kNoPivot;
            return best;
        }
        if (best.kind == RatioResult::kBoundFlip && best.step <= t_min) return best;

        // exact ties only (floating-point dust), so the chosen basic
        // lands exactly on its bound and no error is injected
        const double tie_window = 1e-12 * (1.0 + t_min);
        double best_pivot = 0;
        for (int p = 0; p < m_; ++p) {
            const double wp = sigma * w[p];
            if (std::abs(wp) < opt_.pivot_tol) continue;
            VarState target;
            const double limit = basic_limit(p, wp, phase1, &target);
            if (limit > t_min + tie_window) continue;
            bool take;
            if (bland) {
                take = best.leaving_pos < 0 ||
                       basis_[static_cast<std::size_t>(p)] <
                           basis_[static_cast<std::size_t>(best.leaving_pos)];
            } else {
                take = std::abs(wp) > best_pivot;
            }
            if (take) {
                best.kind = RatioResult::kStep;
                best.step = limit;
                best.leaving_pos = p;
                best.leaving_state = target;
                best_pivot = std::abs(wp);
            }
        }
        if (best.leaving_pos < 0) best.kind = tiny_candidates > 0 ? RatioResult::kNoPivot
                                                                  : RatioResult::kUnbounded;
        return best;
    }

    void apply_step(int entering, int direction, const Eigen::VectorXd& w, const RatioResult& rr) {
        auto se = static_cast<std::size_t>(entering);
        const double sigma = static_cast<double>(direction);
        const double t = rr.step;

        // move basic values
        if (t != 0.0) {
            for (int p = 0; p < m_; ++p) {
                const double delta = sigma * t * w[p];
                if (delta != 0.0)
                    xval_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])] -= delta;
            }
        }
        const double new_val = xval_[se] + sigma * t;

        if (rr.kind == RatioResult::kBoundFlip) {
            xval_[se] = direction > 0 ? upper_[se] : lower_[se];
            state_[se] = direction > 0 ? VarState::at_upper : VarState::at_lower;
            return;
        }

        // basis exchange
        const int leaving = basis_[static_cast<std::size_t>(rr.leaving_pos)];
        auto sl = static_cast<std::size_t>(leaving);
        state_[sl] = rr.leaving_state;
        xval_[sl] = rr.leaving_state == VarState::at_lower ? lower_[sl] : upper_[sl];
        basis_pos_[sl] = -1;

        basis_[static_cast<std::size_t>(rr.leaving_pos)] = entering;
        basis_pos_[se] = rr.leaving_pos;
        state_[se] = VarState::basic;
        xval_[se] = new_val;

        // record the eta for this pivot
        Eta eta;
        eta.r = rr.leaving_pos;
        eta.wr = w[rr.leaving_pos];
        for (int p = 0; p < m_; ++p)
            if (w[p] != 0.0) {
                eta.idx.push_back(p);
                eta.val.push_back(w[p]);
            }
        etas_.push_back(std::move(eta));
    }

    // ---- results ------------------------------------------------------------

    LpSolution finish(LpSolution& sol) {
        refactor();
        compute_basic_values();

        // duals with the true objective
        Eigen::VectorXd y(m_);
        for (int p = 0; p < m_; ++p)
            y[p] = cost_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])];
        btran(y);

        sol.factorizations = factorizations_;
        sol.x.assign(static_cast<std::size_t>(n_), 0.0);
        sol.row_activity.assign(static_cast<std::size_t>(m_), 0.0);
        sol.y.assign(static_cast<std::size_t>(m_), 0.0);
        sol.z.assign(static_cast<std::size_t>(n_), 0.0);

        const bool scaled = !row_scale_.empty();
        for (int j = 0; j < n_; ++j) {
            auto sj = static_cast<std::size_t>(j);
            sol.x[sj] = xval_[sj] * (scaled ? col_scale_[sj] : 1.0);
        }
        for (int i = 0; i < m_; ++i) {
            auto si = static_cast<std::size_t>(i);
            // logical value is the scaled row activity
            sol.row_activity[si] = xval_[static_cast<std::size_t>(n_ + i)] /
                                   (scaled ? row_scale_[si] : 1.0);
            sol.y[si] = y[i] * (scaled ? row_scale_[si] : 1.0);
        }
        for (int j = 0; j < n_; ++j) {
            auto sj = static_cast<std::size_t>(j);
            double d = cost_[sj];
            for (int k = colptr_[sj]; k < colptr_[sj + 1]; ++k)
                d -= vals_[static_cast<std::size_t>(k)] * y[rowidx_[static_cast<std::size_t>(k)]];
            sol.z[sj] = d / (scaled ? col_scale_[sj] : 1.0);
        }

        double obj = 0;
        for (int j = 0; j < n_; ++j)
            obj += cost_[static_cast<std::size_t>(j)] * xval_[static_cast<std::size_t>(j)];
        sol.objective = obj;
        return sol;
    }

    struct Eta {
        int r = 0;
        double wr = 1;
        std::vector<int> idx;
        std::vector<double> val;
    };

    SimplexOptions opt_;
    std::vector<std::pair<int, int>> crash_hints_;
    int n_ = 0, m_ = 0, total_ = 0;
    long max_iter_ = 0;
    int factorizations_ = 0;
    int nopivot_streak_ = 0;

    std::vector<int> colptr_, rowidx_;
    std::vector<double> vals_;
    std::vector<double> cost_, lower_, upper_;
    std::vector<double> row_scale_, col_scale_;

    std::vector<VarState> state_;
    std::vector<double> xval_;
    std::vector<int> basis_, basis_pos_;

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    std::vector<Eta> etas_;
};

}  // namespace lpdetail

/// Solve an LP with the embedded bounded-variable revised simplex.
/// A numerical breakdown of the basis factorization triggers one
/// deterministic retry from the plain logical basis with stricter
/// pivoting before the failure propagates.
inline LpSolution solve_lp(const LpProblem& problem, const SimplexOptions& options = {}) {
    try {
        lpdetail::Simplex simplex(problem, options);
        LpSolution sol = simplex.run();
        sol.objective += problem.objective_constant;
        return sol;
    } catch (const std::runtime_error&) {
        SimplexOptions strict = options;
        strict.crash = false;
        strict.pivot_tol = std::max(options.pivot_tol * 100, 1e-7);
        strict.refactor_interval = std::max(8, options.refactor_interval / 4);
        lpdetail::Simplex simplex(problem, strict);
        LpSolution sol = simplex.run();
        sol.objective += problem.objective_constant;
        sol.pivot_policy += "+strict-retry";
        return sol;
    }
}

// -- independent verification ------------------------------------------------

struct LpVerifyReport {
    double max_row_residual = 0;        // activity outside [row_lower, row_upper]
    double max_col_bound_violation = 0;
    double duality_gap_rel = 0;
    double max_complementarity_residual = 0;
    double objective_recomputed = 0;
    double dual_objective = 0;

    bool ok(double primal_tol = 1e-6, double gap_tol = 1e-6) const {
        return max_row_residual <= primal_tol && max_col_bound_violation <= primal_tol &&
               duality_gap_rel <= gap_tol;
    }
};

/// Recompute every residual from the problem data and the returned
/// primal/dual values, independently of the solver's internal state.
inline LpVerifyReport verify_lp(const LpProblem& p, const LpSolution& sol) {
    LpVerifyReport rep;
    const auto n = static_cast<std::size_t>(p.num_cols());
    const auto m = static_cast<std::size_t>(p.num_rows());

    std::vector<double> activity(m, 0.0);
    for (const auto& e : p.entries)
        activity[static_cast<std::size_t>(e.row)] +=
            e.value * sol.x[static_cast<std::size_t>(e.col)];

    for (std::size_t i = 0; i < m; ++i) {
        const double lo = p.row_lower[i], up = p.row_upper[i];
        double viol = 0;
        if (activity[i] < lo) viol = lo - activity[i];
        if (activity[i] > up) viol = std::max(viol, activity[i] - up);
        rep.max_row_residual = std::max(rep.max_row_residual, viol);
    }
    for (std::size_t j = 0; j < n; ++j) {
        double viol = 0;
        if (sol.x[j] < p.col_lower[j]) viol = p.col_lower[j] - sol.x[j];
        if (sol.x[j] > p.col_upper[j]) viol = std::max(viol, sol.x[j] - p.col_upper[j]);
        rep.max_col_bound_violation = std::max(rep.max_col_bound_violation, viol);
    }

    double primal = p.objective_constant;
    for (std::size_t j = 0; j < n; ++j) primal += p.obj[j] * sol.x[j];
    rep.objective_recomputed = primal;

    // reduced costs from the duals: z = c - A'y
    std::vector<double> z(n);
    for (std::size_t j = 0; j < n; ++j) z[j] = p.obj[j];
    for (const auto& e : p.entries)
        z[static_cast<std::size_t>(e.col)] -= e.value * sol.y[static_cast<std::size_t>(e.row)];

    // dual objective: y pairs with the row bound matching its sign,
    // z with the column bound matching its sign
    const double mult_tol = 1e-7;
    double dual = p.objective_constant;
    for (std::size_t i = 0; i < m; ++i) {
        const double yi = sol.y[i];
        if (std::abs(yi) <= 0) continue;
        const double bound = yi > 0 ? p.row_lower[i] : p.row_upper[i];
        if (!std::isfinite(bound)) {
            if (std::abs(yi) > mult_tol)
                rep.max_complementarity_residual =
                    std::max(rep.max_complementarity_residual, std::abs(yi));
            continue;
        }
        dual += yi * bound;
        // complementarity: dual prices only bind at their bound
        const double dist = std::abs(activity[i] - bound);
        rep.max_complementarity_residual =
            std::max(rep.max_complementarity_residual, std::abs(yi) * dist);
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double zj = z[j];
        if (std::abs(zj) <= 0) continue;
        const double bound = zj > 0 ? p.col_lower[j] : p.col_upper[j];
        if (!std::isfinite(bound)) {
            if (std::abs(zj) > mult_tol)
                rep.max_complementarity_residual =
                    std::max(rep.max_complementarity_residual, std::abs(zj));
            continue;
        }
        dual += zj * bound;
        const double dist = std::abs(sol.x[j] - bound);
        rep.max_complementarity_residual =
            std::max(rep.max_complementarity_residual, std::abs(zj) * dist);
    }
    rep.dual_objective = dual;
    rep.duality_gap_rel = std::abs(primal - dual) / (1.0 + std::abs(primal));
    return rep;
}

}  // namespace gridweaver
