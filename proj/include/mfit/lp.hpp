#pragma once

// Dense bounded-variable primal simplex and a best-first branch-and-bound
// MILP solver on top of it. Sized for problems of a few hundred rows.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "mfit/errors.hpp"

namespace mfit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinearConstraint {
    Eigen::VectorXd row;
    double rhs = 0.0;
};

struct VarBounds {
    double lower = 0.0;
    double upper = kInf;
};

/// minimize objective . x  s.t.  ineq rows (row . x <= rhs), eq rows
/// (row . x = rhs), lower <= x <= upper.
struct LinearProgram {
    Eigen::VectorXd objective;
    std::vector<LinearConstraint> ineq;
    std::vector<LinearConstraint> eq;
    std::vector<VarBounds> bounds;

    int var_count() const { return static_cast<int>(objective.size()); }
};

enum class LPStatus { optimal, infeasible, unbounded, iteration_limit };

struct LPSolution {
    LPStatus status = LPStatus::infeasible;
    Eigen::VectorXd x;
    double objective = 0.0;
    int iterations = 0;
};

struct SimplexOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-11;
    int max_iterations = 0;  // 0: 100 * (rows + vars)
};

namespace detail {

class BoundedSimplex {
public:
    BoundedSimplex(const LinearProgram& lp, std::span<const VarBounds> bounds, const SimplexOptions& opt)
        : opt_(opt), n_(lp.var_count()) {
        const int mi = static_cast<int>(lp.ineq.size());
        const int me = static_cast<int>(lp.eq.size());
        m_ = mi + me;
        nslack_ = mi;

        lb_.assign(n_ + nslack_, 0.0);
        ub_.assign(n_ + nslack_, kInf);
        for (int j = 0; j < n_; ++j) lb_[j] = bounds[j].lower, ub_[j] = bounds[j].upper;
        for (int j = 0; j < n_; ++j)
            if (lb_[j] > ub_[j]) infeasible_bounds_ = true;

        x_.assign(n_ + nslack_, 0.0);
        for (int j = 0; j < n_; ++j) {
            if (std::isfinite(lb_[j])) x_[j] = lb_[j];
            else if (std::isfinite(ub_[j])) x_[j] = ub_[j];
            else x_[j] = 0.0;
        }

        // residual of each row at the starting point decides whether the
        // slack can be basic or an artificial column is needed
        std::vector<double> rhs(m_);
        std::vector<int> art_rows;
        std::vector<double> art_sign;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m_, n_ + nslack_);
        for (int i = 0; i < m_; ++i) {
            const auto& c = i < mi ? lp.ineq[i] : lp.eq[i - mi];
            if (c.row.size() != n_) throw InputError("constraint row length differs from variable count");
            A.row(i).head(n_) = c.row.transpose();
            if (i < mi) A(i, n_ + i) = 1.0;
            rhs[i] = c.rhs;
        }
        basis_.assign(m_, -1);
        std::vector<double> resid(m_);
        for (int i = 0; i < m_; ++i) {
            double r = rhs[i];
            for (int j = 0; j < n_; ++j)
                if (x_[j] != 0.0) r -= A(i, j) * x_[j];
            resid[i] = r;
            if (i < mi && r >= 0.0) {
                basis_[i] = n_ + i;
            } else {
                art_rows.push_back(i);
                art_sign.push_back(r >= 0.0 ? 1.0 : -1.0);
            }
        }
        nart_ = static_cast<int>(art_rows.size());
        ntot_ = n_ + nslack_ + nart_;
        lb_.resize(ntot_, 0.0);
        ub_.resize(ntot_, kInf);
        x_.resize(ntot_, 0.0);

        // tableau = B^-1 [A | I_art]; the initial basis is diagonal with +-1
        T_ = Eigen::MatrixXd::Zero(m_, ntot_);
        T_.leftCols(n_ + nslack_) = A;
        for (int k = 0; k < nart_; ++k) {
            const int i = art_rows[k];
            T_(i, n_ + nslack_ + k) = art_sign[k];
            basis_[i] = n_ + nslack_ + k;
            if (art_sign[k] < 0.0) T_.row(i) *= -1.0;  // make the basic column +1
        }
        is_basic_.assign(ntot_, -1);
        for (int i = 0; i < m_; ++i) is_basic_[basis_[i]] = i;
        for (int i = 0; i < m_; ++i) x_[basis_[i]] = std::abs(resid[i]);
        for (double r : rhs) rhs_scale_ = std::max(rhs_scale_, std::abs(r));

        cost_ = Eigen::VectorXd::Zero(ntot_);
        objective_ = lp.objective;
        max_iter_ = opt.max_iterations > 0 ? opt.max_iterations : 100 * (m_ + ntot_);
    }

    LPSolution solve() {
        LPSolution sol;
        if (infeasible_bounds_) {
            sol.status = LPStatus::infeasible;
            return sol;
        }
        // phase 1: drive artificials to zero
        if (nart_ > 0) {
            cost_.setZero();
            for (int k = 0; k < nart_; ++k) cost_[n_ + nslack_ + k] = 1.0;
            const LPStatus st = run_phase();
            sol.iterations = iterations_;
            if (st == LPStatus::iteration_limit) {
                sol.status = st;
                return sol;
            }
            double infeas = 0.0;
            for (int k = 0; k < nart_; ++k) infeas += x_[n_ + nslack_ + k];
            if (infeas > opt_.feasibility_tol * std::max(1.0, rhs_scale_)) {
                sol.status = LPStatus::infeasible;
                return sol;
            }
            for (int k = 0; k < nart_; ++k) {
                const int j = n_ + nslack_ + k;
                ub_[j] = 0.0;
                if (is_basic_[j] < 0) x_[j] = 0.0;
            }
        }
        cost_.setZero();
        cost_.head(n_) = objective_;
        const LPStatus st = run_phase();
        sol.iterations = iterations_;
        sol.status = st;
        if (st != LPStatus::optimal) return sol;
        sol.x = Eigen::VectorXd(n_);
        for (int j = 0; j < n_; ++j) sol.x[j] = x_[j];
        sol.objective = objective_.dot(sol.x);
        return sol;
    }

private:
    LPStatus run_phase() {
        // reduced costs d = c - c_B^T T
        Eigen::VectorXd cb(m_);
        for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
        d_ = cost_ - T_.transpose() * cb;
        int degenerate_run = 0;
        while (true) {
            if (iterations_ >= max_iter_) return LPStatus::iteration_limit;
            const bool bland = degenerate_run > 50;
            int enter = -1;
            double best = 0.0;
            int dir = 0;
            for (int j = 0; j < ntot_; ++j) {
                if (is_basic_[j] >= 0) continue;
                if (lb_[j] == ub_[j]) continue;
                const double dj = d_[j];
                int cand_dir = 0;
                if (dj < -opt_.optimality_tol && x_[j] < ub_[j]) cand_dir = +1;
                else if (dj > opt_.optimality_tol && x_[j] > lb_[j]) cand_dir = -1;
                if (cand_dir == 0) continue;
                if (bland) {
                    enter = j, dir = cand_dir;
                    break;
                }
                if (std::abs(dj) > best) best = std::abs(dj), enter = j, dir = cand_dir;
            }
            if (enter < 0) return LPStatus::optimal;

            // ratio test; ties go to the larger pivot, or to the lowest
            // variable index while in Bland mode
            double theta = kInf;
            if (std::isfinite(lb_[enter]) && std::isfinite(ub_[enter])) theta = ub_[enter] - lb_[enter];
            int leave_row = -1;
            double leave_alpha = 0.0;
            for (int i = 0; i < m_; ++i) {
                const double alpha = dir * T_(i, enter);
                if (std::abs(alpha) <= opt_.pivot_tol) continue;
                const int b = basis_[i];
                double lim = kInf;
                if (alpha > 0 && std::isfinite(lb_[b])) lim = std::max(0.0, x_[b] - lb_[b]) / alpha;
                if (alpha < 0 && std::isfinite(ub_[b])) lim = std::max(0.0, ub_[b] - x_[b]) / -alpha;
                if (!std::isfinite(lim)) continue;
                if (lim < theta - 1e-12) {
                    theta = lim, leave_row = i, leave_alpha = alpha;
                } else if (leave_row >= 0 && lim <= theta + 1e-12) {
                    const bool better = bland ? b < basis_[leave_row]
                                              : std::abs(alpha) > std::abs(leave_alpha);
                    if (better) theta = std::min(theta, lim), leave_row = i, leave_alpha = alpha;
                }
            }
            if (!std::isfinite(theta)) return LPStatus::unbounded;
            ++iterations_;
            degenerate_run = theta <= 1e-12 ? degenerate_run + 1 : 0;

            const double step = dir * theta;
            for (int i = 0; i < m_; ++i) x_[basis_[i]] -= step * T_(i, enter);
            x_[enter] += step;

            if (leave_row < 0) {  // bound flip of the entering variable
                x_[enter] = dir > 0 ? ub_[enter] : lb_[enter];
                continue;
            }
            const int leave = basis_[leave_row];
            // snap the leaving variable onto the bound it reached
            x_[leave] = leave_alpha > 0 ? lb_[leave] : ub_[leave];
            pivot(leave_row, enter);
        }
    }

    void pivot(int r, int j) {
        const double piv = T_(r, j);
        T_.row(r) /= piv;
        // rank-one elimination; column-major storage makes this the fast order
        Eigen::VectorXd f = T_.col(j);
        f[r] = 0.0;
        const Eigen::RowVectorXd pr = T_.row(r);
        T_.noalias() -= f * pr;
        const double dj = d_[j];
        if (dj != 0.0) d_ -= dj * T_.row(r).transpose();
        is_basic_[basis_[r]] = -1;
        basis_[r] = j;
        is_basic_[j] = r;
    }

    SimplexOptions opt_;
    int n_ = 0, m_ = 0, nslack_ = 0, nart_ = 0, ntot_ = 0;
    int iterations_ = 0, max_iter_ = 0;
    bool infeasible_bounds_ = false;
    std::vector<double> lb_, ub_, x_;
    std::vector<int> basis_, is_basic_;
    Eigen::MatrixXd T_;
    double rhs_scale_ = 0.0;
    Eigen::VectorXd cost_, d_, objective_;
};

}  // namespace detail

/// Solves an LP with per-variable bounds overriding `lp.bounds`.
inline LPSolution solve_lp(const LinearProgram& lp, std::span<const VarBounds> bounds,
                           const SimplexOptions& opt = {}) {
    if (static_cast<int>(bounds.size()) != lp.var_count())
        throw InputError("bounds size differs from variable count");
    detail::BoundedSimplex simplex(lp, bounds, opt);
    return simplex.solve();
}

inline LPSolution solve_lp(const LinearProgram& lp, const SimplexOptions& opt = {}) {
    std::vector<VarBounds> bounds = lp.bounds;
    if (bounds.empty()) bounds.assign(lp.var_count(), VarBounds{});
    return solve_lp(lp, bounds, opt);
}

/// Largest violation of the constraints and bounds of `lp` at x.
inline double max_violation(const LinearProgram& lp, std::span<const VarBounds> bounds,
                            const Eigen::VectorXd& x) {
    double v = 0.0;
    for (const auto& c : lp.ineq) v = std::max(v, c.row.dot(x) - c.rhs);
    for (const auto& c : lp.eq) v = std::max(v, std::abs(c.row.dot(x) - c.rhs));
    for (int j = 0; j < lp.var_count(); ++j) {
        v = std::max(v, bounds[j].lower - x[j]);
        v = std::max(v, x[j] - bounds[j].upper);
    }
    return v;
}

// ---------------------------------------------------------------------------

struct MILPProblem {
    LinearProgram lp;
    std::vector<int> binary_vars;
};

enum class MILPStatus { optimal, infeasible, iteration_limit };

struct MILPSolution {
    MILPStatus status = MILPStatus::infeasible;
    Eigen::VectorXd x;
    double objective_value = 0.0;
    int nodes_explored = 0;
    bool has_incumbent = false;
};

struct MILPOptions {
    int node_limit = 100000;
    int binary_cap = 200;
    double integrality_tol = 1e-6;
    SimplexOptions simplex;
    /// Feasible starting solution; ignored when it violates the constraints.
    std::optional<Eigen::VectorXd> mip_start;
};

namespace detail {

struct BBNode {
    double bound;
    int id;
    std::vector<signed char> fix;  // -1 free, 0 or 1 fixed
};

struct BBNodeOrder {
    bool operator()(const BBNode& a, const BBNode& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;
    }
};

}  // namespace detail

/// Exact best-first branch-and-bound. Branches on the most fractional binary
/// (lowest index on ties), floor child first; nodes are ordered by
/// (LP bound, creation id), so the search is fully deterministic.
inline MILPSolution solve_milp(const MILPProblem& p, const MILPOptions& opt = {}) {
    const LinearProgram& lp = p.lp;
    const int n = lp.var_count();
    const int nb = static_cast<int>(p.binary_vars.size());
    if (nb > opt.binary_cap)
        throw InputError("MILP has " + std::to_string(nb) + " binaries, cap is " +
                         std::to_string(opt.binary_cap));
    std::vector<VarBounds> base = lp.bounds;
    if (base.empty()) base.assign(n, VarBounds{});
    for (int b : p.binary_vars) {
        if (b < 0 || b >= n) throw InputError("binary variable index out of range");
        base[b].lower = std::max(base[b].lower, 0.0);
        base[b].upper = std::min(base[b].upper, 1.0);
    }

    // objective integral on every integer point: bounds can be rounded up
    bool integral_objective = true;
    {
        std::vector<bool> is_bin(n, false);
        for (int b : p.binary_vars) is_bin[b] = true;
        for (int j = 0; j < n; ++j) {
            const double c = lp.objective[j];
            if (!is_bin[j] && c != 0.0) integral_objective = false;
            if (is_bin[j] && c != std::round(c)) integral_objective = false;
        }
    }
    const double feas_tol = 1e-6;
    auto effective_bound = [&](double v) {
        return integral_objective ? std::ceil(v - 1e-6) : v;
    };

    MILPSolution best;
    double incumbent = kInf;
    auto consider = [&](const Eigen::VectorXd& x) {
        const double obj = lp.objective.dot(x);
        if (obj < incumbent - 1e-9) {
            incumbent = obj;
            best.x = x;
            best.objective_value = obj;
            best.has_incumbent = true;
        }
    };
    auto is_integral = [&](const Eigen::VectorXd& x) {
        for (int b : p.binary_vars)
            if (std::abs(x[b] - std::round(x[b])) > opt.integrality_tol) return false;
        return true;
    };

    if (opt.mip_start && opt.mip_start->size() == n && is_integral(*opt.mip_start) &&
        max_violation(lp, base, *opt.mip_start) <= feas_tol)
        consider(*opt.mip_start);

    std::priority_queue<detail::BBNode, std::vector<detail::BBNode>, detail::BBNodeOrder> open;
    int next_id = 0;
    open.push({-kInf, next_id++, std::vector<signed char>(nb, -1)});
    bool limit_hit = false;
    std::vector<VarBounds> bounds(n);

    while (!open.empty()) {
        detail::BBNode node = open.top();
        open.pop();
        if (best.has_incumbent && effective_bound(node.bound) >= incumbent - 1e-9) continue;
        if (best.nodes_explored >= opt.node_limit) {
            limit_hit = true;
            break;
        }
        bounds = base;
        for (int k = 0; k < nb; ++k)
            if (node.fix[k] >= 0) bounds[p.binary_vars[k]] = {double(node.fix[k]), double(node.fix[k])};
        const LPSolution rel = solve_lp(lp, bounds, opt.simplex);
        ++best.nodes_explored;
        if (rel.status != LPStatus::optimal) continue;  // infeasible subtree
        if (best.has_incumbent && effective_bound(rel.objective) >= incumbent - 1e-9) continue;

        if (is_integral(rel.x)) {
            consider(rel.x);
            continue;
        }
        // rounding heuristic: push fractional binaries up and keep the
        // point if it stays feasible
        {
            Eigen::VectorXd xr = rel.x;
            for (int b : p.binary_vars) xr[b] = xr[b] > opt.integrality_tol ? 1.0 : 0.0;
            if (max_violation(lp, base, xr) <= feas_tol) consider(xr);
        }
        int branch = -1;
        double most = -1.0;
        for (int k = 0; k < nb; ++k) {
            const double v = rel.x[p.binary_vars[k]];
            const double frac = std::abs(v - std::round(v));
            if (frac <= opt.integrality_tol) continue;
            const double score = 0.5 - std::abs(v - std::floor(v) - 0.5);
            if (score > most + 1e-12) most = score, branch = k;
        }
        for (signed char side : {0, 1}) {
            detail::BBNode child{rel.objective, next_id++, node.fix};
            child.fix[branch] = side;
            open.push(std::move(child));
        }
    }

    if (!best.has_incumbent) {
        best.status = limit_hit ? MILPStatus::iteration_limit : MILPStatus::infeasible;
        return best;
    }
    best.status = limit_hit ? MILPStatus::iteration_limit : MILPStatus::optimal;

    // polish: fix the binaries at their integer values and re-solve the
    // continuous part, so no Big-M leakage survives from integrality slack
    bounds = base;
    for (int b : p.binary_vars) {
        const double v = std::round(best.x[b]);
        bounds[b] = {v, v};
    }
    const LPSolution pol = solve_lp(lp, bounds, opt.simplex);
    if (pol.status == LPStatus::optimal && pol.objective <= best.objective_value + 1e-7) {
        best.x = pol.x;
        for (int b : p.binary_vars) best.x[b] = std::round(best.x[b]);
        best.objective_value = lp.objective.dot(best.x);
    }
    return best;
}

inline MILPSolution solve_milp(const MILPProblem& p, int node_limit) {
    MILPOptions opt;
    opt.node_limit = node_limit;
    return solve_milp(p, opt);
}

}  // namespace mfit
