#pragma once

// Maximum feasible subsystem of |a_i^T theta| <= s under the gauge
// c^T theta = 1, posed as the Big-M MILP
//
//   min sum_d y_d   s.t.  |a_r^T theta| <= s + M y_owner(r),  c^T theta = 1,
//                         y_d in {0, 1}
//
// One binary per datum; all rows of a datum share it.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mfit/errors.hpp"
#include "mfit/geometry.hpp"
#include "mfit/lp.hpp"

namespace mfit {

enum class MaxFSEngine {
    automatic,           // vertex enumeration when affordable, else MILP
    milp,                // Big-M branch-and-bound
    vertex_enumeration,  // exhaustive arrangement vertices
};

struct MaxFSConfig {
    double big_m = 10000.0;
    int binary_cap = 200;
    int node_limit = 2000;
    MaxFSEngine engine = MaxFSEngine::automatic;
    bool refit = true;
    /// Seed branch-and-bound with the best minimal-subset hypothesis.
    bool mip_start = true;
    /// Upper bound on scalar work (row evaluations) for vertex enumeration.
    double enumeration_budget = 1.5e8;
    /// Number of minimal subsets tried when building a MIP start.
    long long mip_start_samples = 40000;
    double inlier_tol = 1e-9;
};

struct MaxFSResult {
    ModelParams params;       // reported parameters (least-squares refit when accepted)
    ModelParams milp_params;  // solution of the MaxFS problem itself
    std::vector<int> owners;  // datum id per mask entry, in first-appearance order
    std::vector<bool> inlier_mask;
    int inlier_count = 0;
    int objective = 0;  // number of deactivated data
    bool optimal = true;
    bool refit_applied = false;
    bool big_m_tight = false;  // some outlier row came within 1% of its Big-M slack
    int nodes_explored = 0;
    MaxFSEngine engine_used = MaxFSEngine::milp;
};

namespace detail {

/// Rows of a MaxFS instance with owners compacted to 0..D-1.
struct MaxFSRows {
    Eigen::MatrixXd A;
    std::vector<int> owner;     // compact owner per row
    std::vector<int> owner_id;  // datum id per compact owner
    int datum_count() const { return static_cast<int>(owner_id.size()); }
};

inline MaxFSRows compact_rows(std::span<const ConstraintRow> rows, const Eigen::VectorXd& gauge) {
    if (rows.empty()) throw InputError("MaxFS needs at least one constraint row");
    MaxFSRows out;
    const Eigen::Index p = gauge.size();
    out.A.resize(static_cast<Eigen::Index>(rows.size()), p);
    std::vector<std::pair<int, int>> seen;  // datum id -> compact index
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].a.size() != p) throw InputError("row length differs from gauge length");
        out.A.row(static_cast<Eigen::Index>(r)) = rows[r].a.transpose();
        int idx = -1;
        for (const auto& [id, k] : seen)
            if (id == rows[r].owner) idx = k;
        if (idx < 0) {
            idx = static_cast<int>(out.owner_id.size());
            seen.emplace_back(rows[r].owner, idx);
            out.owner_id.push_back(rows[r].owner);
        }
        out.owner.push_back(idx);
    }
    return out;
}

/// Per-datum inlier flags at bound s (every row within s + tol).
inline std::vector<bool> consensus_mask(const MaxFSRows& R, const Eigen::VectorXd& theta, double s, double tol) {
    std::vector<bool> ok(R.datum_count(), true);
    const Eigen::VectorXd r = R.A * theta;
    for (Eigen::Index i = 0; i < r.size(); ++i)
        if (!(std::abs(r[i]) <= s + tol)) ok[R.owner[i]] = false;
    return ok;
}

inline int count_true(const std::vector<bool>& v) {
    return static_cast<int>(std::count(v.begin(), v.end(), true));
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Advances idx to the next k-combination of {0..n-1}; false when exhausted.
inline bool next_combination(std::vector<int>& idx, int n) {
    const int k = static_cast<int>(idx.size());
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return false;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    return true;
}

inline double enumeration_cost(const MaxFSRows& R, int p) {
    const int rows = static_cast<int>(R.A.rows());
    return binomial(rows, p - 1) * std::ldexp(1.0, p - 1) * rows * (p - 1);
}

struct Candidate {
    Eigen::VectorXd theta;
    int count = -1;
};

/// Exact MaxFS by enumerating every vertex of the constraint arrangement:
/// p - 1 rows held at +-s together with the gauge. The optimal feasible
/// polytope is pointed for nondegenerate data, so one of its vertices is
/// visited. Ties keep the first vertex in lexicographic order.
inline Candidate vertex_enumeration(const MaxFSRows& R, const Eigen::VectorXd& gauge, double s, double tol) {
    const int p = static_cast<int>(gauge.size());
    const int rows = static_cast<int>(R.A.rows());
    const int D = R.datum_count();
    const int k = p - 1;
    Candidate best;
    if (rows < k) return best;
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    Eigen::MatrixXd B(p, p);
    Eigen::MatrixXd V(rows, k);
    Eigen::VectorXd u(rows), res(rows);
    std::vector<int> bad(D);
    const unsigned sign_count = 1u << k;
    do {
        B.row(0) = gauge.transpose();
        for (int j = 0; j < k; ++j) B.row(j + 1) = R.A.row(idx[j]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        const double det = lu.determinant();
        if (!(std::abs(det) > 1e-12 * std::pow(B.rowwise().norm().prod(), 1.0))) continue;
        const Eigen::MatrixXd Binv = lu.inverse();
        u = R.A * Binv.col(0);
        V = R.A * Binv.rightCols(k);
        for (unsigned mask = 0; mask < sign_count; ++mask) {
            res = u;
            for (int j = 0; j < k; ++j) res += ((mask >> j) & 1u ? -s : s) * V.col(j);
            std::fill(bad.begin(), bad.end(), 0);
            int failed = 0;
            bool pruned = false;
            for (int i = 0; i < rows; ++i) {
                if (!(std::abs(res[i]) <= s + tol) && !bad[R.owner[i]]) {
                    bad[R.owner[i]] = 1;
                    if (D - ++failed <= best.count) {
                        pruned = true;
                        break;
                    }
                }
            }
            if (pruned) continue;
            const int cnt = D - failed;
            if (cnt > best.count) {
                Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
                rhs[0] = 1.0;
                for (int j = 0; j < k; ++j) rhs[j + 1] = (mask >> j) & 1u ? -s : s;
                best.theta = Binv * rhs;
                best.count = cnt;
                if (cnt == D) return best;
            }
        }
    } while (next_combination(idx, rows));
    return best;
}

/// Chebyshev fit on a set of data: min t s.t. |a_r theta| <= t, c theta = 1.
inline std::optional<Eigen::VectorXd> chebyshev_fit(const MaxFSRows& R, const std::vector<bool>& use,
                                                    const Eigen::VectorXd& gauge) {
    const int p = static_cast<int>(gauge.size());
    LinearProgram lp;
    lp.objective = Eigen::VectorXd::Zero(p + 1);
    lp.objective[p] = 1.0;
    for (Eigen::Index i = 0; i < R.A.rows(); ++i) {
        if (!use[R.owner[i]]) continue;
        Eigen::VectorXd row(p + 1);
        row.head(p) = R.A.row(i).transpose();
        row[p] = -1.0;
        lp.ineq.push_back({row, 0.0});
        row.head(p) *= -1.0;
        lp.ineq.push_back({row, 0.0});
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p + 1);
    g.head(p) = gauge;
    lp.eq.push_back({g, 1.0});
    lp.bounds.assign(p + 1, VarBounds{-kInf, kInf});
    lp.bounds[p].lower = 0.0;
    const LPSolution sol = solve_lp(lp);
    if (sol.status != LPStatus::optimal) return std::nullopt;
    return Eigen::VectorXd(sol.x.head(p));
}

/// Exact fits through p - 1 rows under a fixed gauge, reusing the gauge
/// complement basis across calls (same solution as fit_dlt).
class MinimalFitter {
public:
    explicit MinimalFitter(const Eigen::VectorXd& gauge) : theta0_(gauge / gauge.squaredNorm()) {
        const Eigen::Index p = gauge.size();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauge);
        const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
        N_ = Q.rightCols(p - 1);
    }

    std::optional<Eigen::VectorXd> fit(const Eigen::MatrixXd& M) const {
        lu_.compute(M * N_);
        lu_.setThreshold(1e-10);
        if (!lu_.isInvertible()) return std::nullopt;
        Eigen::VectorXd theta = theta0_ + N_ * lu_.solve(-(M * theta0_));
        if (!theta.allFinite()) return std::nullopt;
        return theta;
    }

private:
    Eigen::VectorXd theta0_;
    Eigen::MatrixXd N_;
    mutable Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

/// Deterministic MIP start: exact fits of minimal subsets drawn in
/// lexicographic order over the (rank-ordered) data, best consensus kept,
/// then grown by Chebyshev refits while the consensus increases.
inline Candidate minimal_subset_start(const MaxFSRows& R, int rows_per_datum, int min_data,
                                      const Eigen::VectorXd& gauge, double s, double tol, long long samples) {
    Candidate best;
    const int D = R.datum_count();
    const int p = static_cast<int>(gauge.size());
    if (D < min_data) return best;
    // rows of compact datum d, assuming each datum's rows are contiguous
    std::vector<std::vector<int>> rows_of(D);
    for (Eigen::Index i = 0; i < R.A.rows(); ++i) rows_of[R.owner[i]].push_back(static_cast<int>(i));
    // largest prefix whose combinations fit the sample budget
    int prefix = min_data;
    while (prefix < D && binomial(prefix + 1, min_data) <= double(samples)) ++prefix;
    std::vector<int> idx(min_data);
    for (int i = 0; i < min_data; ++i) idx[i] = i;
    Eigen::MatrixXd M(p - 1, p);
    const MinimalFitter fitter(gauge);
    do {
        int k = 0;
        bool enough = true;
        for (int d : idx)
            for (int r : rows_of[d]) {
                if (k >= p - 1) break;
                M.row(k++) = R.A.row(r);
            }
        if (k < p - 1) enough = false;
        if (!enough) continue;
        const auto theta = fitter.fit(M);
        if (!theta) continue;
        const int cnt = count_true(consensus_mask(R, *theta, s, tol));
        if (cnt > best.count) best = {*theta, cnt};
    } while (next_combination(idx, prefix));
    (void)rows_per_datum;
    if (best.count < 0) return best;
    for (int round = 0; round < 10; ++round) {
        const auto mask = consensus_mask(R, best.theta, s, tol);
        const auto cheb = chebyshev_fit(R, mask, gauge);
        if (!cheb) break;
        const int cnt = count_true(consensus_mask(R, *cheb, s, tol));
        if (cnt < best.count) break;
        const bool grew = cnt > best.count;
        best = {*cheb, cnt};
        if (!grew) break;
    }
    return best;
}

}  // namespace detail

/// Builds the Big-M MILP. Variables are (theta, y); theta is free and each
/// datum owns one binary shared by all of its rows.
inline MILPProblem build_maxfs(std::span<const ConstraintRow> rows, const Eigen::VectorXd& gauge, double s,
                               const MaxFSConfig& cfg = {}) {
    if (!(s > 0.0)) throw InputError("inlier bound s must be positive");
    if (!(cfg.big_m > 0.0)) throw InputError("Big-M must be positive");
    const auto R = detail::compact_rows(rows, gauge);
    const int p = static_cast<int>(gauge.size());
    const int D = R.datum_count();
    MILPProblem prob;
    auto& lp = prob.lp;
    lp.objective = Eigen::VectorXd::Zero(p + D);
    lp.objective.tail(D).setOnes();
    for (Eigen::Index i = 0; i < R.A.rows(); ++i) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(p + D);
        row.head(p) = R.A.row(i).transpose();
        row[p + R.owner[i]] = -cfg.big_m;
        lp.ineq.push_back({row, s});
        row.head(p) *= -1.0;
        lp.ineq.push_back({row, s});
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p + D);
    g.head(p) = gauge;
    lp.eq.push_back({g, 1.0});
    lp.bounds.assign(p + D, VarBounds{-kInf, kInf});
    for (int d = 0; d < D; ++d) {
        lp.bounds[p + d] = VarBounds{0.0, 1.0};
        prob.binary_vars.push_back(p + d);
    }
    return prob;
}

/// Globally maximal consensus set at bound s (an optimal set; ties are
/// resolved by the deterministic search order).
inline MaxFSResult solve_maxfs(std::span<const ConstraintRow> rows, const Eigen::VectorXd& gauge, double s,
                               const MaxFSConfig& cfg = {}, int rows_per_datum = 0, int min_data = 0) {
    if (!(s > 0.0)) throw InputError("inlier bound s must be positive");
    const auto R = detail::compact_rows(rows, gauge);
    const int p = static_cast<int>(gauge.size());
    const int D = R.datum_count();
    if (rows_per_datum <= 0) rows_per_datum = std::max(1, static_cast<int>(R.A.rows()) / D);
    if (min_data <= 0) min_data = std::max(1, (p - 1 + rows_per_datum - 1) / rows_per_datum);
    if (D > cfg.binary_cap)
        throw InputError("MaxFS instance has " + std::to_string(D) + " data, cap is " +
                         std::to_string(cfg.binary_cap));

    MaxFSResult out;
    out.owners = R.owner_id;
    MaxFSEngine engine = cfg.engine;
    if (engine == MaxFSEngine::automatic)
        engine = detail::enumeration_cost(R, p) <= cfg.enumeration_budget ? MaxFSEngine::vertex_enumeration
                                                                           : MaxFSEngine::milp;

    Eigen::VectorXd theta;
    if (engine == MaxFSEngine::vertex_enumeration) {
        const auto cand = detail::vertex_enumeration(R, gauge, s, cfg.inlier_tol);
        if (cand.count >= 0) {
            theta = cand.theta;
            out.engine_used = MaxFSEngine::vertex_enumeration;
            out.optimal = true;
        } else {
            engine = MaxFSEngine::milp;  // no nondegenerate vertex: fall back
        }
    }
    if (engine == MaxFSEngine::milp) {
        const MILPProblem prob = build_maxfs(rows, gauge, s, cfg);
        MILPOptions opt;
        opt.node_limit = cfg.node_limit;
        opt.binary_cap = cfg.binary_cap;
        if (cfg.mip_start) {
            const auto start = detail::minimal_subset_start(R, rows_per_datum, min_data, gauge, s,
                                                            cfg.inlier_tol, cfg.mip_start_samples);
            if (start.count >= 0) {
                Eigen::VectorXd x(p + D);
                x.head(p) = start.theta;
                const auto mask = detail::consensus_mask(R, start.theta, s, 0.0);
                for (int d = 0; d < D; ++d) x[p + d] = mask[d] ? 0.0 : 1.0;
                opt.mip_start = x;
            }
        }
        const MILPSolution sol = solve_milp(prob, opt);
        if (!sol.has_incumbent) throw AlgorithmError("MaxFS MILP found no feasible point");
        theta = sol.x.head(p);
        out.optimal = sol.status == MILPStatus::optimal;
        out.nodes_explored = sol.nodes_explored;
        out.engine_used = MaxFSEngine::milp;
        const auto mask = detail::consensus_mask(R, theta, s, cfg.inlier_tol);
        for (Eigen::Index i = 0; i < R.A.rows(); ++i) {
            const double r = std::abs(R.A.row(i).dot(theta));
            if (!mask[R.owner[i]] && r > s + 0.99 * cfg.big_m) out.big_m_tight = true;
        }
    }

    out.milp_params = {theta};
    out.params = out.milp_params;
    out.inlier_mask = detail::consensus_mask(R, theta, s, cfg.inlier_tol);
    out.inlier_count = detail::count_true(out.inlier_mask);

    // least-squares refit on the inliers, kept only when it loses none of them
    if (cfg.refit && out.inlier_count > 0) {
        Eigen::MatrixXd sub(R.A.rows(), p);
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < R.A.rows(); ++i)
            if (out.inlier_mask[R.owner[i]]) sub.row(k++) = R.A.row(i);
        if (k >= p - 1) {
            const auto fit = fit_dlt(sub.topRows(k), gauge);
            if (fit) {
                auto mask = detail::consensus_mask(R, fit->theta, s, cfg.inlier_tol);
                bool keeps = true;
                for (int d = 0; d < D; ++d)
                    if (out.inlier_mask[d] && !mask[d]) keeps = false;
                if (keeps) {
                    out.params = *fit;
                    out.refit_applied = true;
                    out.inlier_mask = std::move(mask);
                    out.inlier_count = detail::count_true(out.inlier_mask);
                }
            }
        }
    }
    out.objective = D - out.inlier_count;
    return out;
}

inline MaxFSResult solve_maxfs(const ModelClass& model, std::span<const ConstraintRow> rows, double s,
                               const MaxFSConfig& cfg = {}) {
    return solve_maxfs(rows, model.gauge, s, cfg, model.rows_per_datum, model.min_data);
}

}  // namespace mfit
