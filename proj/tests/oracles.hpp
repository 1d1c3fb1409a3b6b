#pragma once

// Independent brute-force oracles used only by the tests. None of them call
// into the simplex, branch-and-bound or MaxFS code paths they check.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace mfit::oracle {

/// Calls f on every k-subset of {0..n-1} in lexicographic order.
inline void for_each_combination(int n, int k, const std::function<void(const std::vector<int>&)>& f) {
    if (k > n || k < 0) return;
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        f(idx);
        int i = k - 1;
        while (i >= 0 && idx[i] == n - k + i) --i;
        if (i < 0) return;
        ++idx[i];
        for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

/// Dense LP in inequality form: min c.x  s.t.  G x <= h,  E x = e.
struct DenseLP {
    Eigen::VectorXd c;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    Eigen::MatrixXd E;
    Eigen::VectorXd e;
};

/// Minimum over all basic feasible solutions. Assumes the feasible region is
/// pointed (has a vertex whenever nonempty) and the optimum is attained.
inline std::optional<double> vertex_enumeration_min(const DenseLP& lp, double tol = 1e-7) {
    const int n = static_cast<int>(lp.c.size());
    const int me = static_cast<int>(lp.E.rows());
    const int mi = static_cast<int>(lp.G.rows());
    const int need = n - me;
    std::optional<double> best;
    if (need < 0) return best;
    for_each_combination(mi, need, [&](const std::vector<int>& act) {
        Eigen::MatrixXd M(n, n);
        Eigen::VectorXd r(n);
        for (int i = 0; i < me; ++i) M.row(i) = lp.E.row(i), r[i] = lp.e[i];
        for (int k = 0; k < need; ++k) M.row(me + k) = lp.G.row(act[k]), r[me + k] = lp.h[act[k]];
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        if (lu.rank() < n) return;
        const Eigen::VectorXd x = lu.solve(r);
        const double scale = 1.0 + x.cwiseAbs().maxCoeff();
        if (mi > 0 && ((lp.G * x - lp.h).array() > tol * scale).any()) return;
        if (me > 0 && ((lp.E * x - lp.e).cwiseAbs().array() > tol * scale).any()) return;
        const double v = lp.c.dot(x);
        if (!best || v < *best) best = v;
    });
    return best;
}

/// True when some theta satisfies |a_i . theta| <= s for every row and
/// c . theta = 1. Checked by enumerating vertices of the feasible polytope,
/// made pointed by a large bounding box.
inline bool rows_feasible(const Eigen::MatrixXd& rows, const Eigen::VectorXd& gauge, double s) {
    const int p = static_cast<int>(gauge.size());
    if (rows.rows() == 0) return true;
    // a large box keeps the region pointed without cutting off any
    // solution of interest
    const double box = 1e6;
    const Eigen::Index R = rows.rows();
    DenseLP lp;
    lp.c = Eigen::VectorXd::Zero(p);
    lp.G.resize(2 * R + 2 * p, p);
    lp.h.resize(2 * R + 2 * p);
    lp.G.topRows(R) = rows;
    lp.G.middleRows(R, R) = -rows;
    lp.h.head(2 * R).setConstant(s);
    lp.G.middleRows(2 * R, p) = Eigen::MatrixXd::Identity(p, p);
    lp.G.bottomRows(p) = -Eigen::MatrixXd::Identity(p, p);
    lp.h.tail(2 * p).setConstant(box);
    lp.E = gauge.transpose();
    lp.e = Eigen::VectorXd::Ones(1);
    return vertex_enumeration_min(lp, 1e-9).has_value();
}

/// Maximum number of data (each owning rows_per_datum consecutive rows)
/// whose rows are jointly satisfiable at bound s.
inline int max_feasible_subset(const Eigen::MatrixXd& A, int rows_per_datum, const Eigen::VectorXd& gauge,
                               double s) {
    const int D = static_cast<int>(A.rows()) / rows_per_datum;
    int best = 0;
    for (unsigned mask = 0; mask < (1u << D); ++mask) {
        const int cnt = __builtin_popcount(mask);
        if (cnt <= best) continue;
        Eigen::MatrixXd sub(cnt * rows_per_datum, A.cols());
        int k = 0;
        for (int d = 0; d < D; ++d)
            if (mask & (1u << d))
                for (int r = 0; r < rows_per_datum; ++r) sub.row(k++) = A.row(d * rows_per_datum + r);
        if (rows_feasible(sub, gauge, s)) best = cnt;
    }
    return best;
}

/// Standard normal CDF from the all-positive series
///   erf(z) = 2/sqrt(pi) exp(-z^2) sum_n 2^n z^(2n+1) / (1*3*...*(2n+1)),
/// evaluated in long double. No cancellation occurs for z >= 0.
inline long double normal_cdf_series(long double z) {
    const long double pi = 3.141592653589793238462643383279502884L;
    auto erf_pos = [&](long double x) {
        long double term = x, sum = x;
        for (int n = 1; n < 2000; ++n) {
            term *= 2.0L * x * x / (2.0L * n + 1.0L);
            sum += term;
            if (term < sum * 1e-21L) break;
        }
        return 2.0L / std::sqrt(pi) * std::exp(-x * x) * sum;
    };
    const long double x = std::fabs(z) / std::sqrt(2.0L);
    const long double half_erf = 0.5L * erf_pos(x);
    return z >= 0 ? 0.5L + half_erf : 0.5L - half_erf;
}

/// Quantile by bisection on normal_cdf_series.
inline double normal_quantile_bisection(double p) {
    long double lo = -12.0L, hi = 12.0L;
    const long double target = p;
    for (int it = 0; it < 200; ++it) {
        const long double mid = 0.5L * (lo + hi);
        if (normal_cdf_series(mid) < target) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-16L) break;
    }
    return static_cast<double>(0.5L * (lo + hi));
}

/// min c.x  s.t.  G x <= h, the first nb variables binary, the remaining
/// ones continuous in [-box, box].
struct DenseMILP {
    Eigen::VectorXd c;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    int nb = 0;
    double box = 2.0;
};

/// Exhaustive enumeration over the 2^nb binary assignments; the continuous
/// part of each is solved by vertex enumeration.
inline std::optional<double> milp_enumeration_min(const DenseMILP& p) {
    const int n = static_cast<int>(p.c.size());
    const int nc = n - p.nb;
    const int m = static_cast<int>(p.G.rows());
    std::optional<double> best;
    for (long mask = 0; mask < (1L << p.nb); ++mask) {
        Eigen::VectorXd b(p.nb);
        for (int j = 0; j < p.nb; ++j) b[j] = (mask >> j) & 1;
        const Eigen::VectorXd rest = p.h - p.G.leftCols(p.nb) * b;
        std::optional<double> v;
        if (nc == 0) {
            if (m == 0 || (rest.array() >= -1e-9).all()) v = 0.0;
        } else {
            DenseLP lp;
            lp.c = p.c.tail(nc);
            lp.G.resize(m + 2 * nc, nc);
            lp.h.resize(m + 2 * nc);
            lp.G.topRows(m) = p.G.rightCols(nc);
            lp.h.head(m) = rest;
            lp.G.middleRows(m, nc) = Eigen::MatrixXd::Identity(nc, nc);
            lp.G.bottomRows(nc) = -Eigen::MatrixXd::Identity(nc, nc);
            lp.h.tail(2 * nc).setConstant(p.box);
            lp.E.resize(0, nc);
            lp.e.resize(0);
            v = vertex_enumeration_min(lp);
        }
        if (!v) continue;
        const double total = p.c.head(p.nb).dot(b) + *v;
        if (!best || total < *best) best = total;
    }
    return best;
}

/// Random instance with nb <= 10 binaries, up to two continuous variables
/// and a few dense inequalities; roughly one in ten is infeasible.
template <class Rng>
DenseMILP random_milp(Rng& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_int_distribution<int> NB(1, 10), NC(0, 2), M(1, 6);
    DenseMILP p;
    p.nb = NB(rng);
    const int n = p.nb + NC(rng), m = M(rng);
    p.c.resize(n);
    for (int j = 0; j < n; ++j) p.c[j] = U(rng);
    p.G.resize(m, n);
    p.h.resize(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) p.G(i, j) = U(rng);
        p.h[i] = 1.5 * U(rng) + 0.3;
    }
    return p;
}

}  // namespace mfit::oracle
