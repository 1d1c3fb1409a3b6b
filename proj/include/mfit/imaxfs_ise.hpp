#pragma once

// Alternating MaxFS / IKOSE scale estimation.

#include <cmath>
#include <span>
#include <vector>

#include "mfit/errors.hpp"
#include "mfit/maxfs.hpp"
#include "mfit/scale.hpp"

namespace mfit {

struct IseConfig {
    double s0 = 0.01;
    double epsilon = 0.0;  // 0 means s0
    int inlier_threshold = 10;
    int K = 10;
    double rel_tol = 1e-3;
    int max_outer_iter = 50;
    double scale_floor = 1e-8;
    bool cycle_shortcut = true;
};

struct IseTraceEntry {
    int t = 0;
    double s = 0.0;
    int inliers = 0;
    ModelParams params;  // theta_t the count refers to
};

struct IseResult {
    ModelParams params;
    double scale = 0.0;
    int inlier_count = 0;
    std::vector<bool> inlier_mask;  // per datum, in MaxFSResult::owners order
    std::vector<int> owners;
    bool optimal = true;  // every MaxFS solve in the loop was proven optimal
    bool converged = false;
    std::vector<IseTraceEntry> trace;
};

/// Breakdown raised inside the loop, with the partial trace.
class IseBreakdownError : public BreakdownError {
public:
    IseBreakdownError(const std::string& what, std::vector<IseTraceEntry> trace)
        : BreakdownError(what), trace_(std::move(trace)) {}
    const std::vector<IseTraceEntry>& trace() const { return trace_; }

private:
    std::vector<IseTraceEntry> trace_;
};

/// Algorithm: solve MaxFS at s_t; when more than I_th data are inliers the
/// next scale is IKOSE on every datum's residual w.r.t. theta_t, otherwise
/// s_t + epsilon. Stops when the scale settles and returns (theta_t, s_t).
///
/// Each step is a pure function of s_t, so once a scale repeats exactly the
/// sequence is periodic; the remaining iterations are then filled in from
/// the cycle instead of being re-solved. Results equal a full run.
inline IseResult imaxfs_ise(std::span<const ConstraintRow> rows, const Eigen::VectorXd& gauge, const IseConfig& cfg,
                            const MaxFSConfig& maxfs_cfg = {}, int rows_per_datum = 0, int min_data = 0) {
    if (!(cfg.s0 > 0.0)) throw InputError("s0 must be positive");
    if (cfg.K < 1) throw InputError("K must be at least 1");
    if (!(cfg.rel_tol > 0.0)) throw InputError("rel_tol must be positive");
    if (cfg.max_outer_iter < 1) throw InputError("max_outer_iter must be at least 1");
    const auto R = detail::compact_rows(rows, gauge);
    const int D = R.datum_count();
    const double eps = cfg.epsilon > 0.0 ? cfg.epsilon : cfg.s0;

    IseResult out;
    bool exceeded = false;
    std::vector<MaxFSResult> states;
    std::vector<double> res(D);
    auto adopt = [&out](const MaxFSResult& m, double s) {
        out.params = m.params;
        out.scale = s;
        out.inlier_count = m.inlier_count;
        out.inlier_mask = m.inlier_mask;
        out.owners = m.owners;
    };
    double s = cfg.s0;
    for (int t = 0; t < cfg.max_outer_iter; ++t) {
        int seen = -1;
        for (int u = 0; u < t && seen < 0 && cfg.cycle_shortcut; ++u)
            if (out.trace[u].s == s) seen = u;
        if (seen >= 0) {
            const int period = t - seen;
            for (int k = t; k < cfg.max_outer_iter; ++k) {
                const auto& e = out.trace[seen + (k - seen) % period];
                out.trace.push_back({k, e.s, e.inliers, e.params});
            }
            const int last = seen + (cfg.max_outer_iter - 1 - seen) % period;
            adopt(states[last], out.trace[last].s);
            break;
        }
        MaxFSResult m = solve_maxfs(rows, gauge, s, maxfs_cfg, rows_per_datum, min_data);
        out.trace.push_back({t, s, m.inlier_count, m.params});
        out.optimal = out.optimal && m.optimal;
        adopt(m, s);

        double next;
        if (m.inlier_count > cfg.inlier_threshold) {
            exceeded = true;
            std::fill(res.begin(), res.end(), 0.0);
            const Eigen::VectorXd r = R.A * m.params.theta;
            for (Eigen::Index i = 0; i < r.size(); ++i)
                res[R.owner[i]] = std::max(res[R.owner[i]], std::abs(r[i]));
            try {
                next = ikose(res, std::min(cfg.K, D)).scale;
            } catch (const ZeroScaleError&) {
                next = cfg.scale_floor;
            } catch (const BreakdownError& e) {
                throw IseBreakdownError(e.what(), out.trace);
            }
            next = std::max(next, cfg.scale_floor);
        } else {
            next = s + eps;
        }
        states.push_back(std::move(m));
        if (std::abs(next - s) <= cfg.rel_tol * std::max(s, cfg.scale_floor)) {
            out.converged = true;
            break;
        }
        s = next;
    }
    if (!exceeded)
        throw InsufficientInliersError("inlier count never exceeded " + std::to_string(cfg.inlier_threshold));
    return out;
}

inline IseResult imaxfs_ise(const ModelClass& model, std::span<const ConstraintRow> rows, const IseConfig& cfg,
                            const MaxFSConfig& maxfs_cfg = {}) {
    return imaxfs_ise(rows, model.gauge, cfg, maxfs_cfg, model.rows_per_datum, model.min_data);
}

}  // namespace mfit
