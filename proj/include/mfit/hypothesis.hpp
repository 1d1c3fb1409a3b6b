#pragma once

// Top-n ranked subsets and subset updating around IMaxFS-ISE.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mfit/geometry.hpp"
#include "mfit/imaxfs_ise.hpp"
#include "mfit/scale.hpp"

namespace mfit {

struct HypothesisState {
    ModelParams params;
    double subset_scale = 0.0;  // s from IMaxFS-ISE on the subset
    double sigma = 0.0;         // IKOSE scale over the whole dataset
    int inlier_count = 0;       // MaxFS inliers within the subset
    int K = 1;                  // K used by IMaxFS-ISE on the subset
    int sigma_K = 1;            // K used for sigma on the whole dataset
    bool sigma_fallback = false;
    bool optimal = true;
    std::vector<IseTraceEntry> trace;
};

struct SubsetState {
    std::vector<int> member_ids;  // rank order
    int h = 0;
    int K = 1;
    bool truncated = false;  // fewer than n data were available
    std::optional<HypothesisState> hypothesis;
};

struct HypothesisConfig {
    int n = 30;
    int K0 = 10;
    int max_updates = 20;
    /// Use the whole-data inlier count at sigma as the next K instead of the
    /// subset inlier count.
    bool whole_data_k = true;
    /// K is at most this fraction of the subset size.
    double k_cap = 0.8;
};

struct HypothesisResult {
    ModelParams params;
    double sigma = 0.0;
    double subset_scale = 0.0;
    int K = 1;
    std::vector<int> inlier_ids;  // MaxFS inliers of the final subset
    bool optimal = true;
    std::vector<SubsetState> history;
};

/// The n data with the highest score, ties to the lower id.
inline SubsetState initial_subset(std::span<const Datum> reduced, int n) {
    if (reduced.empty()) throw InputError("cannot build a subset of an empty dataset");
    std::vector<const Datum*> order;
    for (const auto& d : reduced) order.push_back(&d);
    std::stable_sort(order.begin(), order.end(), [](const Datum* a, const Datum* b) {
        return a->score != b->score ? a->score > b->score : a->id < b->id;
    });
    SubsetState st;
    st.truncated = static_cast<int>(order.size()) < n;
    const int take = std::min<int>(n, static_cast<int>(order.size()));
    for (int i = 0; i < take; ++i) st.member_ids.push_back(order[i]->id);
    return st;
}

/// Unnormalized P(x | q, theta) = q exp(-r^2 / (2 sigma^2)).
inline double inlier_probability(double score, double residual, double sigma) {
    if (!(sigma > 0.0)) throw InputError("sigma must be positive");
    return score * std::exp(-residual * residual / (2.0 * sigma * sigma));
}

inline double inlier_probability(const ModelClass& model, const Datum& d, const ModelParams& params, double sigma) {
    return inlier_probability(d.score, datum_residual(model, params, d), sigma);
}

namespace detail {

inline std::vector<Datum> pick(std::span<const Datum> data, const std::vector<int>& ids) {
    std::vector<Datum> out;
    out.reserve(ids.size());
    for (int id : ids) {
        auto it = std::find_if(data.begin(), data.end(), [&](const Datum& d) { return d.id == id; });
        out.push_back(*it);
    }
    return out;
}

}  // namespace detail

/// Runs IMaxFS-ISE on a top-n subset, re-ranks the reduced data by inlier
/// probability under the whole-data scale and repeats with K set to the last
/// inlier count, until that count or the subset stops changing.
inline HypothesisResult generate_hypothesis(const ModelClass& model, std::span<const Datum> reduced,
                                            std::span<const Datum> full, const HypothesisConfig& cfg,
                                            const IseConfig& ise_cfg, const MaxFSConfig& maxfs_cfg = {}) {
    if (static_cast<int>(reduced.size()) < model.min_data)
        throw InsufficientInliersError("reduced dataset smaller than a minimal subset");
    if (cfg.K0 < 1) throw InputError("K0 must be at least 1");
    const DesignMatrix full_dm = make_design(model, full);

    HypothesisResult out;
    SubsetState st = initial_subset(reduced, cfg.n);
    st.K = cfg.K0;
    int best = -1;
    std::optional<int> prev_count;
    auto adopt = [&out](const HypothesisState& hs, const IseResult& ise) {
        out.params = hs.params;
        out.sigma = hs.sigma;
        out.subset_scale = hs.subset_scale;
        out.K = hs.sigma_K;
        out.optimal = hs.optimal;
        out.inlier_ids.clear();
        for (std::size_t i = 0; i < ise.owners.size(); ++i)
            if (ise.inlier_mask[i]) out.inlier_ids.push_back(ise.owners[i]);
    };
    for (int h = 0; h < cfg.max_updates; ++h) {
        st.h = h;
        const auto subset = detail::pick(reduced, st.member_ids);
        const auto rows = build_rows(model, subset);
        IseConfig ic = ise_cfg;
        // IKOSE needs more than K inliers, so leave a margin on clean subsets
        ic.K = std::max(1, std::min(st.K, static_cast<int>(cfg.k_cap * static_cast<double>(subset.size()))));
        IseResult ise;
        try {
            // breakdown means K is too large for this subset; halve it
            for (;;) {
                try {
                    ise = imaxfs_ise(model, rows, ic, maxfs_cfg);
                    break;
                } catch (const BreakdownError&) {
                    if (ic.K <= 1) throw;
                    ic.K = std::max(1, ic.K / 2);
                }
            }
        } catch (const BreakdownError&) {
            if (h == 0) throw;
            break;  // keep the best state so far
        } catch (const InsufficientInliersError&) {
            if (h == 0) throw;
            break;
        }

        HypothesisState hs;
        hs.params = ise.params;
        hs.subset_scale = ise.scale;
        hs.inlier_count = ise.inlier_count;
        hs.K = ic.K;
        hs.optimal = ise.optimal;
        hs.trace = ise.trace;
        const auto res = datum_residuals(full_dm, ise.params.theta);
        hs.sigma = 0.0;
        for (int k : {ic.K}) {
            try {
                hs.sigma_K = std::min<int>(k, static_cast<int>(res.size()));
                hs.sigma = ikose(res, hs.sigma_K).scale;
                break;
            } catch (const AlgorithmError&) {
            }
        }
        if (!(hs.sigma > 0.0)) {
            hs.sigma = ise.scale;
            hs.sigma_fallback = true;
        }
        hs.sigma = std::max(hs.sigma, ise_cfg.scale_floor);
        st.K = ic.K;
        st.hypothesis = hs;
        out.history.push_back(st);

        if (hs.inlier_count > best) {
            best = hs.inlier_count;
            adopt(hs, ise);
        }
        if (prev_count && *prev_count == hs.inlier_count) {
            adopt(hs, ise);  // latest state is final
            break;
        }
        prev_count = hs.inlier_count;

        // re-rank the reduced data
        std::vector<std::pair<double, int>> ranked;
        ranked.reserve(reduced.size());
        for (const auto& d : reduced)
            ranked.emplace_back(inlier_probability(model, d, hs.params, hs.sigma), d.id);
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        SubsetState next;
        next.truncated = st.truncated;
        for (int i = 0; i < static_cast<int>(st.member_ids.size()); ++i) next.member_ids.push_back(ranked[i].second);
        if (cfg.whole_data_k) {
            int cnt = 0;
            for (double r : res) cnt += r < kIkoseCutoff * hs.sigma;
            next.K = std::max(1, cnt);
        } else {
            next.K = std::max(1, hs.inlier_count);
        }
        auto a = st.member_ids, b = next.member_ids;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a == b) {
            adopt(hs, ise);
            break;
        }
        st = std::move(next);
    }
    return out;
}

}  // namespace mfit
