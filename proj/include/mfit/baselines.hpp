#pragma once

// Random-sampling baselines: uniform RANSAC and PROSAC, plus a sequential
// fit-and-remove driver that shares the pipeline's labeling stage.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "mfit/pipeline.hpp"

namespace mfit {

enum class SamplerKind { ransac, prosac };

struct SamplerConfig {
    SamplerKind kind = SamplerKind::ransac;
    long long iterations = 1000;  // minimal subsets drawn per call
    double seconds = 0.0;         // optional wall-clock cap, 0 = none
    double inlier_threshold = 1.0;
    std::uint64_t rng_seed = 0;
    double prosac_T_N = 0.0;  // PROSAC growth horizon, 0 = the iteration budget

    void validate() const {
        if (iterations < 1) throw InputError("sampler budget must be positive");
        if (seconds < 0.0) throw InputError("time budget must be nonnegative");
        if (!(inlier_threshold > 0.0)) throw InputError("inlier threshold must be positive");
        if (prosac_T_N < 0.0) throw InputError("PROSAC horizon must be nonnegative");
    }
};

struct SampledHypothesis {
    ModelParams params;
    int inlier_count = 0;
    std::vector<int> sample_ids;
};

struct SampleRun {
    std::vector<SampledHypothesis> hypotheses;  // one per non-degenerate draw
    long long iterations = 0;
    int degenerate = 0;
    double seconds = 0.0;

    /// Largest consensus, first drawn on ties; nullptr if none.
    const SampledHypothesis* best() const {
        const SampledHypothesis* b = nullptr;
        for (const auto& h : hypotheses)
            if (!b || h.inlier_count > b->inlier_count) b = &h;
        return b;
    }
};

/// Consensus at the threshold on datum-level algebraic residuals.
inline int consensus(const DesignMatrix& dm, const ModelParams& h, double threshold) {
    int n = 0;
    for (double r : datum_residuals(dm, h.theta)) n += r <= threshold;
    return n;
}

namespace detail {

/// PROSAC draw order: data by descending score, ties to the lower id.
inline std::vector<int> score_order(std::span<const Datum> data) {
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return data[a].score != data[b].score ? data[a].score > data[b].score : data[a].id < data[b].id;
    });
    return order;
}

inline SampleRun sample_with(std::span<const Datum> data, const ModelClass& model, const SamplerConfig& cfg,
                             std::mt19937_64& rng) {
    cfg.validate();
    const int N = static_cast<int>(data.size());
    const int m = model.min_data;
    if (N < m) throw InputError("dataset smaller than a minimal subset");
    const auto t0 = std::chrono::steady_clock::now();
    const DesignMatrix dm = make_design(model, data);
    const int rpd = model.rows_per_datum;

    SampleRun out;
    std::vector<int> order = cfg.kind == SamplerKind::prosac ? score_order(data) : std::vector<int>{};
    if (order.empty()) {
        order.resize(N);
        std::iota(order.begin(), order.end(), 0);
    }
    // PROSAC schedule: T_n expected draws from the top-n prefix
    int n = m;
    double T_n = cfg.prosac_T_N > 0.0 ? cfg.prosac_T_N : static_cast<double>(cfg.iterations);
    for (int i = 0; i < m; ++i) T_n *= static_cast<double>(m - i) / (N - i);
    double T_prime = 1.0;

    std::vector<int> pick;
    Eigen::MatrixXd A(m * rpd, model.param_count);
    for (long long t = 1; t <= cfg.iterations; ++t) {
        if (cfg.seconds > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() > cfg.seconds)
            break;
        ++out.iterations;
        pick.clear();
        if (cfg.kind == SamplerKind::ransac) {
            while (static_cast<int>(pick.size()) < m) {
                const int c = std::uniform_int_distribution<int>(0, N - 1)(rng);
                if (std::find(pick.begin(), pick.end(), c) == pick.end()) pick.push_back(c);
            }
        } else {
            if (t >= T_prime && n < N) {
                const double T_next = T_n * (n + 1) / (n + 1 - m);
                T_prime += std::ceil(T_next - T_n);
                T_n = T_next;
                ++n;
            }
            // the newest prefix member plus m - 1 from before it, or uniform once the prefix is full
            const bool full = t >= T_prime && n == N;
            const int pool = full ? n : n - 1;
            if (!full) pick.push_back(order[n - 1]);
            while (static_cast<int>(pick.size()) < m) {
                const int c = order[std::uniform_int_distribution<int>(0, pool - 1)(rng)];
                if (std::find(pick.begin(), pick.end(), c) == pick.end()) pick.push_back(c);
            }
        }
        for (int k = 0; k < m; ++k) A.middleRows(k * rpd, rpd) = dm.A.middleRows(pick[k] * rpd, rpd);
        const auto fit = fit_dlt(A, model.gauge);
        if (!fit) {
            ++out.degenerate;
            continue;
        }
        SampledHypothesis h;
        h.params = *fit;
        h.inlier_count = consensus(dm, h.params, cfg.inlier_threshold);
        for (int i : pick) h.sample_ids.push_back(data[i].id);
        out.hypotheses.push_back(std::move(h));
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace detail

/// Minimal-subset DLT hypotheses scored by consensus. PROSAC samples from
/// growing prefixes of the score order; with equal scores that order is the
/// input order.
inline SampleRun sample_hypotheses(std::span<const Datum> data, const ModelClass& model, const SamplerConfig& cfg) {
    std::mt19937_64 rng(cfg.rng_seed);
    return detail::sample_with(data, model, cfg, rng);
}

/// Fit-and-remove where each stage takes the best-consensus sampled
/// hypothesis on the reduced data. Its scale is IKOSE over the whole data
/// with K set to that consensus, falling back to K0 and then to the
/// threshold over 2.5. One RNG stream runs across stages.
inline PipelineResult sequential_baseline_fit(std::span<const Datum> data, const ModelClass& model,
                                              const PipelineConfig& cfg, const SamplerConfig& scfg) {
    scfg.validate();
    std::mt19937_64 rng(scfg.rng_seed);
    const DesignMatrix full_dm = make_design(model, data);
    const int N = static_cast<int>(data.size());
    return detail::fit_sequential(data, model, cfg, [&](std::span<const Datum> reduced) {
        const SampleRun run = detail::sample_with(reduced, model, scfg, rng);
        const SampledHypothesis* best = run.best();
        if (!best) throw AlgorithmError("every sampled minimal subset was degenerate");
        HypothesisResult h;
        h.params = best->params;
        h.optimal = false;
        const auto res = datum_residuals(full_dm, h.params.theta);
        h.K = std::clamp(best->inlier_count, 1, N - 1);
        double sigma = 0.0;
        for (int K : {h.K, std::min(cfg.hypothesis.K0, N - 1)}) {
            try {
                sigma = ikose(res, K).scale;
                h.K = K;
                break;
            } catch (const AlgorithmError&) {
            }
        }
        if (!(sigma > 0.0)) sigma = scfg.inlier_threshold / kIkoseCutoff;
        h.sigma = std::max(sigma, cfg.ise.scale_floor);
        h.subset_scale = scfg.inlier_threshold;
        const auto rr = datum_residuals(make_design(model, reduced), h.params.theta);
        for (std::size_t i = 0; i < reduced.size(); ++i)
            if (rr[i] <= scfg.inlier_threshold) h.inlier_ids.push_back(reduced[i].id);
        return h;
    });
}

}  // namespace mfit
