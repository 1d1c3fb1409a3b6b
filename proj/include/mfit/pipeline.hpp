#pragma once

// Sequential fitting-and-removing with energy-based termination.

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "mfit/data.hpp"
#include "mfit/hypothesis.hpp"
#include "mfit/labeling.hpp"

namespace mfit {

enum class ResidualKind { algebraic, geometric };

struct PipelineConfig {
    HypothesisConfig hypothesis;  // n, K0
    MaxFSConfig maxfs;
    IseConfig ise;
    EnergyWeights weights{1.0, 0.01, 5.0};
    CostUnits cost_units = CostUnits::scale_normalized;
    /// Residuals and scales used by the labeling energy. Hypothesis
    /// generation always works on algebraic residuals.
    ResidualKind labeling_residual = ResidualKind::geometric;
    /// The labeling energy sees bound_factor * sigma_l as the scale of
    /// structure l.
    double bound_factor = kIkoseCutoff;
    /// A new structure whose sigma exceeds this multiple of sigma_1 ends
    /// the loop; 0 disables the check.
    double max_scale_ratio = 5.0;
    int max_structures = 20;

    static PipelineConfig defaults_for(ModelKind kind) {
        PipelineConfig c;
        c.ise.s0 = kind == ModelKind::homography ? 0.5 : 0.01;
        // subsets that are too big for vertex enumeration get a small B&B
        // budget behind a minimal-subset start
        c.maxfs.node_limit = 10;
        c.maxfs.mip_start_samples = 2000;
        return c;
    }
};

struct StageRecord {
    ModelParams params;
    double sigma = 0.0;
    double energy = 0.0;           // E(f_l) after expansion with l hypotheses
    double previous_energy = 0.0;  // E(f_{l-1})
    bool accepted = false;
    bool optimal = true;            // all MaxFS solves proven optimal
    std::vector<SubsetState> history;
    ExpansionStats expansion;
    std::vector<int> removed_ids;
};

struct PipelineResult {
    std::vector<ModelParams> hypotheses;
    std::vector<double> scales;  // sigma_l in labeling residual units
    Labeling labeling;
    EnergyWeights weights;
    CostUnits cost_units = CostUnits::raw;
    double bound_factor = 1.0;
    ResidualKind residual_kind = ResidualKind::algebraic;
    std::vector<double> algebraic_scales;  // hypothesis-generation sigma per structure
    std::vector<Edge> graph;
    std::vector<StageRecord> stages;  // including the rejected one, if any
    std::string stop_reason;
    double seconds = 0.0;
};

namespace detail {

inline std::vector<Point2> first_image_points(std::span<const Datum> data) {
    std::vector<Point2> pts;
    pts.reserve(data.size());
    for (const auto& d : data) pts.push_back({d.coords[0], d.coords[1]});
    return pts;
}

/// Per-datum residuals of one hypothesis; geometric residuals of a
/// degenerate model are infinite.
inline std::vector<double> labeling_residuals(const ModelClass& model, std::span<const Datum> data,
                                              const DesignMatrix& dm, const ModelParams& h, ResidualKind kind) {
    if (kind == ResidualKind::algebraic) return datum_residuals(dm, h.theta);
    std::vector<double> r(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        try {
            r[i] = geometric_residual(model, h, data[i]);
        } catch (const DegenerateModelError&) {
            r[i] = std::numeric_limits<double>::infinity();
        }
    }
    return r;
}

inline LabelingProblem labeling_problem(const ModelClass& model, std::span<const Datum> data,
                                        const DesignMatrix& dm, const std::vector<ModelParams>& hyps,
                                        const std::vector<double>& scales, const std::vector<Edge>& edges,
                                        const EnergyWeights& w, ResidualKind kind, CostUnits units,
                                        double bound_factor) {
    LabelingProblem p;
    p.N = dm.datum_count();
    p.L = static_cast<int>(hyps.size());
    p.residuals.assign(static_cast<std::size_t>(p.N) * p.L, 0.0);
    for (int l = 0; l < p.L; ++l) {
        const auto r = labeling_residuals(model, data, dm, hyps[l], kind);
        for (int i = 0; i < p.N; ++i) p.residuals[static_cast<std::size_t>(i) * p.L + l] = r[i];
    }
    p.scales = scales;
    for (double& v : p.scales) v *= bound_factor;
    p.edges = edges;
    p.weights = w;
    p.units = units;
    return p;
}

}  // namespace detail

/// Full labeling problem for a result, for energy recomputation.
inline LabelingProblem labeling_problem(const ModelClass& model, std::span<const Datum> data,
                                        const PipelineResult& r) {
    return detail::labeling_problem(model, data, make_design(model, data), r.hypotheses, r.scales, r.graph, r.weights,
                                    r.residual_kind, r.cost_units, r.bound_factor);
}

namespace detail {

using HypothesisSource = std::function<HypothesisResult(std::span<const Datum> reduced)>;

/// Fitting-and-removing around an arbitrary hypothesis source.
inline PipelineResult fit_sequential(std::span<const Datum> data, const ModelClass& model, const PipelineConfig& cfg,
                                     const HypothesisSource& source) {
    const auto t0 = std::chrono::steady_clock::now();
    if (data.empty()) throw InputError("empty dataset");
    if (static_cast<int>(data.size()) < model.min_data) throw InputError("dataset smaller than a minimal subset");
    if (cfg.hypothesis.n < model.min_data) throw InputError("subset size below the minimal subset size");

    PipelineResult out;
    const DesignMatrix dm = make_design(model, data);
    out.graph = delaunay_edges(detail::first_image_points(data));
    const int N = static_cast<int>(data.size());
    out.labeling.labels.assign(N, 0);

    const EnergyWeights w = cfg.weights;
    out.weights = w;
    out.cost_units = cfg.cost_units;
    out.bound_factor = cfg.bound_factor;
    if (!(cfg.bound_factor > 0.0)) throw InputError("bound_factor must be positive");
    if (cfg.max_scale_ratio < 0.0) throw InputError("max_scale_ratio must be nonnegative");
    out.residual_kind = cfg.labeling_residual;
    std::vector<Datum> reduced(data.begin(), data.end());
    std::vector<int> pos_of_id;  // id -> position
    {
        int max_id = 0;
        for (const auto& d : data) max_id = std::max(max_id, d.id);
        pos_of_id.assign(max_id + 1, -1);
        for (int i = 0; i < N; ++i) pos_of_id[data[i].id] = i;
    }

    double prev_energy = 0.0;
    while (true) {
        if (static_cast<int>(out.hypotheses.size()) >= cfg.max_structures) {
            out.stop_reason = "max_structures";
            break;
        }
        if (static_cast<int>(reduced.size()) < model.min_data) {
            out.stop_reason = "reduced data exhausted";
            break;
        }
        HypothesisResult hyp;
        try {
            hyp = source(reduced);
        } catch (const AlgorithmError& e) {
            out.stop_reason = std::string("hypothesis generation failed: ") + e.what();
            break;
        }
        StageRecord st;
        st.params = hyp.params;
        st.optimal = hyp.optimal;
        st.history = hyp.history;

        double sigma = hyp.sigma;
        if (cfg.labeling_residual == ResidualKind::geometric) {
            const auto r = detail::labeling_residuals(model, data, dm, hyp.params, ResidualKind::geometric);
            // K from the whole-data inlier count; small K makes IKOSE noisy
            int k_geo = 0;
            for (double v : datum_residuals(dm, hyp.params.theta)) k_geo += v < kIkoseCutoff * hyp.sigma;
            k_geo = std::max(k_geo, hyp.K);
            std::vector<int> ks{std::min(k_geo, N), std::min(hyp.K, N), std::min(cfg.hypothesis.K0, N)};
            for (int k = ks.back() / 2; k >= 1; k /= 2) ks.push_back(k);
            sigma = 0.0;
            for (int k : ks) {
                try {
                    sigma = ikose(r, k).scale;
                    break;
                } catch (const ZeroScaleError&) {
                    sigma = cfg.ise.scale_floor;  // exact fit
                    break;
                } catch (const AlgorithmError&) {
                }
            }
            if (!(sigma > 0.0)) {
                out.stages.push_back(std::move(st));
                out.stop_reason = "geometric scale estimation broke down";
                break;
            }
            sigma = std::max(sigma, cfg.ise.scale_floor);
        }
        st.sigma = sigma;
        auto hyps = out.hypotheses;
        auto scales = out.scales;
        hyps.push_back(hyp.params);
        scales.push_back(sigma);
        if (!out.scales.empty() && cfg.max_scale_ratio > 0.0 && sigma > cfg.max_scale_ratio * out.scales.front()) {
            out.stages.push_back(std::move(st));
            out.stop_reason = "scale exceeds max_scale_ratio * sigma_1";
            break;
        }
        const auto prob = detail::labeling_problem(model, data, dm, hyps, scales, out.graph, w, cfg.labeling_residual,
                                                   cfg.cost_units, cfg.bound_factor);
        // E(f_0): everything labeled outlier, scored with theta_1
        if (out.hypotheses.empty()) prev_energy = total_energy(prob, out.labeling.labels);
        const Labeling lab = alpha_expansion(prob, out.labeling.labels, &st.expansion);
        st.energy = lab.energy;
        st.previous_energy = prev_energy;
        const int l = static_cast<int>(hyps.size());
        const bool used = std::find(lab.labels.begin(), lab.labels.end(), l) != lab.labels.end();
        if (!(lab.energy < prev_energy) || !used) {
            st.accepted = false;
            out.stages.push_back(std::move(st));
            out.stop_reason = used ? "energy did not decrease" : "new structure labels no data";
            break;
        }
        st.accepted = true;
        out.hypotheses = std::move(hyps);
        out.scales = std::move(scales);
        out.algebraic_scales.push_back(hyp.sigma);
        out.labeling = lab;
        prev_energy = lab.energy;

        std::vector<Datum> keep;
        for (const auto& d : reduced) {
            if (lab.labels[pos_of_id[d.id]] > 0) st.removed_ids.push_back(d.id);
            else keep.push_back(d);
        }
        reduced = std::move(keep);
        out.stages.push_back(std::move(st));
    }
    if (out.hypotheses.empty()) out.labeling.energy = 0.0;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace detail

inline PipelineResult fit_all(std::span<const Datum> data, const ModelClass& model, const PipelineConfig& cfg) {
    return detail::fit_sequential(data, model, cfg, [&](std::span<const Datum> reduced) {
        return generate_hypothesis(model, reduced, data, cfg.hypothesis, cfg.ise, cfg.maxfs);
    });
}

// ---------------------------------------------------------------------------
// Evaluation against ground truth

/// Minimum-cost assignment on a rows x cols cost matrix, padded to square
/// with zeros. Returns the column per row, -1 if unassigned.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    const int R = static_cast<int>(cost.size());
    if (R == 0) return {};
    const int C = static_cast<int>(cost[0].size());
    const int n = std::max(R, C);
    std::vector<std::vector<double>> a(n + 1, std::vector<double>(n + 1, 0.0));
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) a[i + 1][j + 1] = cost[i][j];
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, INF);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = INF;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a[i0][j] - u[i0] - v[j];
                if (cur < minv[j]) minv[j] = cur, way[j] = j0;
                if (minv[j] < delta) delta = minv[j], j1 = j;
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) u[p[j]] += delta, v[j] -= delta;
                else minv[j] -= delta;
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> ans(R, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] >= 1 && p[j] <= R && j <= C) ans[p[j] - 1] = j - 1;
    return ans;
}

struct EvalConfig {
    double recall_threshold = 0.8;
    double precision_threshold = 0.5;
};

struct Metrics {
    double misclassification = 0.0;
    int recovered = 0;
    int true_structures = 0;
    int found_structures = 0;
    std::vector<int> match;                // GT structure -> hypothesis index (-1 none)
    std::vector<double> structure_error;   // RMS geometric residual of GT inliers, NaN if unmatched
    double mean_error = std::numeric_limits<double>::quiet_NaN();
};

/// Structures are matched one-to-one to labels by overlap (Hungarian).
/// Misclassification counts data outside the matched label (outliers must
/// stay outliers). A GT structure is recovered when its matched label holds
/// at least recall_threshold of its inliers and at least
/// precision_threshold of that label's data are those inliers.
inline Metrics evaluate(const ModelClass& model, std::span<const Datum> data, const PipelineResult& r,
                        const GroundTruth& gt, const EvalConfig& ec = {}) {
    Metrics m;
    const int N = static_cast<int>(data.size());
    if (static_cast<int>(gt.labels.size()) != N) throw InputError("ground truth length differs from data");
    if (!r.labeling.labels.empty() && static_cast<int>(r.labeling.labels.size()) != N)
        throw InputError("labeling length differs from data");
    const int K = gt.params.empty() ? *std::max_element(gt.labels.begin(), gt.labels.end()) : static_cast<int>(gt.params.size());
    const int L = static_cast<int>(r.hypotheses.size());
    m.true_structures = K;
    m.found_structures = L;

    auto label = [&](int i) { return r.labeling.labels.empty() ? 0 : r.labeling.labels[i]; };
    std::vector<std::vector<int>> overlap(K + 1, std::vector<int>(L + 1, 0));
    for (int i = 0; i < N; ++i) ++overlap[gt.labels[i]][label(i)];
    std::vector<int> gt_count(K + 1, 0), label_count(L + 1, 0);
    for (int k = 0; k <= K; ++k)
        for (int l = 0; l <= L; ++l) gt_count[k] += overlap[k][l], label_count[l] += overlap[k][l];

    m.match.assign(K, -1);
    m.structure_error.assign(K, std::numeric_limits<double>::quiet_NaN());
    int correct = overlap[0][0];
    if (K > 0 && L > 0) {
        std::vector<std::vector<double>> cost(K, std::vector<double>(L, 0.0));
        for (int k = 1; k <= K; ++k)
            for (int l = 1; l <= L; ++l) cost[k - 1][l - 1] = -overlap[k][l];
        const auto asg = hungarian(cost);
        for (int k = 1; k <= K; ++k) {
            const int l = asg[k - 1] + 1;
            if (l < 1 || overlap[k][l] == 0) continue;
            m.match[k - 1] = l - 1;
            correct += overlap[k][l];
            const double recall = double(overlap[k][l]) / gt_count[k];
            const double precision = double(overlap[k][l]) / label_count[l];
            if (recall >= ec.recall_threshold && precision >= ec.precision_threshold) ++m.recovered;
        }
    }
    m.misclassification = N ? 1.0 - static_cast<double>(correct) / N : 0.0;

    double sum = 0.0;
    int cnt = 0;
    for (int k = 0; k < K; ++k) {
        if (m.match[k] < 0) continue;
        double sq = 0.0;
        int n = 0;
        for (int i = 0; i < N; ++i) {
            if (gt.labels[i] != k + 1) continue;
            double e;
            try {
                e = geometric_residual(model, r.hypotheses[m.match[k]], data[i]);
            } catch (const DegenerateModelError&) {
                e = std::numeric_limits<double>::infinity();
            }
            sq += e * e;
            ++n;
        }
        m.structure_error[k] = n ? std::sqrt(sq / n) : 0.0;
        sum += m.structure_error[k];
        ++cnt;
    }
    if (cnt) m.mean_error = sum / cnt;
    return m;
}

struct EnergyAudit {
    int stage_violations = 0;      // accepted stage without a strict decrease
    int move_violations = 0;       // expansion move that raised the energy
    int recompute_violations = 0;  // stored final energy differs from a recomputation
    bool ok() const { return stage_violations + move_violations + recompute_violations == 0; }
};

/// Checks the stored energies of a result against each other and against a
/// from-scratch recomputation of the final labeling.
inline EnergyAudit audit_energy(const ModelClass& model, std::span<const Datum> data, const PipelineResult& r,
                                double tol = 1e-9) {
    EnergyAudit a;
    std::optional<double> last;
    for (const auto& st : r.stages) {
        double prev = st.expansion.initial_energy;
        for (double e : st.expansion.move_energies) {
            if (e > prev) ++a.move_violations;
            prev = e;
        }
        if (!st.accepted) continue;
        if (!(st.energy < st.previous_energy) || (last && !(st.energy < *last))) ++a.stage_violations;
        last = st.energy;
    }
    if (!r.hypotheses.empty()) {
        const double E = total_energy(labeling_problem(model, data, r), r.labeling.labels);
        if (!(std::abs(E - r.labeling.energy) <= tol)) ++a.recompute_violations;
    }
    return a;
}

}  // namespace mfit
