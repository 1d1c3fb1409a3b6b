#pragma once

// Synthetic experiment suites. Each suite returns one CSV table with a row
// per trial, a JSON summary and optional extra tables (scale traces).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfit/baselines.hpp"
#include "mfit/data.hpp"
#include "mfit/pipeline.hpp"

namespace mfit::bench {

// ---------------------------------------------------------------------------
// Dataset designs

/// One line, `inliers` points with perpendicular noise sigma plus
/// `outliers` uniform points in [-10, 10]^2.
inline GeneratorSpec line_design(double sigma, std::uint64_t seed, int inliers = 80, int outliers = 20) {
    GeneratorSpec g;
    g.model = ModelKind::line2d;
    g.structures = {{std::nullopt, inliers, sigma}};
    g.gross_outliers = outliers;
    g.seed = seed;
    return g;
}

/// Three lines with sigma 0.1 in [-10, 10]^2; outliers make up the given
/// fraction of all data.
inline GeneratorSpec lines_design(std::uint64_t seed, double outlier_fraction = 0.5, int per_structure = 50) {
    GeneratorSpec g;
    g.model = ModelKind::line2d;
    g.structures.assign(3, {std::nullopt, per_structure, 0.1});
    g.gross_outliers = static_cast<int>(std::lround(3 * per_structure * outlier_fraction / (1.0 - outlier_fraction)));
    g.seed = seed;
    return g;
}

/// Homographies with reprojection noise sigma 1 in [-100, 100]^4.
inline GeneratorSpec homography_design(std::uint64_t seed, int structures = 2, double outlier_fraction = 0.4,
                                       int per_structure = 60) {
    GeneratorSpec g;
    g.model = ModelKind::homography;
    g.box = 100.0;
    g.structures.assign(structures, {std::nullopt, per_structure, 1.0});
    g.gross_outliers =
        static_cast<int>(std::lround(structures * per_structure * outlier_fraction / (1.0 - outlier_fraction)));
    g.seed = seed;
    return g;
}

/// Baseline consensus threshold: 2.5 times the largest true algebraic scale.
inline double baseline_threshold(const GroundTruth& gt) {
    double s = 0.0;
    for (double v : gt.algebraic_sigmas) s = std::max(s, v);
    return kIkoseCutoff * s;
}

/// MaxFS solves of a pipeline run per stage; the baselines draw this many
/// minimal subsets per stage.
inline long long maxfs_solves_per_stage(const PipelineResult& r) {
    long long n = 0;
    for (const auto& st : r.stages)
        for (const auto& h : st.history)
            if (h.hypothesis) n += static_cast<long long>(h.hypothesis->trace.size());
    return std::max<long long>(1, n / std::max<std::size_t>(1, r.stages.size()));
}

/// True when two results agree bit for bit in hypotheses, scales and labels.
inline bool identical(const PipelineResult& a, const PipelineResult& b) {
    if (a.hypotheses.size() != b.hypotheses.size() || a.scales != b.scales ||
        a.algebraic_scales != b.algebraic_scales || a.labeling.labels != b.labeling.labels ||
        !(a.labeling.energy == b.labeling.energy))
        return false;
    for (std::size_t l = 0; l < a.hypotheses.size(); ++l)
        if (a.hypotheses[l].theta != b.hypotheses[l].theta) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Tables

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

    std::string csv() const {
        auto field = [](const std::string& v) {
            if (v.find_first_of(",\"\n") == std::string::npos) return v;
            std::string q = "\"";
            for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
            return q + "\"";
        };
        std::ostringstream os;
        for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << field(header[i]);
        os << "\n";
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << field(r[i]);
            os << "\n";
        }
        return os.str();
    }
};

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

struct SuiteReport {
    std::string name;
    Table trials;
    nlohmann::json summary;
    std::map<std::string, Table> extra;  // relative path -> table
};

/// Writes <dir>/<name>.csv, <dir>/<name>_summary.json and the extra tables.
/// Each file goes to a temporary name first and is then renamed.
inline void write_report(const SuiteReport& r, const std::string& dir) {
    namespace fs = std::filesystem;
    auto put = [&](const fs::path& p, const std::string& text) {
        fs::create_directories(p.parent_path());
        const fs::path tmp = p.string() + ".tmp";
        {
            std::ofstream f(tmp, std::ios::binary);
            if (!f) throw InputError("cannot write " + tmp.string());
            f << text;
        }
        fs::rename(tmp, p);
    };
    const fs::path base(dir);
    put(base / (r.name + ".csv"), r.trials.csv());
    put(base / (r.name + "_summary.json"), r.summary.dump(2) + "\n");
    for (const auto& [rel, t] : r.extra) put(base / rel, t.csv());
}

namespace detail {

struct Stats {
    double mean = 0.0, stdev = 0.0;
};

/// Mean and population standard deviation.
inline Stats stats(const std::vector<double>& v) {
    Stats s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= v.size();
    double q = 0.0;
    for (double x : v) q += (x - s.mean) * (x - s.mean);
    s.stdev = std::sqrt(q / v.size());
    return s;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline const std::vector<std::string> kFitHeader{"dataset", "seed",       "method", "recovered",  "structures",
                                                 "L",       "misclass",   "mean_error", "seconds", "energy_ok",
                                                 "budget",  "stop_reason", "error"};

struct FitRow {
    std::string dataset, method;
    std::uint64_t seed = 0;
    Metrics m;
    PipelineResult r;
    bool energy_ok = true;
    long long budget = 0;
    std::string error;

    std::vector<std::string> cells() const {
        if (!error.empty()) return {dataset, std::to_string(seed), method, "", "", "", "", "", "", "", "", "", error};
        return {dataset,
                std::to_string(seed),
                method,
                std::to_string(m.recovered),
                std::to_string(m.true_structures),
                std::to_string(r.hypotheses.size()),
                num(m.misclassification),
                num(m.mean_error),
                num(r.seconds),
                energy_ok ? "1" : "0",
                std::to_string(budget),
                r.stop_reason,
                ""};
    }
};

inline FitRow run_pipeline(const std::string& name, const Dataset& ds, std::uint64_t seed,
                           const PipelineConfig& cfg) {
    FitRow row;
    row.dataset = name;
    row.method = "imaxfs_ise_su";
    row.seed = seed;
    try {
        const auto model = ModelClass::make(ds.model);
        row.r = fit_all(ds.data, model, cfg);
        row.m = evaluate(model, ds.data, row.r, *ds.gt);
        row.energy_ok = audit_energy(model, ds.data, row.r).ok();
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

inline FitRow run_baseline(const std::string& name, const Dataset& ds, std::uint64_t seed, const PipelineConfig& cfg,
                           SamplerKind kind, long long budget) {
    FitRow row;
    row.dataset = name;
    row.method = kind == SamplerKind::ransac ? "ransac" : "prosac";
    row.seed = seed;
    row.budget = budget;
    try {
        const auto model = ModelClass::make(ds.model);
        SamplerConfig sc;
        sc.kind = kind;
        sc.iterations = budget;
        sc.inlier_threshold = baseline_threshold(*ds.gt);
        sc.rng_seed = seed;
        row.r = sequential_baseline_fit(ds.data, model, cfg, sc);
        row.m = evaluate(model, ds.data, row.r, *ds.gt);
        row.energy_ok = audit_energy(model, ds.data, row.r).ok();
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

/// Recovery statistics of a group of rows.
inline nlohmann::json recovery_summary(const std::vector<const FitRow*>& rows) {
    std::vector<double> rec, err, secs, mis;
    std::map<int, int> hist;
    int full = 0, failed = 0, energy_bad = 0;
    for (const auto* r : rows) {
        if (!r->error.empty()) {
            ++failed;
            continue;
        }
        rec.push_back(r->m.recovered);
        if (!std::isnan(r->m.mean_error)) err.push_back(r->m.mean_error);
        secs.push_back(r->r.seconds);
        mis.push_back(r->m.misclassification);
        ++hist[r->m.recovered];
        full += r->m.recovered == r->m.true_structures;
        energy_bad += !r->energy_ok;
    }
    nlohmann::json h = nlohmann::json::object();
    for (const auto& [k, v] : hist) h[std::to_string(k)] = v;
    const auto rs = stats(rec);
    return {{"runs", rows.size()},
            {"failed", failed},
            {"full_recovery", full},
            {"recovered_mean", rs.mean},
            {"recovered_std", rs.stdev},
            {"recovered_histogram", h},
            {"misclass_mean", stats(mis).mean},
            {"mean_error_mean", stats(err).mean},
            {"seconds_mean", stats(secs).mean},
            {"energy_violations", energy_bad}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Suites

struct Fig4Trial {
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double s_star = 0.0;
    double sigma_alg = 0.0;
    double misclassification = 0.0;
    int iterations = 0;
    bool converged = false;
    double seconds = 0.0;
    std::vector<IseTraceEntry> trace;
    std::string error;

    bool within_factor(double f) const { return error.empty() && s_star >= sigma_alg / f && s_star <= sigma_alg * f; }
};

/// ISE settings of the single-line design: s0 = 0.01 and K = 30. At K = 10
/// IKOSE over 100 residuals often locks onto a tight cluster.
inline IseConfig fig4_ise() {
    IseConfig c;
    c.s0 = 0.01;
    c.K = 30;
    return c;
}

/// IMaxFS-ISE on one line with 80 inliers and 20 gross outliers. Data are
/// classified as inliers when their algebraic residual is within 2.5 s*.
inline Fig4Trial fig4_trial(double sigma, std::uint64_t seed, const IseConfig& ise = fig4_ise(),
                            const MaxFSConfig& mf = {}) {
    Fig4Trial t;
    t.sigma = sigma;
    t.seed = seed;
    const auto ds = generate(line_design(sigma, seed));
    t.sigma_alg = ds.gt->algebraic_sigmas[0];
    const auto model = ModelClass::make(ModelKind::line2d);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const auto r = imaxfs_ise(model, build_rows(model, ds.data), ise, mf);
        t.s_star = r.scale;
        t.iterations = static_cast<int>(r.trace.size());
        t.converged = r.converged;
        t.trace = r.trace;
        const auto res = datum_residuals(make_design(model, ds.data), r.params.theta);
        int wrong = 0;
        for (std::size_t i = 0; i < res.size(); ++i)
            wrong += (res[i] <= kIkoseCutoff * r.scale) != (ds.gt->labels[i] > 0);
        t.misclassification = static_cast<double>(wrong) / res.size();
    } catch (const std::exception& e) {
        t.error = e.what();
    }
    t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return t;
}

inline SuiteReport fig4_suite(int trials, std::uint64_t seed0 = 0, std::vector<double> sigmas = {0.1, 0.2, 0.3}) {
    SuiteReport rep;
    rep.name = "fig4";
    rep.trials.header = {"sigma", "seed", "s_star", "sigma_alg", "ratio", "within_2x", "misclass", "iterations",
                         "converged", "seconds", "error"};
    for (double sigma : sigmas) {
        int ok = 0;
        std::vector<double> mis;
        for (int k = 0; k < trials; ++k) {
            const auto t = fig4_trial(sigma, seed0 + k);
            rep.trials.add({num(sigma), std::to_string(t.seed), num(t.s_star), num(t.sigma_alg),
                            num(t.s_star / t.sigma_alg), t.within_factor(2.0) ? "1" : "0", num(t.misclassification),
                            std::to_string(t.iterations), t.converged ? "1" : "0", num(t.seconds), t.error});
            ok += t.within_factor(2.0);
            if (t.error.empty()) mis.push_back(t.misclassification);
            Table tr;
            tr.header = {"t", "s", "inliers"};
            for (const auto& e : t.trace) tr.add({std::to_string(e.t), num(e.s), std::to_string(e.inliers)});
            rep.extra["fig4_traces/sigma" + num(sigma) + "_seed" + std::to_string(t.seed) + ".csv"] = std::move(tr);
        }
        rep.summary["sigma_" + num(sigma)] = {{"trials", trials},
                                              {"within_2x", ok},
                                              {"within_2x_fraction", trials ? double(ok) / trials : 0.0},
                                              {"misclass_median", detail::median(mis)}};
    }
    return rep;
}

/// fit_all over seeded 3-line (50% outliers) and 2-homography (40%
/// outliers) datasets.
inline SuiteReport recovery_suite(int trials, std::uint64_t seed0 = 0, bool lines = true, bool homographies = true) {
    SuiteReport rep;
    rep.name = "recovery";
    rep.trials.header = detail::kFitHeader;
    std::vector<detail::FitRow> rows;
    auto run = [&](const std::string& name, ModelKind kind, auto design) {
        std::vector<const detail::FitRow*> group;
        const std::size_t first = rows.size();
        for (int k = 0; k < trials; ++k) {
            const auto ds = generate(design(seed0 + k));
            rows.push_back(detail::run_pipeline(name, ds, seed0 + k, PipelineConfig::defaults_for(kind)));
            rep.trials.add(rows.back().cells());
        }
        for (std::size_t i = first; i < rows.size(); ++i) group.push_back(&rows[i]);
        rep.summary[name] = detail::recovery_summary(group);
    };
    rows.reserve(2 * trials);
    if (lines) run("lines3_out50", ModelKind::line2d, [](std::uint64_t s) { return lines_design(s, 0.5); });
    if (homographies)
        run("homography2_out40", ModelKind::homography, [](std::uint64_t s) { return homography_design(s, 2, 0.4); });
    return rep;
}

/// 3-line datasets at 70% gross outliers. The pipeline and the two samplers
/// run once per seed; the samplers draw per stage as many minimal subsets
/// as the pipeline solved MaxFS problems per stage on the same dataset.
inline SuiteReport compare_suite(int trials, std::uint64_t seed0 = 0, std::vector<std::uint64_t> dataset_seeds = {0, 1, 2}) {
    SuiteReport rep;
    rep.name = "compare";
    rep.trials.header = detail::kFitHeader;
    const auto cfg = PipelineConfig::defaults_for(ModelKind::line2d);
    for (auto dseed : dataset_seeds) {
        const std::string name = "lines3_out70_d" + std::to_string(dseed);
        const auto ds = generate(lines_design(dseed, 0.7, 30));
        std::vector<detail::FitRow> rows;
        rows.reserve(3 * trials);
        long long budget = 1;
        for (int k = 0; k < trials; ++k) {
            rows.push_back(detail::run_pipeline(name, ds, seed0 + k, cfg));
            if (k == 0 && rows.back().error.empty()) budget = maxfs_solves_per_stage(rows.back().r);
        }
        for (auto kind : {SamplerKind::ransac, SamplerKind::prosac})
            for (int k = 0; k < trials; ++k) rows.push_back(detail::run_baseline(name, ds, seed0 + k, cfg, kind, budget));
        nlohmann::json js;
        for (const std::string method : {"imaxfs_ise_su", "ransac", "prosac"}) {
            std::vector<const detail::FitRow*> g;
            for (const auto& r : rows)
                if (r.method == method) g.push_back(&r);
            js[method] = detail::recovery_summary(g);
        }
        js["budget_per_stage"] = budget;
        rep.summary[name] = js;
        for (const auto& r : rows) rep.trials.add(r.cells());
    }
    return rep;
}

/// Subset size sweep on 3-structure homography data (25% outliers).
inline SuiteReport nsweep_suite(int trials, std::uint64_t seed0 = 0,
                                std::vector<int> ns = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100}) {
    SuiteReport rep;
    rep.name = "nsweep";
    rep.trials.header = detail::kFitHeader;
    rep.trials.header.insert(rep.trials.header.begin(), "n");
    std::vector<Dataset> sets;
    for (int k = 0; k < trials; ++k) sets.push_back(generate(homography_design(seed0 + k, 3, 0.25, 50)));
    for (int n : ns) {
        auto cfg = PipelineConfig::defaults_for(ModelKind::homography);
        cfg.hypothesis.n = n;
        std::vector<detail::FitRow> rows;
        for (int k = 0; k < trials; ++k) {
            rows.push_back(detail::run_pipeline("homography3_out25", sets[k], seed0 + k, cfg));
            auto c = rows.back().cells();
            c.insert(c.begin(), std::to_string(n));
            rep.trials.add(c);
        }
        std::vector<const detail::FitRow*> g;
        for (const auto& r : rows) g.push_back(&r);
        rep.summary["n_" + std::to_string(n)] = detail::recovery_summary(g);
    }
    return rep;
}

/// Initial scale sweep on 3-line data (50% outliers).
inline SuiteReport s0sweep_suite(int trials, std::uint64_t seed0 = 0,
                                 std::vector<double> s0s = {1e-4, 1e-3, 1e-2, 1e-1, 0.5}) {
    SuiteReport rep;
    rep.name = "s0sweep";
    rep.trials.header = detail::kFitHeader;
    rep.trials.header.insert(rep.trials.header.begin(), "s0");
    for (double s0 : s0s) {
        auto cfg = PipelineConfig::defaults_for(ModelKind::line2d);
        cfg.ise.s0 = s0;
        std::vector<detail::FitRow> rows;
        for (int k = 0; k < trials; ++k) {
            rows.push_back(detail::run_pipeline("lines3_out50", generate(lines_design(seed0 + k, 0.5)), seed0 + k, cfg));
            auto c = rows.back().cells();
            c.insert(c.begin(), num(s0));
            rep.trials.add(c);
        }
        std::vector<const detail::FitRow*> g;
        for (const auto& r : rows) g.push_back(&r);
        rep.summary["s0_" + num(s0)] = detail::recovery_summary(g);
    }
    return rep;
}

/// Error against the gross-outlier rate on 3-line data, for the pipeline
/// and both samplers at matched per-stage budgets.
inline SuiteReport outliers_suite(int trials, std::uint64_t seed0 = 0,
                                  std::vector<double> rates = {0.3, 0.4, 0.5, 0.6, 0.7}) {
    SuiteReport rep;
    rep.name = "outliers";
    rep.trials.header = detail::kFitHeader;
    rep.trials.header.insert(rep.trials.header.begin(), "outlier_rate");
    const auto cfg = PipelineConfig::defaults_for(ModelKind::line2d);
    for (double rate : rates) {
        std::vector<detail::FitRow> rows;
        rows.reserve(3 * trials);
        for (int k = 0; k < trials; ++k) {
            const auto ds = generate(lines_design(seed0 + k, rate, 30));
            rows.push_back(detail::run_pipeline("lines3", ds, seed0 + k, cfg));
            const long long budget = rows.back().error.empty() ? maxfs_solves_per_stage(rows.back().r) : 100;
            rows.push_back(detail::run_baseline("lines3", ds, seed0 + k, cfg, SamplerKind::ransac, budget));
            rows.push_back(detail::run_baseline("lines3", ds, seed0 + k, cfg, SamplerKind::prosac, budget));
        }
        nlohmann::json js;
        for (const std::string method : {"imaxfs_ise_su", "ransac", "prosac"}) {
            std::vector<const detail::FitRow*> g;
            for (const auto& r : rows)
                if (r.method == method) g.push_back(&r);
            js[method] = detail::recovery_summary(g);
        }
        rep.summary["rate_" + num(rate)] = js;
        for (const auto& r : rows) {
            auto c = r.cells();
            c.insert(c.begin(), num(rate));
            rep.trials.add(c);
        }
    }
    return rep;
}

/// Label cost sweep on 3-line data (50% outliers).
inline SuiteReport gamma_suite(int trials, std::uint64_t seed0 = 0, std::vector<double> gammas = {1, 2, 5, 10, 20}) {
    SuiteReport rep;
    rep.name = "gamma";
    rep.trials.header = detail::kFitHeader;
    rep.trials.header.insert(rep.trials.header.begin(), "gamma");
    for (double g : gammas) {
        auto cfg = PipelineConfig::defaults_for(ModelKind::line2d);
        cfg.weights.gamma = g;
        std::vector<detail::FitRow> rows;
        for (int k = 0; k < trials; ++k) {
            rows.push_back(detail::run_pipeline("lines3_out50", generate(lines_design(seed0 + k, 0.5)), seed0 + k, cfg));
            auto c = rows.back().cells();
            c.insert(c.begin(), num(g));
            rep.trials.add(c);
        }
        std::vector<const detail::FitRow*> gr;
        for (const auto& r : rows) gr.push_back(&r);
        rep.summary["gamma_" + num(g)] = detail::recovery_summary(gr);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Result files

inline nlohmann::json params_json(const ModelParams& p) {
    return std::vector<double>(p.theta.data(), p.theta.data() + p.theta.size());
}

/// Fit result document: structures, labels per datum id and the stage log.
inline nlohmann::json result_to_json(std::span<const Datum> data, const PipelineResult& r) {
    nlohmann::json j;
    j["format_version"] = kDatasetFormatVersion;
    j["structures"] = nlohmann::json::array();
    for (std::size_t l = 0; l < r.hypotheses.size(); ++l)
        j["structures"].push_back({{"label", l + 1},
                                   {"params", params_json(r.hypotheses[l])},
                                   {"sigma", r.scales[l]},
                                   {"algebraic_sigma", l < r.algebraic_scales.size() ? r.algebraic_scales[l] : 0.0}});
    std::vector<int> ids;
    for (const auto& d : data) ids.push_back(d.id);
    j["ids"] = ids;
    j["labels"] = r.labeling.labels;
    j["energy"] = r.labeling.energy;
    j["weights"] = {{"alpha", r.weights.alpha}, {"beta", r.weights.beta}, {"gamma", r.weights.gamma}};
    j["stages"] = nlohmann::json::array();
    for (const auto& st : r.stages)
        j["stages"].push_back({{"accepted", st.accepted},
                               {"sigma", st.sigma},
                               {"energy", st.energy},
                               {"previous_energy", st.previous_energy},
                               {"optimal", st.optimal},
                               {"subset_updates", st.history.size()},
                               {"removed", st.removed_ids.size()}});
    j["stop_reason"] = r.stop_reason;
    j["seconds"] = r.seconds;
    return j;
}

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"fig4", "recovery", "compare", "nsweep", "s0sweep", "outliers", "gamma"};
    return names;
}

inline SuiteReport run_suite(const std::string& name, int trials, std::uint64_t seed0 = 0) {
    if (trials < 1) throw InputError("trials must be positive");
    if (name == "fig4") return fig4_suite(trials, seed0);
    if (name == "recovery") return recovery_suite(trials, seed0);
    if (name == "compare") return compare_suite(trials, seed0);
    if (name == "nsweep") return nsweep_suite(trials, seed0);
    if (name == "s0sweep") return s0sweep_suite(trials, seed0);
    if (name == "outliers") return outliers_suite(trials, seed0);
    if (name == "gamma") return gamma_suite(trials, seed0);
    throw InputError("unknown suite: " + name);
}

}  // namespace mfit::bench
