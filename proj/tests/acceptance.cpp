// Acceptance suite: one PASS/FAIL line per criterion.
// usage: acceptance [criterion ...]   (default: all ten)

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mfit/baselines.hpp"
#include "mfit/bench.hpp"
#include "mfit/labeling.hpp"
#include "mfit/lp.hpp"
#include "mfit/maxfs.hpp"
#include "mfit/pipeline.hpp"
#include "mfit/scale.hpp"
#include "oracles.hpp"

using namespace mfit;
using Clock = std::chrono::steady_clock;

namespace {

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

// every pipeline and baseline result produced by the other criteria
struct EnergyLog {
    int runs = 0, stage = 0, move = 0, recompute = 0;
    void add(const ModelClass& model, const std::vector<Datum>& data, const PipelineResult& r) {
        const auto a = audit_energy(model, data, r);
        ++runs;
        stage += a.stage_violations;
        move += a.move_violations;
        recompute += a.recompute_violations;
    }
};
EnergyLog g_energy;

std::string fmt(const char* f, auto... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

// --- 1 -------------------------------------------------------------------

Outcome maxfs_exactness() {
    const auto line = ModelClass::make(ModelKind::line2d);
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    std::uniform_int_distribution<int> K(3, 12);
    const auto t0 = Clock::now();
    int ok = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int k = K(rng);
        const int n_in = std::uniform_int_distribution<int>(2, k)(rng);
        const double a = U(rng) / 3.0, b = U(rng) / 2.0;
        std::normal_distribution<double> G(0.0, 0.05);
        std::vector<Datum> d;
        for (int i = 0; i < k; ++i) {
            const double x = U(rng);
            d.push_back({{x, i < n_in ? a * x + b + G(rng) : U(rng)}, 1.0, i});
        }
        const double s = trial % 2 ? 0.05 : 0.15;
        const auto dm = make_design(line, d);
        const int ref = oracle::max_feasible_subset(dm.A, 1, line.gauge, s);
        const auto r = solve_maxfs(line, build_rows(line, d), s);
        ok += r.optimal && r.inlier_count == ref;
    }
    const double secs = since(t0);
    return {ok == 200 && secs < 120.0, fmt("%d/200 match brute force, %.1fs (limit 120s)", ok, secs)};
}

// --- 2 -------------------------------------------------------------------

Outcome milp_exactness() {
    std::mt19937_64 rng(2002);
    int ok = 0, infeasible = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto d = oracle::random_milp(rng);
        MILPProblem p;
        p.lp.objective = d.c;
        for (int i = 0; i < d.G.rows(); ++i) p.lp.ineq.push_back({d.G.row(i).transpose(), d.h[i]});
        p.lp.bounds.assign(d.c.size(), VarBounds{-d.box, d.box});
        for (int j = 0; j < d.nb; ++j) {
            p.lp.bounds[j] = VarBounds{0.0, 1.0};
            p.binary_vars.push_back(j);
        }
        const auto want = oracle::milp_enumeration_min(d);
        const auto got = solve_milp(p, 1000000);
        if (!want) {
            ++infeasible;
            ok += got.status == MILPStatus::infeasible;
        } else {
            ok += got.status == MILPStatus::optimal && std::abs(got.objective_value - *want) <= 1e-7;
        }
    }
    return {ok == 200, fmt("%d/200 equal exhaustive enumeration (%d infeasible instances)", ok, infeasible)};
}

// --- 3 -------------------------------------------------------------------

Outcome quantile_kernel() {
    const int M = 10000;
    const double lo = 1e-6, hi = 1.0 - 1e-6;
    double worst = 0.0, at = 0.0;
    for (int i = 0; i < M; ++i) {
        const double p = lo + (hi - lo) * i / (M - 1);
        const double e = std::abs(std_normal_quantile(p) - oracle::normal_quantile_bisection(p));
        if (e > worst) worst = e, at = p;
    }
    return {worst <= 1e-9, fmt("max |error| %.3g at p = %.6g over %d points", worst, at, M)};
}

// --- 4 -------------------------------------------------------------------

Outcome fig4() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;
    for (double sigma : {0.1, 0.2, 0.3}) {
        int within = 0;
        std::vector<double> mis;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const auto t = bench::fig4_trial(sigma, seed);
            within += t.within_factor(2.0);
            mis.push_back(t.error.empty() ? t.misclassification : 1.0);
        }
        const double med = bench::detail::median(mis);
        pass = pass && within >= 45 && med <= 0.10;
        detail += fmt("sigma %.1f: %d/50 within 2x, median misclass %.3f; ", sigma, within, med);
    }
    const double secs = since(t0);
    pass = pass && secs < 600.0;
    return {pass, detail + fmt("%.1fs (limit 600s)", secs)};
}

// --- 5 -------------------------------------------------------------------

Outcome determinism() {
    const auto line = ModelClass::make(ModelKind::line2d);
    const auto cfg = PipelineConfig::defaults_for(ModelKind::line2d);
    std::vector<Dataset> sets;
    for (std::uint64_t s = 0; s < 3; ++s) sets.push_back(generate(bench::lines_design(100 + s, 0.5)));
    sets.push_back(generate(bench::lines_design(103, 0.3)));
    sets.push_back(generate(bench::lines_design(104, 0.7, 30)));
    int identical = 0;
    for (const auto& ds : sets) {
        const auto ref = fit_all(ds.data, line, cfg);
        g_energy.add(line, ds.data, ref);
        bool same = true;
        for (int rep = 1; rep < 10; ++rep) {
            const auto r = fit_all(ds.data, line, cfg);
            same = same && bench::identical(ref, r);
        }
        identical += same;
    }
    return {identical == 5, fmt("%d/5 datasets bit-identical over 10 runs", identical)};
}

// --- 6 -------------------------------------------------------------------

Outcome recovery() {
    const auto t0 = Clock::now();
    int full[2] = {0, 0};
    const ModelKind kinds[2] = {ModelKind::line2d, ModelKind::homography};
    for (int k = 0; k < 2; ++k) {
        const auto model = ModelClass::make(kinds[k]);
        const auto cfg = PipelineConfig::defaults_for(kinds[k]);
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const auto ds = generate(k == 0 ? bench::lines_design(seed, 0.5) : bench::homography_design(seed, 2, 0.4));
            try {
                const auto r = fit_all(ds.data, model, cfg);
                g_energy.add(model, ds.data, r);
                const auto m = evaluate(model, ds.data, r, *ds.gt);
                full[k] += m.recovered == m.true_structures;
            } catch (const std::exception&) {
            }
        }
    }
    const double secs = since(t0);
    return {full[0] >= 45 && full[1] >= 45 && secs < 1800.0,
            fmt("3 lines: %d/50, 2 homographies: %d/50 (need 45 each), %.0fs (limit 1800s)", full[0], full[1], secs)};
}

// --- 7 -------------------------------------------------------------------

Outcome comparative() {
    const auto line = ModelClass::make(ModelKind::line2d);
    const auto cfg = PipelineConfig::defaults_for(ModelKind::line2d);
    bool any = false;
    std::string detail;
    for (std::uint64_t dseed : {0, 1, 2}) {
        const auto ds = generate(bench::lines_design(dseed, 0.7, 30));
        std::vector<double> pipe, ran, pro;
        long long budget = 1;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const auto row = bench::detail::run_pipeline("d", ds, seed, cfg);
            if (seed == 0) budget = bench::maxfs_solves_per_stage(row.r);
            pipe.push_back(row.error.empty() ? row.m.recovered : -1);
            if (seed == 0 && row.error.empty()) g_energy.add(line, ds.data, row.r);
        }
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            for (auto kind : {SamplerKind::ransac, SamplerKind::prosac}) {
                const auto row = bench::detail::run_baseline("d", ds, seed, cfg, kind, budget);
                (kind == SamplerKind::ransac ? ran : pro).push_back(row.error.empty() ? row.m.recovered : 0);
                if (row.error.empty()) g_energy.add(line, ds.data, row.r);
            }
        }
        const auto p = bench::detail::stats(pipe), r = bench::detail::stats(ran), q = bench::detail::stats(pro);
        const bool constant = p.stdev == 0.0 && pipe[0] >= 0;
        const bool ok = constant && r.stdev > 0.0 && q.stdev > 0.0 && r.mean < p.mean && q.mean < p.mean;
        any = any || ok;
        detail += fmt("d%llu[budget %lld]: pipeline %.2f (std %.2f), RANSAC %.2f (std %.2f), PROSAC %.2f (std %.2f)%s; ",
                      static_cast<unsigned long long>(dseed), budget, p.mean, p.stdev, r.mean, r.stdev, q.mean, q.stdev,
                      ok ? " ok" : "");
    }
    return {any, detail + "need one dataset ok"};
}

// --- 8 -------------------------------------------------------------------

Outcome energy_contract() {
    const bool ok = g_energy.runs > 0 && g_energy.stage + g_energy.move + g_energy.recompute == 0;
    return {ok, fmt("%d runs audited; violations: stage %d, move %d, recompute %d", g_energy.runs, g_energy.stage,
                    g_energy.move, g_energy.recompute)};
}

// --- 9 -------------------------------------------------------------------

double brute_force_min(const LabelingProblem& p) {
    std::vector<int> f(p.N, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        best = std::min(best, total_energy(p, f));
        int i = 0;
        while (i < p.N && f[i] == p.L) f[i++] = 0;
        if (i == p.N) break;
        ++f[i];
    }
    return best;
}

Outcome expansion_exactness() {
    std::mt19937_64 rng(9009);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int ok = 0;
    for (int rep = 0; rep < 100; ++rep) {
        LabelingProblem p;
        p.N = 1 + static_cast<int>(rng() % 10);
        p.L = 1 + static_cast<int>(rng() % 2);
        for (int i = 0; i < p.N * p.L; ++i) p.residuals.push_back(U(rng));
        for (int l = 0; l < p.L; ++l) p.scales.push_back(0.1 + 0.6 * U(rng));
        for (int i = 0; i < p.N; ++i)
            for (int j = i + 1; j < p.N; ++j)
                if (U(rng) < 0.3) p.edges.push_back({i, j});
        p.weights = {1.0, 0.0, 2.0 * U(rng)};
        p.units = rep % 2 ? CostUnits::raw : CostUnits::scale_normalized;
        ok += std::abs(alpha_expansion(p, {}).energy - brute_force_min(p)) <= 1e-9;
    }
    return {ok == 100, fmt("%d/100 equal brute-force minimum", ok)};
}

// --- 10 ------------------------------------------------------------------

Outcome nsweep() {
    const auto model = ModelClass::make(ModelKind::homography);
    double err[2] = {0, 0}, secs[2] = {0, 0};
    int runs[2] = {0, 0};
    const int ns[2] = {30, 100};
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto ds = generate(bench::homography_design(seed, 3, 0.25, 50));
        for (int k = 0; k < 2; ++k) {
            auto cfg = PipelineConfig::defaults_for(ModelKind::homography);
            cfg.hypothesis.n = ns[k];
            const auto r = fit_all(ds.data, model, cfg);
            g_energy.add(model, ds.data, r);
            const auto m = evaluate(model, ds.data, r, *ds.gt);
            secs[k] += r.seconds;
            if (!std::isnan(m.mean_error)) err[k] += m.mean_error, ++runs[k];
        }
    }
    for (int k = 0; k < 2; ++k) err[k] = runs[k] ? err[k] / runs[k] : NAN;
    const bool ok = runs[0] > 0 && runs[1] > 0 && std::abs(err[0] - err[1]) <= 0.1 * err[1] && secs[0] < secs[1];
    return {ok, fmt("mean error n=30 %.4g vs n=100 %.4g (within 10%%: %s), time %.1fs vs %.1fs", err[0], err[1],
                    std::abs(err[0] - err[1]) <= 0.1 * err[1] ? "yes" : "no", secs[0], secs[1])};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"MaxFS exactness vs brute force", maxfs_exactness},
        {"MILP vs exhaustive enumeration", milp_exactness},
        {"normal quantile kernel", quantile_kernel},
        {"scale traces on one line (80 + 20)", fig4},
        {"determinism of fit_all", determinism},
        {"multi-structure recovery", recovery},
        {"pipeline vs RANSAC/PROSAC at 70% outliers", comparative},
        {"energy contract", energy_contract},
        {"alpha-expansion exact at beta = 0", expansion_exactness},
        {"subset size n = 30 vs n = 100", nsweep},
    };
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::stoi(argv[i]));
    int failed = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        const int id = static_cast<int>(c) + 1;
        if (!pick.empty() && !pick.count(id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[c].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[c].first, o.detail.c_str(),
                    since(t0));
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
