// mfit command-line tool: generate, fit, baseline, bench, trace.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mfit/baselines.hpp"
#include "mfit/bench.hpp"
#include "mfit/data.hpp"
#include "mfit/imaxfs_ise.hpp"
#include "mfit/pipeline.hpp"

using namespace mfit;

namespace {

struct FitFlags {
    std::string in;
    std::string model;  // empty: from the dataset
    int n = 30;
    std::optional<double> s0;
    double big_m = 10000.0;
    int k0 = 10;
    std::optional<double> alpha, beta, gamma;
    std::string out;
};

void add_fit_flags(CLI::App* c, FitFlags& f) {
    c->add_option("--in", f.in, "dataset JSON")->required();
    c->add_option("--model", f.model, "line2d | affine_fundamental | homography (default: from dataset)");
    c->add_option("--n", f.n, "subset size")->capture_default_str();
    c->add_option("--s0", f.s0, "initial scale (default 0.5 homography, 0.01 otherwise)");
    c->add_option("--big-m", f.big_m, "big-M constant")->capture_default_str();
    c->add_option("--k0", f.k0, "initial IKOSE K")->capture_default_str();
    c->add_option("--alpha", f.alpha, "data cost weight");
    c->add_option("--beta", f.beta, "smoothness weight");
    c->add_option("--gamma", f.gamma, "label cost weight");
    c->add_option("--out", f.out, "result JSON (default: stdout)");
}

PipelineConfig make_config(ModelKind kind, const FitFlags& f) {
    auto cfg = PipelineConfig::defaults_for(kind);
    cfg.hypothesis.n = f.n;
    cfg.hypothesis.K0 = f.k0;
    cfg.ise.K = f.k0;
    if (f.s0) cfg.ise.s0 = *f.s0;
    cfg.maxfs.big_m = f.big_m;
    if (f.alpha) cfg.weights.alpha = *f.alpha;
    if (f.beta) cfg.weights.beta = *f.beta;
    if (f.gamma) cfg.weights.gamma = *f.gamma;
    return cfg;
}

ModelKind kind_of(const Dataset& ds, const std::string& flag) {
    if (flag.empty()) return ds.model;
    const auto k = parse_model_kind(flag);
    if (k != ds.model) throw InputError("--model does not match the dataset's model");
    return k;
}

void emit(const nlohmann::json& j, const std::string& out) {
    const std::string text = j.dump(1) + "\n";
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw InputError("cannot write " + out);
    f << text;
}

void print_summary(const ModelClass& model, const Dataset& ds, const PipelineResult& r) {
    std::fprintf(stderr, "structures: %zu  energy: %.6g  stop: %s  time: %.2fs\n", r.hypotheses.size(),
                 r.labeling.energy, r.stop_reason.c_str(), r.seconds);
    if (ds.gt && !ds.gt->params.empty()) {
        const auto m = evaluate(model, ds.data, r, *ds.gt);
        std::fprintf(stderr, "recovered %d/%d  misclassification %.4f\n", m.recovered, m.true_structures,
                     m.misclassification);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic multi-structure robust fitting"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
    std::string g_model = "line2d", g_out;
    int g_structures = 1, g_inliers = 80, g_outliers = 20;
    double g_sigma = 0.2, g_box = 10.0;
    std::uint64_t g_seed = 0;
    gen->add_option("--model", g_model)->capture_default_str();
    gen->add_option("--structures", g_structures)->capture_default_str();
    gen->add_option("--inliers", g_inliers, "inliers per structure")->capture_default_str();
    gen->add_option("--sigma", g_sigma, "noise sigma")->capture_default_str();
    gen->add_option("--outliers", g_outliers, "gross outliers")->capture_default_str();
    gen->add_option("--box", g_box, "coordinates in [-box, box]")->capture_default_str();
    gen->add_option("--seed", g_seed)->capture_default_str();
    gen->add_option("--out", g_out, "dataset JSON (default: stdout)");

    // fit
    auto* fit = app.add_subcommand("fit", "run the deterministic pipeline");
    FitFlags ff;
    add_fit_flags(fit, ff);

    // baseline
    auto* base = app.add_subcommand("baseline", "sequential RANSAC or PROSAC");
    FitFlags bf;
    add_fit_flags(base, bf);
    std::string b_method = "ransac";
    long long b_budget = 1000;
    std::uint64_t b_seed = 0;
    std::optional<double> b_threshold;
    base->add_option("--method", b_method, "ransac | prosac")->capture_default_str();
    base->add_option("--budget", b_budget, "minimal subsets per stage")->capture_default_str();
    base->add_option("--seed", b_seed)->capture_default_str();
    base->add_option("--threshold", b_threshold, "consensus threshold (default: 2.5 x max GT algebraic sigma)");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "run a benchmark suite");
    std::string s_name, s_out = "bench_out";
    int s_trials = 50;
    std::uint64_t s_seed = 0;
    bench_cmd->add_option("suite", s_name, "suite name")->required()->check(CLI::IsMember(bench::suite_names()));
    bench_cmd->add_option("--trials", s_trials)->capture_default_str();
    bench_cmd->add_option("--seed", s_seed, "first seed")->capture_default_str();
    bench_cmd->add_option("--out", s_out, "output directory")->capture_default_str();

    // trace
    auto* trace = app.add_subcommand("trace", "IMaxFS-ISE scale trace on a whole dataset as CSV");
    FitFlags tf;
    add_fit_flags(trace, tf);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            GeneratorSpec g;
            g.model = parse_model_kind(g_model);
            if (g_structures < 0 || g_inliers < 0) throw InputError("counts must be nonnegative");
            if (!(g_sigma > 0.0)) throw InputError("sigma must be positive");
            g.structures.assign(g_structures, {std::nullopt, g_inliers, g_sigma});
            g.gross_outliers = g_outliers;
            g.box = g_box;
            g.seed = g_seed;
            const auto ds = generate(g);
            if (g_out.empty())
                std::cout << dump_dataset(ds);
            else
                write_dataset(ds, g_out);
        } else if (*fit) {
            const auto ds = read_dataset(ff.in);
            const auto kind = kind_of(ds, ff.model);
            const auto model = ModelClass::make(kind);
            const auto r = fit_all(ds.data, model, make_config(kind, ff));
            emit(bench::result_to_json(ds.data, r), ff.out);
            print_summary(model, ds, r);
        } else if (*base) {
            const auto ds = read_dataset(bf.in);
            const auto kind = kind_of(ds, bf.model);
            const auto model = ModelClass::make(kind);
            SamplerConfig s;
            if (b_method == "ransac")
                s.kind = SamplerKind::ransac;
            else if (b_method == "prosac")
                s.kind = SamplerKind::prosac;
            else
                throw InputError("unknown method: " + b_method);
            s.iterations = b_budget;
            s.rng_seed = b_seed;
            if (b_threshold)
                s.inlier_threshold = *b_threshold;
            else if (ds.gt && !ds.gt->algebraic_sigmas.empty())
                s.inlier_threshold = bench::baseline_threshold(*ds.gt);
            else
                throw InputError("--threshold is required without ground-truth scales");
            const auto r = sequential_baseline_fit(ds.data, model, make_config(kind, bf), s);
            emit(bench::result_to_json(ds.data, r), bf.out);
            print_summary(model, ds, r);
        } else if (*bench_cmd) {
            const auto rep = bench::run_suite(s_name, s_trials, s_seed);
            bench::write_report(rep, s_out);
            std::cout << rep.summary.dump(1) << "\n";
        } else if (*trace) {
            const auto ds = read_dataset(tf.in);
            const auto kind = kind_of(ds, tf.model);
            const auto model = ModelClass::make(kind);
            auto cfg = make_config(kind, tf);
            // one MaxFS over the whole file
            cfg.maxfs.binary_cap = std::max(cfg.maxfs.binary_cap, static_cast<int>(ds.data.size()));
            const auto r = imaxfs_ise(model, build_rows(model, ds.data), cfg.ise, cfg.maxfs);
            bench::Table t;
            t.header = {"t", "s", "inliers"};
            for (const auto& e : r.trace) t.add({std::to_string(e.t), bench::num(e.s), std::to_string(e.inliers)});
            if (tf.out.empty()) {
                std::cout << t.csv();
            } else {
                std::ofstream f(tf.out, std::ios::binary);
                if (!f) throw InputError("cannot write " + tf.out);
                f << t.csv();
            }
        }
    } catch (const InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 1;
    } catch (const AlgorithmError& e) {
        std::fprintf(stderr, "algorithm failure: %s\n", e.what());
        return 2;
    }
    return 0;
}
