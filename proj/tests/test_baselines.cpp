#include <gtest/gtest.h>

#include "mfit/baselines.hpp"
#include "mfit/bench.hpp"

using namespace mfit;

namespace {

const ModelClass kLine = ModelClass::make(ModelKind::line2d);

}  // namespace

TEST(Sampler, ZeroNoiseLineFindsAllInliers) {
    const auto ds = generate(bench::line_design(0.0, 1, 50, 50));
    for (auto kind : {SamplerKind::ransac, SamplerKind::prosac}) {
        SamplerConfig cfg;
        cfg.kind = kind;
        cfg.iterations = 200;
        cfg.inlier_threshold = 1e-6;
        const auto run = sample_hypotheses(ds.data, kLine, cfg);
        ASSERT_NE(run.best(), nullptr);
        EXPECT_GE(run.best()->inlier_count, 50);
        EXPECT_EQ(run.iterations, 200);
        EXPECT_EQ(static_cast<long long>(run.hypotheses.size()) + run.degenerate, run.iterations);
    }
}

TEST(Sampler, ConsensusMatchesRecount) {
    const auto ds = generate(bench::lines_design(1));
    const auto dm = make_design(kLine, ds.data);
    SamplerConfig cfg;
    cfg.iterations = 50;
    cfg.inlier_threshold = 0.3;
    for (const auto& h : sample_hypotheses(ds.data, kLine, cfg).hypotheses) {
        int n = 0;
        for (double r : datum_residuals(dm, h.params.theta)) n += r <= 0.3;
        EXPECT_EQ(h.inlier_count, n);
        EXPECT_EQ(h.sample_ids.size(), 2u);
        EXPECT_NE(h.sample_ids[0], h.sample_ids[1]);
    }
}

TEST(Sampler, SeededDeterminism) {
    const auto ds = generate(bench::lines_design(2));
    for (auto kind : {SamplerKind::ransac, SamplerKind::prosac}) {
        SamplerConfig cfg;
        cfg.kind = kind;
        cfg.iterations = 100;
        cfg.rng_seed = 17;
        const auto a = sample_hypotheses(ds.data, kLine, cfg);
        const auto b = sample_hypotheses(ds.data, kLine, cfg);
        ASSERT_EQ(a.hypotheses.size(), b.hypotheses.size());
        for (std::size_t i = 0; i < a.hypotheses.size(); ++i) EXPECT_EQ(a.hypotheses[i].sample_ids, b.hypotheses[i].sample_ids);
        cfg.rng_seed = 18;
        const auto c = sample_hypotheses(ds.data, kLine, cfg);
        bool differ = false;
        for (std::size_t i = 0; i < std::min(a.hypotheses.size(), c.hypotheses.size()); ++i)
            differ = differ || a.hypotheses[i].sample_ids != c.hypotheses[i].sample_ids;
        EXPECT_TRUE(differ);
    }
}

TEST(Prosac, EqualScoresFollowIdOrder) {
    auto ds = generate(bench::lines_design(0));
    for (auto& d : ds.data) d.score = 0.5;
    SamplerConfig cfg;
    cfg.kind = SamplerKind::prosac;
    cfg.iterations = 1;
    const auto run = sample_hypotheses(ds.data, kLine, cfg);
    ASSERT_EQ(run.hypotheses.size(), 1u);
    // the first draw is the newest prefix member plus one from before it
    auto ids = run.hypotheses[0].sample_ids;
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(ids[1], 2);
    EXPECT_LT(ids[0], 2);
}

TEST(Prosac, EarlyDrawsComeFromTopScores) {
    const auto ds = generate(bench::lines_design(3));
    const auto order = detail::score_order(ds.data);
    SamplerConfig cfg;
    cfg.kind = SamplerKind::prosac;
    cfg.iterations = 1000;
    const auto run = sample_hypotheses(ds.data, kLine, cfg);
    std::vector<int> rank(ds.data.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[ds.data[order[r]].id] = static_cast<int>(r);
    // the prefix only grows
    int prev = 0;
    for (std::size_t t = 0; t < 100 && t < run.hypotheses.size(); ++t) {
        const auto& s = run.hypotheses[t].sample_ids;
        const int top = std::max(rank[s[0]], rank[s[1]]);
        EXPECT_GE(top + 1, prev);
        prev = std::max(prev, top);
    }
    EXPECT_LT(prev, 100);
}

TEST(Sampler, BudgetOfOne) {
    const auto ds = generate(bench::lines_design(4));
    SamplerConfig cfg;
    cfg.iterations = 1;
    EXPECT_EQ(sample_hypotheses(ds.data, kLine, cfg).iterations, 1);
    cfg.iterations = 0;
    EXPECT_THROW(sample_hypotheses(ds.data, kLine, cfg), InputError);
    cfg = {};
    cfg.inlier_threshold = 0.0;
    EXPECT_THROW(sample_hypotheses(ds.data, kLine, cfg), InputError);
}

TEST(SequentialBaseline, RecoversCleanLines) {
    const auto ds = generate(bench::lines_design(0, 0.2));
    SamplerConfig s;
    s.iterations = 500;
    s.inlier_threshold = bench::baseline_threshold(*ds.gt);
    const auto cfg = PipelineConfig::defaults_for(ModelKind::line2d);
    const auto r = sequential_baseline_fit(ds.data, kLine, cfg, s);
    EXPECT_EQ(evaluate(kLine, ds.data, r, *ds.gt).recovered, 3);
    EXPECT_TRUE(audit_energy(kLine, ds.data, r).ok());
    for (const auto& st : r.stages) EXPECT_FALSE(st.optimal);
    const auto again = sequential_baseline_fit(ds.data, kLine, cfg, s);
    EXPECT_TRUE(bench::identical(r, again));
}
