#include <gtest/gtest.h>

#include "mfit/bench.hpp"
#include "mfit/imaxfs_ise.hpp"

using namespace mfit;

namespace {

const ModelClass kLine = ModelClass::make(ModelKind::line2d);

std::vector<Datum> exact_line(int n) {
    std::vector<Datum> d;
    for (int i = 0; i < n; ++i) {
        const double x = -5.0 + 0.37 * i;
        d.push_back({{x, 0.5 * x + 1.0}, 1.0, i});
    }
    return d;
}

}  // namespace

TEST(ImaxfsIse, NoiselessLineConvergesToFloor) {
    const auto data = exact_line(20);
    IseConfig cfg;
    cfg.s0 = 1e-6;
    const auto r = imaxfs_ise(kLine, build_rows(kLine, data), cfg);
    EXPECT_LE(r.trace.size(), 3u);
    EXPECT_EQ(r.inlier_count, 20);
    EXPECT_EQ(r.scale, cfg.scale_floor);
    EXPECT_TRUE(r.converged);
}

TEST(ImaxfsIse, UnreachableThresholdRaisesInsufficientInliers) {
    const auto data = exact_line(9);
    IseConfig cfg;
    cfg.max_outer_iter = 12;
    try {
        imaxfs_ise(kLine, build_rows(kLine, data), cfg);
        FAIL() << "expected InsufficientInliersError";
    } catch (const InsufficientInliersError&) {
    }
}

TEST(ImaxfsIse, InputValidation) {
    const auto rows = build_rows(kLine, exact_line(12));
    IseConfig cfg;
    cfg.s0 = 0.0;
    EXPECT_THROW(imaxfs_ise(kLine, rows, cfg), InputError);
    cfg = {};
    cfg.K = 0;
    EXPECT_THROW(imaxfs_ise(kLine, rows, cfg), InputError);
    cfg = {};
    cfg.max_outer_iter = 0;
    EXPECT_THROW(imaxfs_ise(kLine, rows, cfg), InputError);
}

TEST(ImaxfsIse, TraceCountsMatchRecount) {
    const auto ds = generate(bench::line_design(0.2, 4));
    const auto rows = build_rows(kLine, ds.data);
    const auto dm = make_design(kLine, ds.data);
    const auto r = imaxfs_ise(kLine, rows, {});
    ASSERT_FALSE(r.trace.empty());
    for (const auto& e : r.trace) {
        int n = 0;
        for (double v : datum_residuals(dm, e.params.theta)) n += v <= e.s + 1e-6;
        EXPECT_EQ(n, e.inliers) << "t = " << e.t;
    }
    const auto& last = r.trace.back();
    EXPECT_EQ(last.s, r.scale);
    EXPECT_EQ(last.inliers, r.inlier_count);
    EXPECT_EQ(last.params.theta, r.params.theta);
}

TEST(ImaxfsIse, CycleShortcutEqualsFullRun) {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const auto ds = generate(bench::line_design(0.1 + 0.1 * (seed % 3), seed));
        const auto rows = build_rows(kLine, ds.data);
        IseConfig fast;
        fast.rel_tol = 1e-12;  // makes cycling likely
        IseConfig slow = fast;
        slow.cycle_shortcut = false;
        const auto a = imaxfs_ise(kLine, rows, fast);
        const auto b = imaxfs_ise(kLine, rows, slow);
        ASSERT_EQ(a.trace.size(), b.trace.size()) << "seed " << seed;
        for (std::size_t t = 0; t < a.trace.size(); ++t) {
            EXPECT_EQ(a.trace[t].s, b.trace[t].s);
            EXPECT_EQ(a.trace[t].inliers, b.trace[t].inliers);
        }
        EXPECT_EQ(a.scale, b.scale);
        EXPECT_EQ(a.params.theta, b.params.theta);
        EXPECT_EQ(a.inlier_mask, b.inlier_mask);
        EXPECT_EQ(a.converged, b.converged);
    }
}

TEST(ImaxfsIse, Deterministic) {
    const auto ds = generate(bench::line_design(0.3, 8));
    const auto rows = build_rows(kLine, ds.data);
    const auto a = imaxfs_ise(kLine, rows, {});
    const auto b = imaxfs_ise(kLine, rows, {});
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t t = 0; t < a.trace.size(); ++t) EXPECT_EQ(a.trace[t].s, b.trace[t].s);
    EXPECT_EQ(a.params.theta, b.params.theta);
}

TEST(ImaxfsIse, ScaleRisesFromSmallS0) {
    const auto t = bench::fig4_trial(0.2, 1);
    ASSERT_TRUE(t.error.empty()) << t.error;
    ASSERT_GE(t.trace.size(), 2u);
    EXPECT_EQ(t.trace.front().s, 0.01);
    EXPECT_GT(t.s_star, t.trace.front().s);
}

TEST(ImaxfsIse, Fig4DesignSmallSample) {
    // the full 3 x 50 version runs in the acceptance suite
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) ok += bench::fig4_trial(0.2, seed).within_factor(2.0);
    EXPECT_GE(ok, 8);
}
