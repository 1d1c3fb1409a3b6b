#include <gtest/gtest.h>

#include <random>

#include "mfit/geometry.hpp"

using namespace mfit;

namespace {

Datum pt(std::initializer_list<double> c, int id = 0) { return {std::vector<double>(c), 1.0, id}; }

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(v.size());
    int i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST(ModelClass, Dimensions) {
    const auto line = ModelClass::make(ModelKind::line2d);
    const auto hom = ModelClass::make(ModelKind::homography);
    const auto aff = ModelClass::make(ModelKind::affine_fundamental);
    EXPECT_EQ(line.param_count, 3);
    EXPECT_EQ(hom.param_count, 9);
    EXPECT_EQ(aff.param_count, 5);
    EXPECT_EQ(hom.rows_per_datum, 2);
    EXPECT_EQ(line.min_data, 2);
    EXPECT_EQ(aff.min_data, 4);
    EXPECT_EQ(line.gauge, vec({0, 0, 1}));
}

TEST(BuildRows, LinePoint) {
    const auto m = ModelClass::make(ModelKind::line2d);
    const std::vector<Datum> d{pt({2, 3})};
    const auto rows = build_rows(m, d);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].a, vec({2, 3, 1}));
}

TEST(BuildRows, AffineCorrespondence) {
    const auto m = ModelClass::make(ModelKind::affine_fundamental);
    const std::vector<Datum> d{pt({1, 2, 3, 4})};
    EXPECT_EQ(build_rows(m, d)[0].a, vec({1, 2, 3, 4, 1}));
}

TEST(BuildRows, IdentityHomographyGivesZeroResidual) {
    const auto m = ModelClass::make(ModelKind::homography);
    const std::vector<Datum> d{pt({0.5, 0.5, 0.5, 0.5}, 7)};
    const auto rows = build_rows(m, d);
    ASSERT_EQ(rows.size(), 2u);
    const ModelParams id{vec({1, 0, 0, 0, 1, 0, 0, 0, 1})};
    for (const auto& r : rows) {
        EXPECT_EQ(r.owner, 7);
        EXPECT_EQ(algebraic_residual(r, id), 0.0);
    }
}

TEST(BuildRows, DimensionMismatchThrows) {
    const auto m = ModelClass::make(ModelKind::homography);
    const std::vector<Datum> d{pt({1, 2})};
    EXPECT_THROW(build_rows(m, d), InputError);
}

TEST(BuildRows, CountIsRowsPerDatumTimesData) {
    for (auto kind : {ModelKind::line2d, ModelKind::homography, ModelKind::affine_fundamental}) {
        const auto m = ModelClass::make(kind);
        std::vector<Datum> d;
        for (int i = 0; i < 6; ++i) d.push_back({std::vector<double>(m.coord_dim, 0.1 * i), 0.5, i});
        EXPECT_EQ(build_rows(m, d).size(), 6u * m.rows_per_datum);
    }
}

TEST(AlgebraicResidual, Examples) {
    EXPECT_EQ(algebraic_residual({vec({2, 3, 1}), 0}, {vec({0, 0, 1})}), 1.0);
    // (1,2,3,4,1) . (1,-1,0,0,1)/k with k = 1 keeps the last entry at 1
    EXPECT_DOUBLE_EQ(algebraic_residual({vec({1, 2, 3, 4, 1}), 0}, {vec({1, -1, 0, 0, 1})}), 0.0);
    EXPECT_DOUBLE_EQ(algebraic_residual({vec({1, 2, 3, 4, 1}), 0}, {vec({2, 1, 0, 0, 1})}), 5.0);
}

TEST(GeometricResidual, Examples) {
    const auto line = ModelClass::make(ModelKind::line2d);
    EXPECT_NEAR(geometric_residual(line, {vec({1, -1, 0})}, pt({1, 1})), 0.0, 1e-15);
    EXPECT_NEAR(geometric_residual(line, {vec({0, 1, 0})}, pt({5, 2})), 2.0, 1e-15);
    const auto hom = ModelClass::make(ModelKind::homography);
    EXPECT_NEAR(geometric_residual(hom, {vec({1, 0, 0, 0, 1, 0, 0, 0, 1})}, pt({0.3, 0.4, 0.3, 0.5})), 0.1,
                1e-12);
    EXPECT_THROW(geometric_residual(line, {vec({0, 0, 1})}, pt({1, 1})), DegenerateModelError);
}

TEST(GeometricResidual, GaugeInvariant) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (auto kind : {ModelKind::line2d, ModelKind::homography, ModelKind::affine_fundamental}) {
        const auto m = ModelClass::make(kind);
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::VectorXd t(m.param_count);
            for (auto& v : t) v = U(rng);
            if (kind == ModelKind::homography) t.head<9>() += vec({2, 0, 0, 0, 2, 0, 0, 0, 2});
            Datum d{std::vector<double>(m.coord_dim), 1.0, 0};
            for (auto& c : d.coords) c = U(rng);
            const auto base = normalize_gauge({t}, m.gauge);
            const auto scaled = normalize_gauge({-3.7 * t}, m.gauge);
            EXPECT_NEAR(geometric_residual(m, base, d), geometric_residual(m, scaled, d), 1e-9);
        }
    }
}

TEST(AlgebraicResidual, ZeroOnExactData) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    // line
    {
        const auto m = ModelClass::make(ModelKind::line2d);
        const ModelParams th{vec({0.3, -0.8, 1})};
        for (int i = 0; i < 20; ++i) {
            const double x = U(rng);
            const double y = -(th.theta[0] * x + 1.0) / th.theta[1];
            EXPECT_NEAR(datum_residual(m, th, pt({x, y})), 0.0, 1e-10);
        }
    }
    // homography
    {
        const auto m = ModelClass::make(ModelKind::homography);
        const ModelParams th{vec({1.1, 0.1, 0.3, -0.2, 0.9, 0.5, 0.01, -0.02, 1})};
        const Eigen::Matrix3d H = homography_matrix(th);
        for (int i = 0; i < 20; ++i) {
            const Eigen::Vector3d x(U(rng), U(rng), 1.0);
            const Eigen::Vector3d y = H * x;
            EXPECT_NEAR(datum_residual(m, th, pt({x[0], x[1], y[0] / y[2], y[1] / y[2]})), 0.0, 1e-10);
        }
    }
    // affine fundamental: x' solved from the constraint
    {
        const auto m = ModelClass::make(ModelKind::affine_fundamental);
        const ModelParams th{vec({0.2, -0.4, 0.7, 0.3, 1})};
        for (int i = 0; i < 20; ++i) {
            const double x = U(rng), y = U(rng), yp = U(rng);
            const double xp = -(0.2 * x - 0.4 * y + 0.3 * yp + 1.0) / 0.7;
            EXPECT_NEAR(datum_residual(m, th, pt({x, y, xp, yp})), 0.0, 1e-10);
        }
    }
}

TEST(FitDlt, RecoversLineAndRespectsGauge) {
    const auto m = ModelClass::make(ModelKind::line2d);
    std::vector<Datum> d;
    for (int i = 0; i < 5; ++i) d.push_back(pt({double(i), 2.0 * i + 1.0}, i));  // 2x - y + 1 = 0
    const auto fit = fit_dlt(m, d);
    ASSERT_TRUE(fit.has_value());
    EXPECT_NEAR(m.gauge.dot(fit->theta), 1.0, 1e-12);
    EXPECT_NEAR(fit->theta[0], 2.0, 1e-10);
    EXPECT_NEAR(fit->theta[1], -1.0, 1e-10);
}

TEST(FitDlt, UnderdeterminedReturnsNothing) {
    const auto m = ModelClass::make(ModelKind::line2d);
    const std::vector<Datum> d{pt({1, 1})};
    EXPECT_FALSE(fit_dlt(m, d).has_value());
}
