#pragma once

// Model plug-ins: DLT constraint rows, gauge handling and residuals for
// 2D lines, planar homographies and affine fundamental matrices.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfit/errors.hpp"

namespace mfit {

enum class ModelKind { line2d, homography, affine_fundamental };

inline std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::line2d: return "line2d";
        case ModelKind::homography: return "homography";
        case ModelKind::affine_fundamental: return "affine_fundamental";
    }
    return "unknown";
}

inline ModelKind parse_model_kind(std::string_view name) {
    if (name == "line2d" || name == "line") return ModelKind::line2d;
    if (name == "homography" || name == "H") return ModelKind::homography;
    if (name == "affine_fundamental" || name == "affine_f" || name == "F")
        return ModelKind::affine_fundamental;
    throw InputError("unknown model kind '" + std::string(name) + "'");
}

/// One observation: a 2D point (line2d) or a correspondence (x, y, x', y').
struct Datum {
    std::vector<double> coords;
    double score = 1.0;  // normalized matching score in [0, 1]
    int id = 0;
};

struct ModelClass {
    ModelKind kind = ModelKind::line2d;
    int param_count = 3;
    int rows_per_datum = 1;
    int min_data = 2;
    int coord_dim = 2;
    Eigen::VectorXd gauge;  // c in c^T theta = 1

    /// Builds the plug-in for `kind`. The gauge defaults to e_p (last
    /// parameter fixed to one), which excludes models whose last parameter
    /// is zero, e.g. lines through the origin.
    static ModelClass make(ModelKind kind, std::optional<Eigen::VectorXd> gauge = std::nullopt) {
        ModelClass m;
        m.kind = kind;
        switch (kind) {
            case ModelKind::line2d:
                m.param_count = 3, m.rows_per_datum = 1, m.min_data = 2, m.coord_dim = 2;
                break;
            case ModelKind::homography:
                m.param_count = 9, m.rows_per_datum = 2, m.min_data = 4, m.coord_dim = 4;
                break;
            case ModelKind::affine_fundamental:
                m.param_count = 5, m.rows_per_datum = 1, m.min_data = 4, m.coord_dim = 4;
                break;
        }
        if (gauge) {
            if (gauge->size() != m.param_count)
                throw InputError("gauge vector length does not match parameter count");
            if (gauge->norm() == 0.0) throw InputError("gauge vector must be nonzero");
            m.gauge = *gauge;
        } else {
            m.gauge = Eigen::VectorXd::Unit(m.param_count, m.param_count - 1);
        }
        return m;
    }
};

struct ConstraintRow {
    Eigen::VectorXd a;
    int owner = 0;  // datum id
};

struct ModelParams {
    Eigen::VectorXd theta;
};

namespace detail {

inline void check_coords(const ModelClass& model, const Datum& d) {
    if (static_cast<int>(d.coords.size()) != model.coord_dim)
        throw InputError("datum " + std::to_string(d.id) + " has " +
                         std::to_string(d.coords.size()) + " coordinates, " +
                         std::string(to_string(model.kind)) + " needs " +
                         std::to_string(model.coord_dim));
}

/// Writes the rows of one datum into `out` (rows_per_datum x p).
template <typename Derived>
void fill_rows(const ModelClass& model, const Datum& d, Eigen::MatrixBase<Derived>& out) {
    const auto& c = d.coords;
    switch (model.kind) {
        case ModelKind::line2d:
            out.row(0) << c[0], c[1], 1.0;
            break;
        case ModelKind::homography: {
            const double x = c[0], y = c[1], xp = c[2], yp = c[3];
            // two independent rows of x' x (H x) = 0, h row-major
            out.row(0) << 0.0, 0.0, 0.0, -x, -y, -1.0, yp * x, yp * y, yp;
            out.row(1) << x, y, 1.0, 0.0, 0.0, 0.0, -xp * x, -xp * y, -xp;
            break;
        }
        case ModelKind::affine_fundamental:
            out.row(0) << c[0], c[1], c[2], c[3], 1.0;
            break;
    }
}

}  // namespace detail

inline std::vector<ConstraintRow> build_rows(const ModelClass& model, std::span<const Datum> data) {
    std::vector<ConstraintRow> rows;
    rows.reserve(data.size() * model.rows_per_datum);
    Eigen::MatrixXd block(model.rows_per_datum, model.param_count);
    for (const auto& d : data) {
        detail::check_coords(model, d);
        detail::fill_rows(model, d, block);
        for (int r = 0; r < model.rows_per_datum; ++r)
            rows.push_back({block.row(r).transpose(), d.id});
    }
    return rows;
}

inline double algebraic_residual(const ConstraintRow& row, const ModelParams& params) {
    if (row.a.size() != params.theta.size())
        throw InputError("row and parameter dimensions differ");
    return std::abs(row.a.dot(params.theta));
}

/// Dense row matrix of a whole dataset plus the per-row owner index.
/// Row r belongs to datum index r / rows_per_datum.
struct DesignMatrix {
    Eigen::MatrixXd A;
    int rows_per_datum = 1;

    int datum_count() const { return static_cast<int>(A.rows()) / rows_per_datum; }
};

inline DesignMatrix make_design(const ModelClass& model, std::span<const Datum> data) {
    DesignMatrix dm;
    dm.rows_per_datum = model.rows_per_datum;
    dm.A.resize(static_cast<Eigen::Index>(data.size()) * model.rows_per_datum, model.param_count);
    for (std::size_t i = 0; i < data.size(); ++i) {
        detail::check_coords(model, data[i]);
        auto block = dm.A.middleRows(static_cast<Eigen::Index>(i) * model.rows_per_datum,
                                     model.rows_per_datum);
        detail::fill_rows(model, data[i], block);
    }
    return dm;
}

/// Datum-level algebraic residual: the largest |a^T theta| over the datum's rows.
inline std::vector<double> datum_residuals(const DesignMatrix& dm, const Eigen::VectorXd& theta) {
    const Eigen::VectorXd r = dm.A * theta;
    std::vector<double> out(dm.datum_count(), 0.0);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        auto& slot = out[i / dm.rows_per_datum];
        slot = std::max(slot, std::abs(r[i]));
    }
    return out;
}

inline double datum_residual(const ModelClass& model, const ModelParams& params, const Datum& d) {
    Eigen::MatrixXd block(model.rows_per_datum, model.param_count);
    detail::check_coords(model, d);
    detail::fill_rows(model, d, block);
    return (block * params.theta).cwiseAbs().maxCoeff();
}

/// Rescales theta so that c^T theta = 1.
inline ModelParams normalize_gauge(const ModelParams& params, const Eigen::VectorXd& gauge) {
    const double g = gauge.dot(params.theta);
    if (!(std::abs(g) > 1e-14 * std::max(1.0, params.theta.norm())))
        throw DegenerateModelError("parameters are orthogonal to the gauge vector");
    return {params.theta / g};
}

inline Eigen::Matrix3d homography_matrix(const ModelParams& params) {
    Eigen::Matrix3d H;
    H << params.theta[0], params.theta[1], params.theta[2], params.theta[3], params.theta[4],
        params.theta[5], params.theta[6], params.theta[7], params.theta[8];
    return H;
}

/// Perpendicular distance (line), symmetric transfer error (homography) or
/// Sampson distance (affine fundamental matrix).
inline double geometric_residual(const ModelClass& model, const ModelParams& params, const Datum& d) {
    detail::check_coords(model, d);
    const auto& t = params.theta;
    const auto& c = d.coords;
    switch (model.kind) {
        case ModelKind::line2d: {
            const double n = std::hypot(t[0], t[1]);
            if (!(n > 1e-12 * t.cwiseAbs().maxCoeff())) throw DegenerateModelError("line has a = b = 0");
            return std::abs(t[0] * c[0] + t[1] * c[1] + t[2]) / n;
        }
        case ModelKind::homography: {
            const Eigen::Matrix3d H = homography_matrix(params);
            Eigen::FullPivLU<Eigen::Matrix3d> lu(H);
            if (!lu.isInvertible()) throw DegenerateModelError("homography is singular");
            const Eigen::Vector3d fwd = H * Eigen::Vector3d(c[0], c[1], 1.0);
            const Eigen::Vector3d bwd = lu.solve(Eigen::Vector3d(c[2], c[3], 1.0));
            if (fwd[2] == 0.0 || bwd[2] == 0.0)
                throw DegenerateModelError("point mapped to infinity");
            const double df = std::hypot(fwd[0] / fwd[2] - c[2], fwd[1] / fwd[2] - c[3]);
            const double db = std::hypot(bwd[0] / bwd[2] - c[0], bwd[1] / bwd[2] - c[1]);
            return 0.5 * (df + db);
        }
        case ModelKind::affine_fundamental: {
            const double g = t.head<4>().norm();
            if (!(g > 1e-12 * t.cwiseAbs().maxCoeff()))
                throw DegenerateModelError("affine fundamental matrix has a zero gradient");
            return std::abs(t[0] * c[0] + t[1] * c[1] + t[2] * c[2] + t[3] * c[3] + t[4]) / g;
        }
    }
    return 0.0;
}

/// Least-squares DLT fit under the gauge: argmin ||A theta|| s.t. c^T theta = 1.
/// With exactly p - 1 independent rows this is the exact minimal solution.
/// Returns nullopt when the rows leave the solution undetermined.
inline std::optional<ModelParams> fit_dlt(const Eigen::Ref<const Eigen::MatrixXd>& A,
                                          const Eigen::VectorXd& gauge) {
    const Eigen::Index p = gauge.size();
    if (A.cols() != p) throw InputError("row matrix and gauge dimensions differ");
    // theta = theta0 + N z with N spanning the orthogonal complement of c
    const Eigen::VectorXd theta0 = gauge / gauge.squaredNorm();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauge);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
    const Eigen::MatrixXd N = Q.rightCols(p - 1);
    const Eigen::MatrixXd AN = A * N;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> solver(AN);
    solver.setThreshold(1e-10);
    if (solver.rank() < p - 1) return std::nullopt;
    const Eigen::VectorXd z = solver.solve(-(A * theta0));
    ModelParams out{theta0 + N * z};
    if (!out.theta.allFinite()) return std::nullopt;
    return out;
}

inline std::optional<ModelParams> fit_dlt(const ModelClass& model, std::span<const Datum> data) {
    const DesignMatrix dm = make_design(model, data);
    return fit_dlt(dm.A, model.gauge);
}

}  // namespace mfit
