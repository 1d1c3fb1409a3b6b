#pragma once

// Synthetic multi-structure datasets and the JSON dataset format.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfit/errors.hpp"
#include "mfit/geometry.hpp"

namespace mfit {

inline constexpr int kDatasetFormatVersion = 1;

struct GroundTruth {
    std::vector<int> labels;  // 0 = gross outlier, k = structure k
    std::vector<ModelParams> params;
    std::vector<double> sigmas;            // geometric noise sigma per structure
    std::vector<double> algebraic_sigmas;  // induced datum-level algebraic scale
};

struct Dataset {
    ModelKind model = ModelKind::line2d;
    std::vector<Datum> data;
    std::optional<GroundTruth> gt;
    nlohmann::json generator;  // echo of the generating spec, if any
};

struct StructureSpec {
    std::optional<Eigen::VectorXd> params;  // random when absent
    int inliers = 0;
    double sigma = 0.0;
};

struct GeneratorSpec {
    ModelKind model = ModelKind::line2d;
    std::vector<StructureSpec> structures;
    int gross_outliers = 0;
    double box = 10.0;  // coordinates in [-box, box]
    double inlier_score_a = 5.0, inlier_score_b = 2.0;
    double outlier_score_a = 2.0, outlier_score_b = 5.0;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const GeneratorSpec& g) {
    nlohmann::json j;
    j["model"] = std::string(to_string(g.model));
    j["gross_outliers"] = g.gross_outliers;
    j["box"] = g.box;
    j["scores"] = {{"inlier_beta", {g.inlier_score_a, g.inlier_score_b}},
                   {"outlier_beta", {g.outlier_score_a, g.outlier_score_b}}};
    j["seed"] = g.seed;
    j["structures"] = nlohmann::json::array();
    for (const auto& s : g.structures) {
        nlohmann::json e{{"inliers", s.inliers}, {"sigma", s.sigma}};
        if (s.params) e["params"] = std::vector<double>(s.params->begin(), s.params->end());
        j["structures"].push_back(e);
    }
    return j;
}

namespace detail {

inline double sample_beta(std::mt19937_64& rng, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng), y = gb(rng);
    return x / (x + y);
}

/// Hyperplane n.z = d with |n| = 1 and d in [0.2, 0.7] * box, written under
/// the last-entry gauge as theta = (-n / d, 1).
inline Eigen::VectorXd random_hyperplane(std::mt19937_64& rng, int dim, double box) {
    std::normal_distribution<double> G(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.2 * box, 0.7 * box);
    Eigen::VectorXd n(dim);
    for (auto& v : n) v = G(rng);
    n.normalize();
    const double d = U(rng);
    Eigen::VectorXd t(dim + 1);
    t.head(dim) = -n / d;
    t[dim] = 1.0;
    return t;
}

inline Eigen::VectorXd random_homography(std::mt19937_64& rng, double box) {
    std::uniform_real_distribution<double> A(-0.25, 0.25), T(-0.2 * box, 0.2 * box), P(-0.1 / box, 0.1 / box);
    Eigen::VectorXd h(9);
    h << 1.0 + A(rng), A(rng), T(rng), A(rng), 1.0 + A(rng), T(rng), P(rng), P(rng), 1.0;
    return h;
}

}  // namespace detail

/// Draws a dataset. Inliers lie on their structure with Gaussian noise
/// (perpendicular for lines, on x' for homographies, isotropic in R^4 for
/// the affine fundamental matrix); gross outliers are uniform in the box.
/// Data are shuffled before ids are assigned.
inline Dataset generate(const GeneratorSpec& spec) {
    const ModelClass model = ModelClass::make(spec.model);
    if (!(spec.box > 0.0)) throw InputError("box must be positive");
    if (spec.gross_outliers < 0) throw InputError("gross outlier count must be nonnegative");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> U(-spec.box, spec.box);
    std::normal_distribution<double> G(0.0, 1.0);

    GroundTruth gt;
    std::vector<std::pair<std::vector<double>, int>> raw;  // coords, label
    for (std::size_t k = 0; k < spec.structures.size(); ++k) {
        const auto& st = spec.structures[k];
        if (st.inliers < 0 || !(st.sigma >= 0.0)) throw InputError("invalid structure spec");
        Eigen::VectorXd theta;
        if (st.params) {
            if (st.params->size() != model.param_count) throw InputError("structure params have the wrong length");
            theta = normalize_gauge({*st.params}, model.gauge).theta;
        } else {
            switch (spec.model) {
                case ModelKind::line2d: theta = detail::random_hyperplane(rng, 2, spec.box); break;
                case ModelKind::affine_fundamental: theta = detail::random_hyperplane(rng, 4, spec.box); break;
                case ModelKind::homography: theta = detail::random_homography(rng, spec.box); break;
            }
        }
        const int label = static_cast<int>(k) + 1;
        double alg_sq = 0.0;
        int made = 0;
        for (int tries = 0; made < st.inliers; ++tries) {
            if (tries > 1000 * (st.inliers + 10))
                throw InputError("structure " + std::to_string(label) + " does not cross the domain box");
            std::vector<double> c;
            double w = 1.0;  // algebraic/geometric noise gain
            switch (spec.model) {
                case ModelKind::line2d: {
                    const Eigen::Vector2d n(theta[0], theta[1]);
                    const double nn = n.norm();
                    if (!(nn > 0)) throw InputError("degenerate line");
                    const Eigen::Vector2d p0 = -n / (nn * nn);  // foot of the origin
                    const Eigen::Vector2d dir(-n[1] / nn, n[0] / nn);
                    const Eigen::Vector2d p = p0 + U(rng) * 1.5 * dir + st.sigma * G(rng) * n / nn;
                    if (std::abs(p[0]) > spec.box || std::abs(p[1]) > spec.box) continue;
                    c = {p[0], p[1]};
                    w = nn;
                    break;
                }
                case ModelKind::affine_fundamental: {
                    if (std::abs(theta[2]) < 1e-12) throw InputError("affine structure has no x' dependence");
                    const double x = U(rng), y = U(rng), yp = U(rng);
                    const double xp = -(theta[0] * x + theta[1] * y + theta[3] * yp + theta[4]) / theta[2];
                    if (std::abs(xp) > spec.box) continue;
                    c = {x + st.sigma * G(rng), y + st.sigma * G(rng), xp + st.sigma * G(rng), yp + st.sigma * G(rng)};
                    w = theta.head<4>().norm();
                    break;
                }
                case ModelKind::homography: {
                    const Eigen::Matrix3d H = homography_matrix({theta});
                    const Eigen::Vector3d x(U(rng), U(rng), 1.0);
                    const Eigen::Vector3d y = H * x;
                    if (!(std::abs(y[2]) > 1e-6)) continue;
                    const double xp = y[0] / y[2], yp = y[1] / y[2];
                    if (std::abs(xp) > spec.box || std::abs(yp) > spec.box) continue;
                    c = {x[0], x[1], xp + st.sigma * G(rng), yp + st.sigma * G(rng)};
                    w = std::abs(y[2]);
                    break;
                }
            }
            alg_sq += w * w;
            raw.push_back({std::move(c), label});
            ++made;
        }
        gt.params.push_back({theta});
        gt.sigmas.push_back(st.sigma);
        gt.algebraic_sigmas.push_back(st.inliers > 0 ? st.sigma * std::sqrt(alg_sq / st.inliers) : 0.0);
    }
    for (int i = 0; i < spec.gross_outliers; ++i) {
        std::vector<double> c(model.coord_dim);
        for (auto& v : c) v = U(rng);
        raw.push_back({std::move(c), 0});
    }
    std::shuffle(raw.begin(), raw.end(), rng);

    Dataset ds;
    ds.model = spec.model;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const bool in = raw[i].second > 0;
        const double q = in ? detail::sample_beta(rng, spec.inlier_score_a, spec.inlier_score_b)
                            : detail::sample_beta(rng, spec.outlier_score_a, spec.outlier_score_b);
        ds.data.push_back({raw[i].first, q, static_cast<int>(i)});
        gt.labels.push_back(raw[i].second);
    }
    ds.gt = std::move(gt);
    ds.generator = to_json(spec);
    return ds;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Dataset& ds) {
    nlohmann::json j;
    j["format_version"] = kDatasetFormatVersion;
    j["model"] = std::string(to_string(ds.model));
    j["data"] = nlohmann::json::array();
    for (const auto& d : ds.data) j["data"].push_back({{"id", d.id}, {"coords", d.coords}, {"score", d.score}});
    if (ds.gt) {
        nlohmann::json g;
        g["labels"] = ds.gt->labels;
        g["params"] = nlohmann::json::array();
        for (const auto& p : ds.gt->params) g["params"].push_back(std::vector<double>(p.theta.begin(), p.theta.end()));
        g["sigmas"] = ds.gt->sigmas;
        g["algebraic_sigmas"] = ds.gt->algebraic_sigmas;
        j["gt"] = g;
    }
    if (!ds.generator.is_null()) j["generator"] = ds.generator;
    return j;
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != kDatasetFormatVersion)
            throw InputError("unsupported dataset format version");
        Dataset ds;
        ds.model = parse_model_kind(j.at("model").get<std::string>());
        const auto model = ModelClass::make(ds.model);
        std::vector<int> seen;
        for (const auto& e : j.at("data")) {
            Datum d{e.at("coords").get<std::vector<double>>(), e.at("score").get<double>(), e.at("id").get<int>()};
            if (!(d.score >= 0.0 && d.score <= 1.0)) throw InputError("score outside [0, 1]");
            for (double c : d.coords)
                if (!std::isfinite(c)) throw InputError("non-finite coordinate");
            detail::check_coords(model, d);
            seen.push_back(d.id);
            ds.data.push_back(std::move(d));
        }
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) throw InputError("duplicate datum id");
        if (j.contains("gt")) {
            const auto& g = j["gt"];
            GroundTruth gt;
            gt.labels = g.at("labels").get<std::vector<int>>();
            for (const auto& p : g.at("params")) {
                const auto v = p.get<std::vector<double>>();
                gt.params.push_back({Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))});
            }
            gt.sigmas = g.value("sigmas", std::vector<double>{});
            gt.algebraic_sigmas = g.value("algebraic_sigmas", std::vector<double>{});
            if (gt.labels.size() != ds.data.size()) throw InputError("gt labels length differs from data length");
            for (int l : gt.labels)
                if (l < 0 || (!gt.params.empty() && l > static_cast<int>(gt.params.size())))
                    throw InputError("gt label out of range");
            ds.gt = std::move(gt);
        }
        if (j.contains("generator")) ds.generator = j["generator"];
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed dataset: ") + e.what());
    }
}

inline std::string dump_dataset(const Dataset& ds) { return to_json(ds).dump(1) + "\n"; }

inline void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path);
    f << dump_dataset(ds);
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot read " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed JSON: ") + e.what());
    }
    return dataset_from_json(j);
}

/// Optional ingestion rescale: each image's coordinates are centred and
/// scaled isotropically into [-target, target]. Ground-truth parameters and
/// scales are dropped since they no longer apply; labels are kept.
inline Dataset rescale_to_box(const Dataset& in, double target = 10.0) {
    Dataset out = in;
    if (out.data.empty()) return out;
    const std::size_t dim = out.data[0].coords.size();
    for (std::size_t off = 0; off < dim; off += 2) {
        double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
        for (const auto& d : out.data)
            for (int k = 0; k < 2; ++k) lo[k] = std::min(lo[k], d.coords[off + k]), hi[k] = std::max(hi[k], d.coords[off + k]);
        const double half = 0.5 * std::max(hi[0] - lo[0], hi[1] - lo[1]);
        const double f = half > 0 ? target / half : 1.0;
        for (auto& d : out.data)
            for (int k = 0; k < 2; ++k) d.coords[off + k] = (d.coords[off + k] - 0.5 * (lo[k] + hi[k])) * f;
    }
    if (out.gt) {
        out.gt->params.clear();
        out.gt->sigmas.clear();
        out.gt->algebraic_sigmas.clear();
    }
    return out;
}

}  // namespace mfit
