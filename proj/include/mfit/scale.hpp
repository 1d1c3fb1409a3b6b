#pragma once

// IKOSE: iterative K-th ordered scale estimator.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfit/errors.hpp"

namespace mfit {

/// Normalized-residual cutoff used to count inliers.
inline constexpr double kIkoseCutoff = 2.5;

/// Inverse standard normal CDF. Acklam's rational approximation followed by
/// one Halley step on erfc, giving close to full double precision.
inline double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile argument must lie in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double sqrt2pi = 2.506628274631000502;
    for (int it = 0; it < 2; ++it) {
        const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
        const double u = e * sqrt2pi * std::exp(0.5 * x * x);
        x = x - u / (1.0 + 0.5 * x * u);
    }
    return x;
}

struct IkoseConfig {
    int max_iter = 100;
    /// Initial nu; 0 means the residual count.
    int nu0 = 0;
};

struct IkoseResult {
    double scale = 0.0;
    int nu = 0;
    double kappa = 0.0;
    int iterations = 0;
    bool converged = true;
};

/// ŝ = r_(K) / Φ⁻¹((1 + K/ν)/2), ν = #{r / ŝ < 2.5}, iterated from ν₀ until ν
/// stops changing. Throws BreakdownError once ν ≤ K (κ would reach 1) and
/// ZeroScaleError when the K-th smallest residual is zero.
inline IkoseResult ikose(std::span<const double> abs_residuals, int K, const IkoseConfig& cfg = {}) {
    const int N = static_cast<int>(abs_residuals.size());
    if (K < 1) throw InputError("IKOSE needs K >= 1");
    if (N < K) throw InputError("IKOSE needs at least K residuals");
    std::vector<double> r(abs_residuals.begin(), abs_residuals.end());
    for (double& v : r) {
        if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
        v = std::abs(v);
    }
    std::sort(r.begin(), r.end());
    const double rk = r[K - 1];
    if (!(rk > 0.0)) throw ZeroScaleError("K-th ordered residual is zero");

    IkoseResult out;
    int nu = cfg.nu0 > 0 ? std::min(cfg.nu0, N) : N;
    out.converged = false;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        if (nu <= K) throw BreakdownError("IKOSE breakdown: K = " + std::to_string(K) +
                                          " is not below the inlier estimate " + std::to_string(nu));
        const double kappa = static_cast<double>(K) / nu;
        const double s = rk / std_normal_quantile(0.5 * (1.0 + kappa));
        const double cut = kIkoseCutoff * s;
        // number of r_i with r_i / s < 2.5
        const int next = static_cast<int>(std::lower_bound(r.begin(), r.end(), cut) - r.begin());
        out.scale = s;
        out.kappa = kappa;
        out.iterations = it;
        out.nu = nu;
        if (next == nu) {
            out.converged = true;
            break;
        }
        nu = next;
    }
    if (!out.converged) {
        // last iterate; nu is reported as counted at the returned scale
        out.nu = static_cast<int>(std::lower_bound(r.begin(), r.end(), kIkoseCutoff * out.scale) - r.begin());
    }
    return out;
}

}  // namespace mfit
