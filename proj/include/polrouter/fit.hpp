#pragma once

// Weighted least-squares fit of y = A (1 - V cos(w x + phi0)).

#include <ceres/ceres.h>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "polrouter/errors.hpp"
#include "polrouter/polmath.hpp"

namespace polrouter {

struct FitPoint {
    double x = 0.0;
    double y = 0.0;
    double sigma = 0.0;  // <= 0 means unit weight
};

struct SinusoidFit {
    double amplitude = 0.0;  // A
    double visibility = 0.0;
    double omega = 0.0;
    double phase = 0.0;
    double amplitude_err = 0.0;
    double visibility_err = 0.0;
    double omega_err = 0.0;
    double phase_err = 0.0;
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();  // order A, V, omega, phi0
    double chi2 = 0.0;
    int dof = 0;
    std::vector<double> residuals;  // y - model

    double chi2_per_dof() const { return dof > 0 ? chi2 / dof : 0.0; }
    double half_period() const { return kPi / omega; }
    double operator()(double x) const { return amplitude * (1.0 - visibility * std::cos(omega * x + phase)); }
};

struct SinusoidFitOptions {
    std::optional<double> omega_seed;  // estimated from the data when empty
    bool fix_omega = false;
    double tolerance = 1e-15;
    int max_iterations = 500;
};

/// Dominant angular frequency of unevenly sampled data by a periodogram scan
/// followed by golden-section refinement.
inline double estimate_omega(const std::vector<FitPoint>& pts) {
    if (pts.size() < 4) throw UsageError("need at least 4 points to estimate a frequency");
    double xmin = pts.front().x, xmax = xmin, mean = 0.0, min_dx = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        xmin = std::min(xmin, pts[i].x);
        xmax = std::max(xmax, pts[i].x);
        mean += pts[i].y;
        if (i > 0 && pts[i].x != pts[i - 1].x) min_dx = std::min(min_dx, std::abs(pts[i].x - pts[i - 1].x));
    }
    mean /= static_cast<double>(pts.size());
    const double span = xmax - xmin;
    if (!(span > 0.0)) throw UsageError("points must span a nonzero x range");
    auto power = [&](double w) {
        cplx s = 0.0;
        for (const auto& p : pts) s += (p.y - mean) * std::polar(1.0, -w * p.x);
        return std::norm(s);
    };
    // Lowest useful frequency: half a period over the span.
    const double w_lo = kPi / span;
    const double w_hi = kPi / min_dx;
    const double step = kPi / (8.0 * span);
    double best = w_lo, best_p = -1.0;
    for (double w = w_lo; w <= w_hi; w += step) {
        const double p = power(w);
        if (p > best_p) {
            best_p = p;
            best = w;
        }
    }
    double a = std::max(w_lo, best - step), b = best + step;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 60; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (power(c) > power(d)) b = d; else a = c;
    }
    return 0.5 * (a + b);
}

namespace detail {
struct SinusoidResidual {
    double x, y, inv_sigma;
    template <typename T>
    bool operator()(const T* p, T* r) const {
        using std::cos;
        r[0] = (T(y) - p[0] * (T(1.0) - p[1] * cos(p[2] * T(x) + p[3]))) * T(inv_sigma);
        return true;
    }
};

/// Linear least squares at fixed omega for A, V, phi0.
inline std::array<double, 4> linear_seed(const std::vector<FitPoint>& pts, double w, bool weighted) {
    Eigen::MatrixXd m(pts.size(), 3);
    Eigen::VectorXd y(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double s = weighted ? 1.0 / pts[i].sigma : 1.0;
        m(i, 0) = s;
        m(i, 1) = s * std::cos(w * pts[i].x);
        m(i, 2) = s * std::sin(w * pts[i].x);
        y(i) = s * pts[i].y;
    }
    const Eigen::Vector3d c = m.colPivHouseholderQr().solve(y);
    const double av = std::hypot(c(1), c(2));
    const double a = c(0);
    return {a, a != 0.0 ? av / a : 0.0, w, std::atan2(c(2), -c(1))};
}
}  // namespace detail

inline SinusoidFit sinusoid_fit(const std::vector<FitPoint>& pts, const SinusoidFitOptions& opt = {}) {
    if (pts.size() < 4) throw UsageError("sinusoid fit needs at least 4 points");
    bool weighted = true;
    for (const auto& p : pts) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw UsageError("fit points must be finite");
        if (!(p.sigma > 0.0)) weighted = false;
    }
    const double w0 = opt.omega_seed ? *opt.omega_seed : estimate_omega(pts);
    if (!(w0 > 0.0)) throw UsageError("frequency seed must be positive");
    double xmin = pts.front().x, xmax = xmin;
    for (const auto& p : pts) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
    }
    if (w0 * (xmax - xmin) < kPi * (1.0 - 1e-9)) throw UsageError("points must span at least half a period");

    std::array<double, 4> p = detail::linear_seed(pts, w0, weighted);
    const std::array<double, 4> seed = p;
    ceres::Problem problem;
    for (const auto& pt : pts) {
        auto* cost = new ceres::AutoDiffCostFunction<detail::SinusoidResidual, 1, 4>(
            new detail::SinusoidResidual{pt.x, pt.y, weighted ? 1.0 / pt.sigma : 1.0});
        problem.AddResidualBlock(cost, nullptr, p.data());
    }
    if (opt.fix_omega) problem.SetParameterization(p.data(), new ceres::SubsetParameterization(4, {2}));
    ceres::Solver::Options so;
    so.linear_solver_type = ceres::DENSE_QR;
    so.function_tolerance = opt.tolerance;
    so.parameter_tolerance = opt.tolerance;
    so.gradient_tolerance = 1e-3 * opt.tolerance;
    so.max_num_iterations = opt.max_iterations;
    so.logging_type = ceres::SILENT;
    ceres::Solver::Summary summary;
    ceres::Solve(so, &problem, &summary);
    if (!summary.IsSolutionUsable() || !std::isfinite(p[0]) || !std::isfinite(p[1])) {
        std::ostringstream os;
        os << "sinusoid fit failed (" << summary.message << "); seed A=" << seed[0] << " V=" << seed[1]
           << " omega=" << seed[2] << " phi0=" << seed[3];
        throw AnalysisError(os.str());
    }
    if (!(p[0] > 0.0)) throw AnalysisError("fitted mean is not positive, visibility is undefined");

    SinusoidFit f;
    f.dof = static_cast<int>(pts.size()) - (opt.fix_omega ? 3 : 4);
    f.chi2 = 2.0 * summary.final_cost;
    ceres::Covariance::Options co;
    co.algorithm_type = ceres::DENSE_SVD;
    co.null_space_rank = -1;
    ceres::Covariance cov(co);
    std::vector<std::pair<const double*, const double*>> blocks{{p.data(), p.data()}};
    if (cov.Compute(blocks, &problem)) {
        Eigen::Matrix<double, 4, 4, Eigen::RowMajor> c;
        cov.GetCovarianceBlock(p.data(), p.data(), c.data());
        f.covariance = c;
        // Without per-point errors the scatter of the residuals sets the scale.
        if (!weighted && f.dof > 0) f.covariance *= f.chi2_per_dof();
    } else {
        f.covariance.setConstant(std::numeric_limits<double>::quiet_NaN());
    }

    if (p[1] < 0.0) {
        p[1] = -p[1];
        p[3] += kPi;
    }
    p[3] = std::remainder(p[3], 2.0 * kPi);
    f.amplitude = p[0];
    f.visibility = p[1];
    f.omega = p[2];
    f.phase = p[3];
    f.amplitude_err = std::sqrt(f.covariance(0, 0));
    f.visibility_err = std::sqrt(f.covariance(1, 1));
    f.omega_err = std::sqrt(f.covariance(2, 2));
    f.phase_err = std::sqrt(f.covariance(3, 3));
    f.residuals.reserve(pts.size());
    for (const auto& pt : pts) f.residuals.push_back(pt.y - f(pt.x));
    return f;
}

}  // namespace polrouter
