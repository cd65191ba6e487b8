#pragma once

// Recovering the router process from a total process measured through a
// known fiber: find chi_R with chi_T = chi_F o chi_R.

#include <ceres/ceres.h>

#include <array>
#include <vector>

#include "polrouter/tomography.hpp"

namespace polrouter {

struct DeconvolutionOptions {
    int restarts = 8;
    int max_iterations = 5000;
    // Quadratic TP penalty weight of the first restart, multiplied by
    // `tp_weight_growth` on every restart until the TP residual is met.
    double tp_weight = 1.0;
    double tp_weight_growth = 10.0;
    double tp_tolerance = 1e-6;
    double cost_threshold = 1e-6;  // report flagged non-converged above this
    bool trace_preserving = true;
    std::uint64_t seed = 1;
    std::optional<ProcessMatrix> target;
};

namespace detail {
/// Linear functional chi -> Re sum_ab chi_ab E_ab.
struct LinearResidual {
    Mat4 e;
    double offset = 0.0;  // value subtracted from the functional
    double scale = 1.0;
};

/// Pauli components of D_k = eps_T(rho_k) - eps_F(eps_R(rho_k)) over the six
/// fiducial inputs, as linear functionals of chi_R.
inline std::vector<LinearResidual> deconvolution_residuals(const ProcessMatrix& total, const ProcessMatrix& fiber) {
    std::vector<LinearResidual> out;
    for (PolLabel k : kFiducialLabels) {
        const Mat2 rho = DensityMatrix2::from_label(k).matrix();
        const Mat2 target = apply_process_raw(total.matrix(), rho);
        std::array<std::array<Mat2, 4>, 4> fe;  // eps_F(s_i rho s_j)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) fe[i][j] = apply_process_raw(fiber.matrix(), pauli(i) * rho * pauli(j));
        for (int p = 0; p < 4; ++p) {
            LinearResidual r;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) r.e(i, j) = (pauli(p) * fe[i][j]).trace() / 2.0;
            r.offset = (pauli(p) * target).trace().real() / 2.0;
            // residual = model - target
            out.push_back(r);
        }
    }
    return out;
}

/// The three traceless components of sum chi_ab s_b s_a - I.
inline std::vector<LinearResidual> tp_residuals(double weight) {
    std::vector<LinearResidual> out;
    for (int q = 1; q < 4; ++q) {
        LinearResidual r;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) r.e(a, b) = (pauli(q) * pauli(b) * pauli(a)).trace() / 2.0;
        r.scale = std::sqrt(weight);
        out.push_back(r);
    }
    return out;
}

class DeconvolutionCost final : public ceres::CostFunction {
public:
    explicit DeconvolutionCost(std::vector<LinearResidual> rs) : rs_(std::move(rs)) {
        set_num_residuals(static_cast<int>(rs_.size()) + 1);
        mutable_parameter_block_sizes()->push_back(16);
    }

    bool Evaluate(double const* const* parameters, double* residuals, double** jacobians) const override {
        TriangularParams t;
        std::copy(parameters[0], parameters[0] + 16, t.begin());
        double a = 0.0;
        for (double v : t) a += v * v;
        if (!(a > 1e-300)) return false;
        const Mat4 chi = normalized_gram<4>(t);
        for (std::size_t r = 0; r < rs_.size(); ++r) {
            const auto& lr = rs_[r];
            residuals[r] = lr.scale * ((chi.cwiseProduct(lr.e)).sum().real() - lr.offset);
            if (jacobians && jacobians[0]) {
                const auto g = chain_to_params<4>(t, Mat4(lr.scale * lr.e.transpose()));
                std::copy(g.begin(), g.end(), jacobians[0] + 16 * r);
            }
        }
        // Scale pin: sqrt(c) (a - 1).
        const std::size_t last = rs_.size();
        residuals[last] = std::sqrt(kScalePin) * (a - 1.0);
        if (jacobians && jacobians[0])
            for (int k = 0; k < 16; ++k) jacobians[0][16 * last + k] = std::sqrt(kScalePin) * 2.0 * t[k];
        return true;
    }

private:
    std::vector<LinearResidual> rs_;
};
}  // namespace detail

/// Sum over the six fiducial inputs of the spectral norm of
/// eps_T(rho_k) - eps_F(eps_R(rho_k)).
inline double deconvolution_cost(const ProcessMatrix& total, const ProcessMatrix& fiber, const ProcessMatrix& router) {
    double c = 0.0;
    for (PolLabel k : kFiducialLabels) {
        const Mat2 rho = DensityMatrix2::from_label(k).matrix();
        const Mat2 d = apply_process_raw(total.matrix(), rho) -
                       apply_process_raw(fiber.matrix(), apply_process_raw(router.matrix(), rho));
        c += spectral_norm(d);
    }
    return c;
}

/// Least-squares on the Pauli components of every D_k shares its zero set with
/// the spectral-norm cost and is smooth, so the trust-region solver runs on
/// it; the reported cost is the spectral-norm sum.  Restart 0 starts from
/// chi_T, the others from random parameters.  The best restart is then
/// refined from its rank-truncated versions: near a rank-deficient optimum
/// the vanishing parameters enter quadratically and the solver stalls, while
/// a start on the right rank converges directly.
inline ProcessReconstruction deconvolve_fiber(const ProcessMatrix& total, const ProcessMatrix& fiber,
                                              const DeconvolutionOptions& opt = {}) {
    const auto base = detail::deconvolution_residuals(total, fiber);
    Rng rng = make_stream(opt.seed, 0xdec0);
    std::optional<ProcessReconstruction> best;
    int total_iterations = 0;
    double weight = opt.tp_weight;
    auto key = [&](const ProcessReconstruction& r) {
        const bool ok = !opt.trace_preserving || r.tp_residual <= opt.tp_tolerance;
        return std::pair{ok ? 0 : 1, r.cost};
    };
    auto run = [&](TriangularParams t) {
        auto rs = base;
        if (opt.trace_preserving) {
            const auto tp = detail::tp_residuals(weight);
            rs.insert(rs.end(), tp.begin(), tp.end());
        }
        ceres::Problem problem;
        problem.AddResidualBlock(new detail::DeconvolutionCost(std::move(rs)), nullptr, t.data());
        ceres::Solver::Options so;
        so.linear_solver_type = ceres::DENSE_QR;
        so.trust_region_strategy_type = ceres::DOGLEG;
        so.max_num_iterations = opt.max_iterations;
        so.function_tolerance = 1e-12;
        so.parameter_tolerance = 1e-12;
        so.gradient_tolerance = 1e-20;
        so.logging_type = ceres::SILENT;
        ceres::Solver::Summary summary;
        ceres::Solve(so, &problem, &summary);
        total_iterations += static_cast<int>(summary.iterations.size());

        const Mat4 x = normalized_gram<4>(t);
        const double v = trace_preservation_residual(x).cwiseAbs().maxCoeff();
        ProcessReconstruction rep;
        rep.chi = ProcessMatrix::from_matrix(x, v <= tolerance::trace_preserving);
        rep.params = t;
        rep.tp_residual = v;
        rep.cost = deconvolution_cost(total, fiber, rep.chi);
        const bool tp_ok = !opt.trace_preserving || v <= opt.tp_tolerance;
        rep.converged = summary.IsSolutionUsable() && tp_ok && rep.cost <= opt.cost_threshold;
        if (!best || key(rep) < key(*best)) best = rep;
        return tp_ok;
    };
    for (int restart = 0; restart < std::max(1, opt.restarts); ++restart) {
        const TriangularParams t = restart == 0 ? params_from_psd<4>(total.matrix()) : detail::random_params<4>(rng);
        if (!run(t) && opt.trace_preserving) weight *= opt.tp_weight_growth;
    }
    const Eigen::SelfAdjointEigenSolver<Mat4> es(best->chi.matrix());
    for (int rank = 1; rank <= 3 && best->cost > 1e-3 * opt.cost_threshold; ++rank) {
        Mat4 x = Mat4::Zero();
        for (int k = 4 - rank; k < 4; ++k) {
            const Vec4 v = es.eigenvectors().col(k);
            x += std::max(es.eigenvalues()(k), 0.0) * v * v.adjoint();
        }
        if (!(x.trace().real() > 0.0)) continue;
        run(params_from_psd<4>(Mat4(x / x.trace().real()), 1e-12));
    }
    best->iterations = total_iterations;
    if (opt.target) best->fidelity_to_target = process_fidelity(best->chi, *opt.target);
    return *best;
}

}  // namespace polrouter
