#pragma once

// Single-qubit state and process tomography by maximum likelihood over a
// Cholesky (lower-triangular) parametrization.

#include <ceres/ceres.h>

#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "polrouter/polmath.hpp"
#include "polrouter/random.hpp"

namespace polrouter {

// ---------------------------------------------------------------------------
// Parametrization

/// t[0..d-1] is the real diagonal of T; the rest are (re, im) pairs of the
/// strictly lower entries in row order (1,0), (2,0), (2,1), (3,0), ...
template <int D>
using CholeskyParams = std::array<double, D * D>;

using TriangularParams = CholeskyParams<4>;

template <int D>
Eigen::Matrix<cplx, D, D> lower_triangular(const CholeskyParams<D>& t) {
    Eigen::Matrix<cplx, D, D> m = Eigen::Matrix<cplx, D, D>::Zero();
    for (int k = 0; k < D; ++k) m(k, k) = t[k];
    int p = D;
    for (int i = 1; i < D; ++i)
        for (int j = 0; j < i; ++j, p += 2) m(i, j) = cplx(t[p], t[p + 1]);
    return m;
}

/// Inverse of lower_triangular for a lower-triangular T with real diagonal.
template <int D>
CholeskyParams<D> params_from_lower(const Eigen::Matrix<cplx, D, D>& m) {
    CholeskyParams<D> t{};
    for (int k = 0; k < D; ++k) t[k] = m(k, k).real();
    int p = D;
    for (int i = 1; i < D; ++i)
        for (int j = 0; j < i; ++j, p += 2) {
            t[p] = m(i, j).real();
            t[p + 1] = m(i, j).imag();
        }
    return t;
}

/// Parameters whose T^dagger T is proportional to the given PSD matrix.  A
/// small multiple of the identity keeps the factorization well defined.
template <int D>
CholeskyParams<D> params_from_psd(const Eigen::Matrix<cplx, D, D>& x, double floor = 1e-6) {
    using M = Eigen::Matrix<cplx, D, D>;
    const M h = (x + x.adjoint()) / 2.0 + floor * M::Identity();
    // X = L L^dagger with L lower.  We need X = T^dagger T with T lower, so
    // factor the index-reversed matrix.
    M p = M::Zero();
    for (int i = 0; i < D; ++i) p(i, D - 1 - i) = 1.0;
    Eigen::LLT<M> llt(p * h * p);
    if (llt.info() != Eigen::Success) throw DomainError("matrix is not positive definite");
    const M l = llt.matrixL();
    const M t = (p * l * p).adjoint();
    // Rotate each row so the diagonal is real and positive.
    M fixed = t;
    for (int i = 0; i < D; ++i) {
        const cplx d = t(i, i);
        if (std::abs(d) > 0.0) fixed.row(i) *= std::conj(d) / std::abs(d);
    }
    return params_from_lower<D>(fixed);
}

template <int D>
Eigen::Matrix<cplx, D, D> normalized_gram(const CholeskyParams<D>& t) {
    const auto m = lower_triangular<D>(t);
    Eigen::Matrix<cplx, D, D> g = m.adjoint() * m;
    const double a = g.trace().real();
    if (!(a > 0.0)) throw DomainError("degenerate parametrization: all parameters are zero");
    g /= a;
    return (g + g.adjoint()) / 2.0;
}

inline ProcessMatrix chi_from_params(const TriangularParams& t) {
    const Mat4 chi = normalized_gram<4>(t);
    const bool tp = trace_preservation_residual(chi).cwiseAbs().maxCoeff() <= tolerance::trace_preserving;
    return ProcessMatrix::from_matrix(chi, tp);
}

namespace detail {
/// Gradient with respect to t of a function f(X), X = T^dagger T / tr, given
/// G with df = Re Tr(G dX).
template <int D>
CholeskyParams<D> chain_to_params(const CholeskyParams<D>& t, const Eigen::Matrix<cplx, D, D>& g,
                                  bool normalized = true) {
    using M = Eigen::Matrix<cplx, D, D>;
    const M tm = lower_triangular<D>(t);
    const M a_mat = tm.adjoint() * tm;
    const double a = normalized ? a_mat.trace().real() : 1.0;
    const double s = normalized ? (g * a_mat).trace().real() / a : 0.0;
    const M gp = (g - s * M::Identity()) / a;
    const M m = gp * tm.adjoint();
    CholeskyParams<D> out{};
    // df = 2 Re Tr(M dT)
    for (int k = 0; k < D; ++k) out[k] = 2.0 * m(k, k).real();
    int p = D;
    for (int i = 1; i < D; ++i)
        for (int j = 0; j < i; ++j, p += 2) {
            out[p] = 2.0 * m(j, i).real();
            out[p + 1] = -2.0 * m(j, i).imag();
        }
    return out;
}

/// Pins the overall scale of T (which X ignores) at tr(T^dagger T) = 1.
inline constexpr double kScalePin = 1e-3;

template <int D>
double scale_pin(const CholeskyParams<D>& t, double* grad) {
    double a = 0.0;
    for (double x : t) a += x * x;
    if (grad)
        for (int k = 0; k < D * D; ++k) grad[k] += kScalePin * 2.0 * (a - 1.0) * 2.0 * t[k];
    return kScalePin * (a - 1.0) * (a - 1.0);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Channel action

inline Mat2 apply_process_raw(const Mat4& chi, const Mat2& rho) {
    Mat2 out = Mat2::Zero();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (chi(i, j) != 0.0) out += chi(i, j) * pauli(i) * rho * pauli(j).adjoint();
    return out;
}

/// Receives non-fatal diagnostics.  Defaults to stderr.
inline std::function<void(std::string_view)>& warning_handler() {
    static std::function<void(std::string_view)> h = [](std::string_view m) { std::cerr << "warning: " << m << '\n'; };
    return h;
}

/// rho -> sum_ij chi_ij s_i rho s_j^dagger.  A channel that does not preserve
/// the trace raises a warning; the output is rescaled only when `renormalize`
/// is set, otherwise the call fails.
inline DensityMatrix2 apply_process(const ProcessMatrix& chi, const DensityMatrix2& rho, bool renormalize = false) {
    Mat2 out = apply_process_raw(chi.matrix(), rho.matrix());
    const double tr = out.trace().real();
    if (std::abs(tr - 1.0) > 1e-10) {
        std::ostringstream os;
        os << "process is not trace preserving on this input (output trace " << tr << ")";
        warning_handler()(os.str());
        if (!renormalize) throw DomainError(os.str());
        if (!(tr > 0.0)) throw DomainError("process output has no weight");
        out /= tr;
    }
    return DensityMatrix2::from_matrix(out, tolerance::psd);
}

/// chi of rho -> outer(inner(rho)).
inline ProcessMatrix compose_processes(const ProcessMatrix& outer, const ProcessMatrix& inner) {
    // s_m s_i = sum_p c[m][i][p] s_p
    std::array<std::array<Vec4, 4>, 4> c;
    for (int m = 0; m < 4; ++m)
        for (int i = 0; i < 4; ++i) c[m][i] = pauli_coefficients(pauli(m) * pauli(i));
    const Mat4& f = outer.matrix();
    const Mat4& r = inner.matrix();
    Mat4 t = Mat4::Zero();
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) {
            if (f(m, n) == 0.0) continue;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    const cplx w = f(m, n) * r(i, j);
                    if (w == 0.0) continue;
                    t += w * c[m][i] * c[n][j].adjoint();
                }
        }
    t = (t + t.adjoint()).eval() / 2.0;
    const bool tp = trace_preservation_residual(t).cwiseAbs().maxCoeff() <= tolerance::trace_preserving;
    return ProcessMatrix::normalized(t, tp);
}

// ---------------------------------------------------------------------------
// Data

struct TomographyRecord {
    PolLabel input = PolLabel::H;
    PolLabel projector = PolLabel::H;
    double counts = 0.0;  // integral unless produced in analytic mode
    double shots = 0.0;
};

struct TomographyDataset {
    std::vector<TomographyRecord> records;

    void validate(bool process) const {
        for (const auto& r : records) {
            if (!(r.shots > 0.0)) throw UsageError("shots must be positive");
            if (!(r.counts >= 0.0) || r.counts > r.shots) throw UsageError("counts must be in [0, shots]");
        }
        if (process) {
            std::array<bool, 36> seen{};
            for (const auto& r : records) seen[static_cast<int>(r.input) * 6 + static_cast<int>(r.projector)] = true;
            for (bool s : seen)
                if (!s) throw UsageError("process tomography needs all 36 input/projector settings");
        } else {
            std::array<bool, 6> seen{};
            for (const auto& r : records) seen[static_cast<int>(r.projector)] = true;
            for (bool s : seen)
                if (!s) throw UsageError("state tomography needs all 6 projectors");
        }
    }
};

inline void write_dataset_csv(std::ostream& os, const TomographyDataset& d) {
    os << "input_label,projector_label,counts,shots\n";
    os.precision(17);
    for (const auto& r : d.records)
        os << to_char(r.input) << ',' << to_char(r.projector) << ',' << r.counts << ',' << r.shots << '\n';
}

inline TomographyDataset read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw UsageError("dataset CSV is empty");
    if (line.rfind("input_label,projector_label,counts,shots", 0) != 0) throw UsageError("dataset CSV header mismatch");
    TomographyDataset d;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string in, pr, c, s;
        if (!std::getline(ss, in, ',') || !std::getline(ss, pr, ',') || !std::getline(ss, c, ',') || !std::getline(ss, s))
            throw UsageError("dataset CSV line " + std::to_string(lineno) + ": expected 4 fields");
        try {
            d.records.push_back({pol_label_from_string(in), pol_label_from_string(pr), std::stod(c), std::stod(s)});
        } catch (const std::invalid_argument&) {
            throw UsageError("dataset CSV line " + std::to_string(lineno) + ": bad value");
        }
    }
    return d;
}

/// Born probability of `projector` on the output of `chi` for `input`.
inline double setting_probability(const Mat4& chi, PolLabel input, PolLabel projector) {
    const Mat2 out = apply_process_raw(chi, DensityMatrix2::from_label(input).matrix());
    const Mat2 pi = DensityMatrix2::from_label(projector).matrix();
    return std::clamp((pi * out).trace().real(), 0.0, 1.0);
}

namespace detail {
inline TomographyDataset sample_settings(const std::function<double(PolLabel, PolLabel)>& prob, double shots,
                                         std::optional<std::uint64_t> seed) {
    if (!(shots > 0.0)) throw UsageError("shots per setting must be positive");
    TomographyDataset d;
    std::uint64_t index = 0;
    for (PolLabel in : kFiducialLabels)
        for (PolLabel pr : kFiducialLabels) {
            const double p = std::clamp(prob(in, pr), 0.0, 1.0);
            double n = shots * p;
            if (seed) {
                Rng rng = make_stream(*seed, index);
                std::binomial_distribution<std::int64_t> b(static_cast<std::int64_t>(shots), p);
                n = static_cast<double>(b(rng));
            }
            d.records.push_back({in, pr, n, shots});
            ++index;
        }
    return d;
}
}  // namespace detail

/// 36-setting dataset.  With no seed the counts are the exact expectations
/// (analytic mode); otherwise each setting is binomially sampled from its own
/// (seed, setting) stream.
inline TomographyDataset simulate_tomography(const ProcessMatrix& chi, double shots_per_setting,
                                             std::optional<std::uint64_t> seed) {
    const Mat4 m = chi.matrix();
    return detail::sample_settings([&](PolLabel in, PolLabel pr) { return setting_probability(m, in, pr); },
                                   shots_per_setting, seed);
}

/// Same for a conditional channel given by (unnormalized) Kraus operators:
/// probabilities are conditioned on the photon reaching the port.
inline TomographyDataset simulate_tomography(const std::vector<Mat2>& kraus, double shots_per_setting,
                                             std::optional<std::uint64_t> seed) {
    return detail::sample_settings(
        [&](PolLabel in, PolLabel pr) {
            Mat2 out = Mat2::Zero();
            const Mat2 rho = DensityMatrix2::from_label(in).matrix();
            for (const Mat2& k : kraus) out += k * rho * k.adjoint();
            const double tr = out.trace().real();
            if (!(tr > 0.0)) throw AnalysisError("no photons reach the measured port");
            return (DensityMatrix2::from_label(pr).matrix() * out).trace().real() / tr;
        },
        shots_per_setting, seed);
}

/// Six-projector dataset for one state.
inline TomographyDataset simulate_state_tomography(const DensityMatrix2& rho, double shots,
                                                   std::optional<std::uint64_t> seed) {
    TomographyDataset d;
    std::uint64_t index = 0;
    for (PolLabel pr : kFiducialLabels) {
        const double p = std::clamp((DensityMatrix2::from_label(pr).matrix() * rho.matrix()).trace().real(), 0.0, 1.0);
        double n = shots * p;
        if (seed) {
            Rng rng = make_stream(*seed, index);
            std::binomial_distribution<std::int64_t> b(static_cast<std::int64_t>(shots), p);
            n = static_cast<double>(b(rng));
        }
        d.records.push_back({PolLabel::H, pr, n, shots});
        ++index;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Maximum likelihood

struct MleOptions {
    int restarts = 8;
    int max_iterations = 5000;
    double gradient_tolerance = 1e-8;
    bool trace_preserving = true;
    // Augmented-Lagrangian schedule for the trace-preservation constraint.
    double tp_weight = 10.0;
    double tp_weight_growth = 10.0;
    double tp_weight_max = 1e8;
    double tp_tolerance = 1e-9;
    int max_outer_iterations = 30;
    std::uint64_t seed = 1;
    std::optional<ProcessMatrix> target;  // for fidelity_to_target
};

struct ProcessReconstruction {
    ProcessMatrix chi = ProcessMatrix::identity();
    TriangularParams params{};
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    double tp_residual = 0.0;  // max |entry| of sum chi_ab s_b s_a - I
    double cost = 0.0;         // deconvolution cost, sum_k spectral norm
    double mean_transmission = 1.0;  // Tr E(I/2); below 1 only in non-TP mode
    std::optional<double> fidelity_to_target;
};

struct StateReconstruction {
    DensityMatrix2 rho = DensityMatrix2::maximally_mixed();
    CholeskyParams<2> params{};
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    std::optional<double> fidelity_to_target;
};

namespace detail {
inline constexpr double kProbFloor = 1e-15;

/// One binomial term per record, p = Re sum_ab X_ab B_ab.
template <int D>
struct LikelihoodTerm {
    Eigen::Matrix<cplx, D, D> b;
    double counts;
    double shots;
};

template <int D>
struct MleObjective {
    std::vector<LikelihoodTerm<D>> terms;
    double total_shots = 1.0;
    double log_normalizer = 0.0;  // log-binomial constant so that log-likelihood is absolute
    // TP augmented Lagrangian (process only).
    bool tp = false;
    // X = T^dagger T without trace normalization, for lossy data in non-TP mode.
    bool free_scale = false;
    Mat2 lambda = Mat2::Zero();
    double weight = 0.0;

    /// Negative log-likelihood per shot.
    double nll(const Eigen::Matrix<cplx, D, D>& x, Eigen::Matrix<cplx, D, D>* g) const {
        double f = 0.0;
        if (g) g->setZero();
        for (const auto& t : terms) {
            const double p_raw = (x.cwiseProduct(t.b)).sum().real();
            const double p = std::clamp(p_raw, kProbFloor, 1.0 - kProbFloor);
            const double n = t.counts, m = t.shots - t.counts;
            if (n > 0.0) f -= n * std::log(p);
            if (m > 0.0) f -= m * std::log1p(-p);
            if (g) {
                const double w = -(n / p - m / (1.0 - p));
                *g += w * t.b.transpose();
            }
        }
        if (g) *g /= total_shots;
        return f / total_shots;
    }
};

inline Mat2 tp_residual_matrix(const Mat4& chi) { return trace_preservation_residual(chi); }

/// Gradient block from the TP term Tr(L R) + w/2 Tr(R^2): G_ba = Tr((L + w R) s_b s_a).
inline Mat4 tp_gradient(const Mat2& l_plus_wr) {
    Mat4 g;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) g(b, a) = (l_plus_wr * pauli(b) * pauli(a)).trace();
    return g;
}

template <int D>
class MleFunction final : public ceres::FirstOrderFunction {
public:
    explicit MleFunction(const MleObjective<D>* obj) : obj_(obj) {}
    int NumParameters() const override { return D * D; }
    bool Evaluate(const double* params, double* cost, double* gradient) const override {
        CholeskyParams<D> t;
        std::copy(params, params + D * D, t.begin());
        double a = 0.0;
        for (double v : t) a += v * v;
        if (!(a > 1e-300)) return false;
        using M = Eigen::Matrix<cplx, D, D>;
        const auto tm = lower_triangular<D>(t);
        M x = tm.adjoint() * tm / (obj_->free_scale ? 1.0 : a);
        x = (x + x.adjoint()).eval() / 2.0;
        M g;
        double f = obj_->nll(x, gradient ? &g : nullptr);
        if constexpr (D == 4) {
            if (obj_->tp) {
                const Mat2 r = tp_residual_matrix(x);
                f += (obj_->lambda * r).trace().real() + 0.5 * obj_->weight * (r * r).trace().real();
                if (gradient) g += tp_gradient(obj_->lambda + obj_->weight * r);
            }
        }
        if (gradient) {
            const auto gt = chain_to_params<D>(t, g, !obj_->free_scale);
            std::copy(gt.begin(), gt.end(), gradient);
        }
        if (!obj_->free_scale) f += scale_pin<D>(t, gradient);
        *cost = f;
        return std::isfinite(f);
    }

private:
    const MleObjective<D>* obj_;
};

template <int D>
struct MinimizeResult {
    CholeskyParams<D> t;
    int iterations = 0;
    bool converged = false;
};

template <int D>
MinimizeResult<D> minimize(const MleObjective<D>& obj, CholeskyParams<D> t, const MleOptions& opt) {
    ceres::GradientProblem problem(new MleFunction<D>(&obj));
    ceres::GradientProblemSolver::Options so;
    so.line_search_direction_type = ceres::BFGS;
    so.max_num_iterations = opt.max_iterations;
    so.gradient_tolerance = opt.gradient_tolerance;
    so.function_tolerance = 1e-16;
    so.parameter_tolerance = 1e-16;
    so.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(so, problem, t.data(), &summary);
    MinimizeResult<D> r;
    r.t = t;
    r.iterations = static_cast<int>(summary.iterations.size());
    r.converged = summary.termination_type == ceres::CONVERGENCE;
    return r;
}

template <int D>
CholeskyParams<D> random_params(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    CholeskyParams<D> t;
    for (double& v : t) v = n(rng);
    double a = 0.0;
    for (double v : t) a += v * v;
    for (double& v : t) v /= std::sqrt(a);
    return t;
}

template <int D>
CholeskyParams<D> maximally_mixed_params() {
    CholeskyParams<D> t{};
    for (int k = 0; k < D; ++k) t[k] = 1.0 / std::sqrt(static_cast<double>(D));
    return t;
}

inline double log_binomial_constant(const TomographyDataset& d) {
    double c = 0.0;
    for (const auto& r : d.records) c += std::lgamma(r.shots + 1.0) - std::lgamma(r.counts + 1.0) - std::lgamma(r.shots - r.counts + 1.0);
    return c;
}
}  // namespace detail

/// MLE of chi from a 36-setting dataset.  Restart 0 starts from the fully
/// depolarizing channel, the rest from random parameters.  In TP mode each
/// restart runs an augmented-Lagrangian loop on sum chi_ab s_b s_a = I.
inline ProcessReconstruction mle_process_tomography(const TomographyDataset& data, const MleOptions& opt = {}) {
    data.validate(true);
    detail::MleObjective<4> obj;
    obj.total_shots = 0.0;
    for (const auto& r : data.records) {
        const Mat2 rho = DensityMatrix2::from_label(r.input).matrix();
        const Mat2 pi = DensityMatrix2::from_label(r.projector).matrix();
        Mat4 b;
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 4; ++c) b(a, c) = (pi * pauli(a) * rho * pauli(c)).trace();
        obj.terms.push_back({b, r.counts, r.shots});
        obj.total_shots += r.shots;
    }
    obj.log_normalizer = detail::log_binomial_constant(data);
    obj.free_scale = !opt.trace_preserving;
    auto gram = [&](const TriangularParams& t) -> Mat4 {
        if (!obj.free_scale) return normalized_gram<4>(t);
        const Mat4 m = lower_triangular<4>(t);
        return m.adjoint() * m;
    };

    Rng rng = make_stream(opt.seed, 0x7e57);
    std::optional<ProcessReconstruction> best;
    double best_nll = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < std::max(1, opt.restarts); ++restart) {
        TriangularParams t = restart == 0 ? detail::maximally_mixed_params<4>() : detail::random_params<4>(rng);
        obj.tp = opt.trace_preserving;
        obj.lambda.setZero();
        obj.weight = opt.tp_weight;
        int iterations = 0;
        bool converged = false;
        double prev_violation = std::numeric_limits<double>::infinity();
        double violation = 0.0;
        for (int outer = 0; outer < (opt.trace_preserving ? opt.max_outer_iterations : 1); ++outer) {
            const auto r = detail::minimize<4>(obj, t, opt);
            t = r.t;
            iterations += r.iterations;
            if (!opt.trace_preserving) {
                converged = r.converged;
                break;
            }
            const Mat2 res = trace_preservation_residual(normalized_gram<4>(t));
            violation = res.cwiseAbs().maxCoeff();
            if (violation <= opt.tp_tolerance) {
                converged = r.converged;
                break;
            }
            obj.lambda += obj.weight * res;
            obj.lambda = (obj.lambda + obj.lambda.adjoint()).eval() / 2.0;
            if (violation > 0.25 * prev_violation) obj.weight = std::min(obj.weight * opt.tp_weight_growth, opt.tp_weight_max);
            prev_violation = violation;
        }
        const Mat4 raw = gram(t);
        obj.tp = false;
        const double nll = obj.nll(raw, nullptr);
        if (!best || nll < best_nll - 1e-15) {
            best_nll = nll;
            ProcessReconstruction rep;
            const double scale = raw.trace().real();
            const Mat4 x = normalized_gram<4>(t);
            rep.mean_transmission = scale;
            const double v = trace_preservation_residual(x).cwiseAbs().maxCoeff();
            rep.chi = ProcessMatrix::from_matrix(x, v <= tolerance::trace_preserving);
            rep.params = t;
            rep.tp_residual = v;
            rep.iterations = iterations;
            rep.converged = converged;
            rep.log_likelihood = -nll * obj.total_shots + obj.log_normalizer;
            best = rep;
        }
    }
    if (opt.target) best->fidelity_to_target = process_fidelity(best->chi, *opt.target);
    return *best;
}

/// MLE of a single-qubit state from six projector counts.
inline StateReconstruction mle_state_tomography(const TomographyDataset& data, const MleOptions& opt = {},
                                                std::optional<DensityMatrix2> target = std::nullopt) {
    data.validate(false);
    detail::MleObjective<2> obj;
    obj.total_shots = 0.0;
    for (const auto& r : data.records) {
        obj.terms.push_back({DensityMatrix2::from_label(r.projector).matrix().transpose(), r.counts, r.shots});
        obj.total_shots += r.shots;
    }
    obj.log_normalizer = detail::log_binomial_constant(data);
    Rng rng = make_stream(opt.seed, 0x57a7e);
    std::optional<StateReconstruction> best;
    double best_nll = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < std::max(1, opt.restarts); ++restart) {
        const auto start = restart == 0 ? detail::maximally_mixed_params<2>() : detail::random_params<2>(rng);
        const auto r = detail::minimize<2>(obj, start, opt);
        const Mat2 x = normalized_gram<2>(r.t);
        const double nll = obj.nll(x, nullptr);
        if (!best || nll < best_nll - 1e-15) {
            best_nll = nll;
            StateReconstruction rep;
            rep.rho = DensityMatrix2::from_matrix(x, tolerance::psd);
            rep.params = r.t;
            rep.iterations = r.iterations;
            rep.converged = r.converged;
            rep.log_likelihood = -nll * obj.total_shots + obj.log_normalizer;
            best = rep;
        }
    }
    if (target) best->fidelity_to_target = state_fidelity(best->rho, *target);
    return *best;
}

}  // namespace polrouter
