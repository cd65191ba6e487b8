#pragma once

// Small dense complex linear algebra and qubit quantum-information metrics.
//
// Conventions used throughout the library:
//  * Pauli order is (I, X, Y, Z); process matrices are expanded on these
//    unnormalized Paulis, rho_out = sum_ij chi_ij s_i rho s_j^dagger, and
//    chi is stored with unit trace.
//  * Jones vectors are written on (H, V).  Circular states are the s_Y
//    eigenstates R = (H - iV)/sqrt2 and L = (H + iV)/sqrt2.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "polrouter/errors.hpp"

namespace polrouter {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec2 = Eigen::Vector2cd;
using Vec4 = Eigen::Vector4cd;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

// The tolerance ladder.  Every invariant check in the library reads from here.
namespace tolerance {
inline constexpr double construction = 1e-12;      // states, unitarity, equality
inline constexpr double psd = 1e-10;               // Hermiticity / positivity of chi
inline constexpr double trace_preserving = 1e-8;   // sum chi_ij s_j s_i = I
}  // namespace tolerance

template <typename A, typename B>
bool approx_equal(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                  double tol = tolerance::construction) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return (a - b).cwiseAbs().maxCoeff() <= tol;
}

template <typename Derived>
double hermiticity_error(const Eigen::MatrixBase<Derived>& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Labels

enum class Pauli { I = 0, X = 1, Y = 2, Z = 3 };

inline constexpr std::array<Pauli, 4> kPaulis{Pauli::I, Pauli::X, Pauli::Y, Pauli::Z};

inline Pauli pauli_from_label(char label) {
    switch (label) {
        case 'I': return Pauli::I;
        case 'X': return Pauli::X;
        case 'Y': return Pauli::Y;
        case 'Z': return Pauli::Z;
        default: throw UsageError(std::string("invalid Pauli label '") + label + "'");
    }
}

inline char to_char(Pauli p) { return "IXYZ"[static_cast<int>(p)]; }

inline Mat2 pauli(Pauli p) {
    const cplx i{0.0, 1.0};
    Mat2 m;
    switch (p) {
        case Pauli::I: m << 1, 0, 0, 1; break;
        case Pauli::X: m << 0, 1, 1, 0; break;
        case Pauli::Y: m << 0, -i, i, 0; break;
        case Pauli::Z: m << 1, 0, 0, -1; break;
    }
    return m;
}

inline Mat2 pauli(char label) { return pauli(pauli_from_label(label)); }
inline Mat2 pauli(int index) {
    if (index < 0 || index > 3) throw UsageError("Pauli index out of range");
    return pauli(static_cast<Pauli>(index));
}

/// Coefficients c with m = sum_i c_i s_i.
inline Vec4 pauli_coefficients(const Mat2& m) {
    Vec4 c;
    for (int k = 0; k < 4; ++k) c(k) = (pauli(k) * m).trace() / 2.0;
    return c;
}

enum class PolLabel { H, V, D, A, R, L };

inline constexpr std::array<PolLabel, 6> kFiducialLabels{
    PolLabel::H, PolLabel::V, PolLabel::D, PolLabel::A, PolLabel::R, PolLabel::L};

inline PolLabel pol_label_from_char(char c) {
    switch (c) {
        case 'H': return PolLabel::H;
        case 'V': return PolLabel::V;
        case 'D': return PolLabel::D;
        case 'A': return PolLabel::A;
        case 'R': return PolLabel::R;
        case 'L': return PolLabel::L;
        default: throw UsageError(std::string("invalid polarization label '") + c + "'");
    }
}

inline PolLabel pol_label_from_string(std::string_view s) {
    if (s.size() != 1) throw UsageError("invalid polarization label '" + std::string(s) + "'");
    return pol_label_from_char(s.front());
}

inline char to_char(PolLabel p) { return "HVDARL"[static_cast<int>(p)]; }

// ---------------------------------------------------------------------------
// States

class JonesVector {
public:
    static JonesVector normalize(cplx h, cplx v) {
        const double n = std::sqrt(std::norm(h) + std::norm(v));
        if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("cannot normalize a zero Jones vector");
        return JonesVector(Vec2(h / n, v / n));
    }
    static JonesVector normalize(const Vec2& a) { return normalize(a(0), a(1)); }

    cplx h() const { return amp_(0); }
    cplx v() const { return amp_(1); }
    const Vec2& vector() const { return amp_; }

    /// <this|other>
    cplx inner(const JonesVector& other) const { return amp_.dot(other.amp_); }
    Mat2 projector() const { return amp_ * amp_.adjoint(); }

private:
    explicit JonesVector(const Vec2& a) : amp_(a) {}
    Vec2 amp_;
};

inline JonesVector state_from_label(PolLabel label) {
    const double s = 1.0 / std::sqrt(2.0);
    const cplx i{0.0, 1.0};
    switch (label) {
        case PolLabel::H: return JonesVector::normalize(1.0, 0.0);
        case PolLabel::V: return JonesVector::normalize(0.0, 1.0);
        case PolLabel::D: return JonesVector::normalize(s, s);
        case PolLabel::A: return JonesVector::normalize(s, -s);
        case PolLabel::R: return JonesVector::normalize(s, -i * s);
        case PolLabel::L: return JonesVector::normalize(s, i * s);
    }
    throw UsageError("invalid polarization label");
}

inline JonesVector state_from_label(char label) { return state_from_label(pol_label_from_char(label)); }

class DensityMatrix2 {
public:
    static DensityMatrix2 from_matrix(const Mat2& m, double tol = tolerance::construction) {
        if (hermiticity_error(m) > tol) throw DomainError("density matrix is not Hermitian");
        const Mat2 h = (m + m.adjoint()) / 2.0;
        if (std::abs(h.trace().real() - 1.0) > tol) throw DomainError("density matrix trace is not 1");
        Eigen::SelfAdjointEigenSolver<Mat2> es(h, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol) throw DomainError("density matrix is not positive semidefinite");
        return DensityMatrix2(h);
    }
    static DensityMatrix2 pure(const JonesVector& psi) { return DensityMatrix2(psi.projector()); }
    static DensityMatrix2 from_label(PolLabel l) { return pure(state_from_label(l)); }
    static DensityMatrix2 maximally_mixed() { return DensityMatrix2(Mat2::Identity() / 2.0); }

    const Mat2& matrix() const { return m_; }
    cplx operator()(int r, int c) const { return m_(r, c); }

private:
    explicit DensityMatrix2(const Mat2& m) : m_(m) {}
    Mat2 m_;
};

// ---------------------------------------------------------------------------
// Process matrices

/// sum_ij chi_ij s_j^dagger s_i - I.  Zero iff the channel is trace preserving.
inline Mat2 trace_preservation_residual(const Mat4& chi) {
    Mat2 r = -Mat2::Identity();
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) r += chi(a, b) * pauli(b) * pauli(a);
    return r;
}

class ProcessMatrix {
public:
    static ProcessMatrix from_matrix(const Mat4& chi, bool trace_preserving = false) {
        if (hermiticity_error(chi) > tolerance::psd) throw DomainError("process matrix is not Hermitian");
        const Mat4 h = (chi + chi.adjoint()) / 2.0;
        if (std::abs(h.trace().real() - 1.0) > tolerance::psd) throw DomainError("process matrix trace is not 1");
        Eigen::SelfAdjointEigenSolver<Mat4> es(h, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tolerance::psd)
            throw DomainError("process matrix is not positive semidefinite");
        if (trace_preserving &&
            trace_preservation_residual(h).cwiseAbs().maxCoeff() > tolerance::trace_preserving)
            throw DomainError("process matrix flagged trace preserving but is not");
        return ProcessMatrix(h, trace_preserving);
    }

    /// Normalizes an arbitrary nonzero PSD matrix to unit trace first.
    static ProcessMatrix normalized(const Mat4& chi, bool trace_preserving = false) {
        const double t = chi.trace().real();
        if (!(t > 0.0)) throw DomainError("process matrix has non-positive trace");
        return from_matrix(chi / t, trace_preserving);
    }

    static ProcessMatrix identity() {
        Mat4 m = Mat4::Zero();
        m(0, 0) = 1.0;
        return ProcessMatrix(m, true);
    }

    static ProcessMatrix pauli_channel(Pauli p) {
        Mat4 m = Mat4::Zero();
        m(static_cast<int>(p), static_cast<int>(p)) = 1.0;
        return ProcessMatrix(m, true);
    }

    static ProcessMatrix depolarizing() { return ProcessMatrix(Mat4::Identity() / 4.0, true); }

    /// Channel rho -> sum_k K rho K^dagger, rescaled to unit trace.
    template <typename Range>
    static ProcessMatrix from_kraus(const Range& kraus) {
        Mat4 m = Mat4::Zero();
        for (const Mat2& k : kraus) {
            const Vec4 c = pauli_coefficients(k);
            m += c * c.adjoint();
        }
        const double t = m.trace().real();
        if (!(t > 0.0)) throw DomainError("Kraus operators are all zero");
        m /= t;
        const bool tp = trace_preservation_residual(m).cwiseAbs().maxCoeff() <= tolerance::trace_preserving;
        return ProcessMatrix((m + m.adjoint()) / 2.0, tp);
    }

    static ProcessMatrix from_unitary(const Mat2& u) { return from_kraus(std::array<Mat2, 1>{u}); }

    const Mat4& matrix() const { return chi_; }
    cplx operator()(int i, int j) const { return chi_(i, j); }
    cplx element(Pauli i, Pauli j) const { return chi_(static_cast<int>(i), static_cast<int>(j)); }
    bool flagged_trace_preserving() const { return tp_; }

    Mat2 tp_residual() const { return trace_preservation_residual(chi_); }
    double tp_violation() const { return tp_residual().cwiseAbs().maxCoeff(); }

private:
    ProcessMatrix(const Mat4& m, bool tp) : chi_(m), tp_(tp) {}
    Mat4 chi_;
    bool tp_;
};

// ---------------------------------------------------------------------------
// Matrix functions and metrics

/// Principal square root of a Hermitian PSD matrix.  Eigenvalues in (-tol, 0)
/// are clipped; eigenvalues at rounding level relative to the spectrum are
/// treated as exact zeros so that rank-deficient inputs stay rank-deficient.
template <typename Derived>
typename Derived::PlainObject matrix_sqrt_psd(const Eigen::MatrixBase<Derived>& m, double tol = tolerance::psd) {
    using Plain = typename Derived::PlainObject;
    if (m.rows() != m.cols()) throw DomainError("matrix_sqrt_psd needs a square matrix");
    if (hermiticity_error(m) > tol) throw DomainError("matrix_sqrt_psd: input is not Hermitian");
    const Plain h = (m + m.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Plain> es(h);
    auto lambda = es.eigenvalues().eval();
    if (lambda.minCoeff() < -tol) throw DomainError("matrix_sqrt_psd: input has a negative eigenvalue");
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                         std::max(1.0, lambda.cwiseAbs().maxCoeff());
    for (Eigen::Index k = 0; k < lambda.size(); ++k) lambda(k) = lambda(k) <= noise ? 0.0 : std::sqrt(lambda(k));
    const auto& v = es.eigenvectors();
    return v * lambda.asDiagonal() * v.adjoint();
}

/// Largest singular value.
template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<typename Derived::PlainObject> svd(m.eval());
    return svd.singularValues()(0);
}

namespace detail {
// [Tr sqrt(sqrt(a) b sqrt(a))]^2, computed as the squared trace norm of sqrt(a) sqrt(b).
template <typename M>
double uhlmann(const M& a, const M& b) {
    const M sa = matrix_sqrt_psd(a);
    const M sb = matrix_sqrt_psd(b);
    Eigen::JacobiSVD<M> svd(sa * sb);
    const double t = svd.singularValues().sum();
    return std::clamp(t * t, 0.0, 1.0);
}
}  // namespace detail

inline double process_fidelity(const ProcessMatrix& a, const ProcessMatrix& b) {
    return detail::uhlmann<Mat4>(a.matrix(), b.matrix());
}

inline double state_fidelity(const DensityMatrix2& a, const DensityMatrix2& b) {
    return detail::uhlmann<Mat2>(a.matrix(), b.matrix());
}

}  // namespace polrouter
