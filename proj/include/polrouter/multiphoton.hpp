#pragma once

// Two photons in linear optics.
//
// The coherent part is kept as a symmetric matrix S with
//   |psi> = sum_ij S_ij a_i^dag a_j^dag |0>,
// so a mode map a_i^dag -> sum_k T_ki a_k^dag becomes S -> T S T^T.  The
// occupation-number amplitudes are c_ij = 2 S_ij (i < j) and c_ii = sqrt(2) S_ii.
// The distinguishable part is a classical mixture of product pairs whose
// photons never interfere with each other.

#include <cmath>
#include <optional>
#include <vector>

#include "polrouter/elements.hpp"
#include "polrouter/fit.hpp"
#include "polrouter/router.hpp"

namespace polrouter {

/// Mode index of (path, pol) in a 4-mode block; extra spatial blocks repeat it.
inline constexpr int kModesPerBlock = 4;

struct ProductPair {
    double weight = 0.0;
    Eigen::VectorXcd first;   // single-photon amplitudes over modes
    Eigen::VectorXcd second;
};

/// Which classical pair stands in for the fully distinguishable fraction.
enum class DistinguishableModel {
    // Photons with no polarization correlation: the pair is unpolarized, so
    // its analyzer coincidence rate is flat and V2 equals mu.
    Unpolarized,
    // An H photon and a V photon that cannot interfere.  The analyzer then
    // sees a residual fringe and V2 = (1 + mu) / (3 - mu).
    CrossPolarized,
};

class TwoPhotonState {
public:
    TwoPhotonState() = default;

    static int basis_size(int modes) { return modes * (modes + 1) / 2; }

    /// (i, j) with i <= j for basis index k, lexicographic order.
    static std::pair<int, int> basis_pair(int modes, int k) {
        for (int i = 0; i < modes; ++i)
            for (int j = i; j < modes; ++j)
                if (k-- == 0) return {i, j};
        throw UsageError("basis index out of range");
    }

    static int basis_index(int modes, int i, int j) {
        if (i > j) std::swap(i, j);
        if (i < 0 || j >= modes) throw UsageError("mode index out of range");
        return i * modes - i * (i - 1) / 2 + (j - i);
    }

    /// From occupation-number amplitudes and a distinguishable mixture.
    static TwoPhotonState from_amplitudes(const Eigen::VectorXcd& c, int modes = kModesPerBlock,
                                          std::vector<ProductPair> classical = {}) {
        if (c.size() != basis_size(modes)) throw UsageError("amplitude vector has the wrong length");
        ComplexMatrix s = ComplexMatrix::Zero(modes, modes);
        for (int k = 0; k < c.size(); ++k) {
            const auto [i, j] = basis_pair(modes, k);
            if (i == j) {
                s(i, i) = c(k) / std::sqrt(2.0);
            } else {
                s(i, j) = c(k) / 2.0;
                s(j, i) = c(k) / 2.0;
            }
        }
        return TwoPhotonState(std::move(s), std::move(classical));
    }

    static TwoPhotonState from_symmetric(ComplexMatrix s, std::vector<ProductPair> classical = {}) {
        if (s.rows() != s.cols()) throw UsageError("coefficient matrix must be square");
        if (!approx_equal(s, s.transpose(), 1e-12)) throw UsageError("coefficient matrix must be symmetric");
        return TwoPhotonState(std::move(s), std::move(classical));
    }

    int modes() const { return static_cast<int>(s_.rows()); }
    const ComplexMatrix& symmetric() const { return s_; }
    const std::vector<ProductPair>& classical() const { return classical_; }

    Eigen::VectorXcd amplitudes() const {
        const int n = modes();
        Eigen::VectorXcd c(basis_size(n));
        for (int k = 0; k < c.size(); ++k) {
            const auto [i, j] = basis_pair(n, k);
            c(k) = i == j ? std::sqrt(2.0) * s_(i, i) : 2.0 * s_(i, j);
        }
        return c;
    }

    double coherent_norm() const { return amplitudes().squaredNorm(); }

    double classical_weight() const {
        double w = 0.0;
        for (const auto& p : classical_) w += p.weight * p.first.squaredNorm() * p.second.squaredNorm();
        return w;
    }

    /// Probability that both photons are still present.
    double norm() const { return coherent_norm() + classical_weight(); }

    /// Probability of one photon in mode a and one in mode b.
    double pair_probability(int a, int b) const {
        if (a == b) {
            double p = std::norm(std::sqrt(2.0) * s_(a, a));
            for (const auto& c : classical_) p += c.weight * std::norm(c.first(a)) * std::norm(c.second(a));
            return p;
        }
        double p = std::norm(2.0 * s_(a, b));
        for (const auto& c : classical_)
            p += c.weight * (std::norm(c.first(a)) * std::norm(c.second(b)) + std::norm(c.first(b)) * std::norm(c.second(a)));
        return p;
    }

    /// Mean photon number in mode m.
    double occupation(int m) const {
        double n = 0.0;
        for (int j = 0; j < modes(); ++j) n += pair_probability(m, j) * (j == m ? 2.0 : 1.0);
        return n;
    }

private:
    TwoPhotonState(ComplexMatrix s, std::vector<ProductPair> classical) : s_(std::move(s)), classical_(std::move(classical)) {
        for (const auto& p : classical_) {
            if (p.first.size() != s_.rows() || p.second.size() != s_.rows())
                throw UsageError("classical pair does not match the mode count");
            if (!(p.weight >= 0.0)) throw UsageError("classical weight must be non-negative");
        }
    }

    ComplexMatrix s_ = ComplexMatrix::Zero(kModesPerBlock, kModesPerBlock);
    std::vector<ProductPair> classical_;
};

namespace detail {
inline void check_mu(double mu) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw UsageError("indistinguishability must be in [0,1]");
}

inline Eigen::VectorXcd single_mode(int modes, int m) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(modes);
    v(m) = 1.0;
    return v;
}

inline Eigen::VectorXcd pol_in_path(int path, const Vec2& jones) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(kModesPerBlock);
    v.segment<2>(2 * (path - 1)) = jones;
    return v;
}

inline std::vector<ProductPair> distinguishable_pair(double weight, int path, DistinguishableModel model) {
    if (weight <= 0.0) return {};
    const Vec2 h = state_from_label(PolLabel::H).vector();
    const Vec2 v = state_from_label(PolLabel::V).vector();
    if (model == DistinguishableModel::CrossPolarized) return {{weight, pol_in_path(path, h), pol_in_path(path, v)}};
    std::vector<ProductPair> out;
    for (const Vec2& a : {h, v})
        for (const Vec2& b : {h, v}) out.push_back({weight / 4.0, pol_in_path(path, a), pol_in_path(path, b)});
    return out;
}
}  // namespace detail

/// One H and one V photon in `path`; a fraction 1 - mu is distinguishable.
inline TwoPhotonState spdc_pair_state(double mu, int path = 1,
                                      DistinguishableModel model = DistinguishableModel::Unpolarized) {
    detail::check_mu(mu);
    if (path != 1 && path != 2) throw UsageError("path must be 1 or 2");
    ComplexMatrix s = ComplexMatrix::Zero(kModesPerBlock, kModesPerBlock);
    const int h = mode_index(path, Polarization::H), v = mode_index(path, Polarization::V);
    s(h, v) = s(v, h) = 0.5 * std::sqrt(mu);
    return TwoPhotonState::from_symmetric(s, detail::distinguishable_pair(1.0 - mu, path, model));
}

/// The same pair viewed as a diagonal N00N state: a_H a_V = (a_D^2 - a_A^2)/2,
/// i.e. (|2_D> - |2_A>)/sqrt(2).
inline TwoPhotonState noon_state(double mu, int path = 1,
                                 DistinguishableModel model = DistinguishableModel::Unpolarized) {
    return spdc_pair_state(mu, path, model);
}

struct DiagonalAmplitudes {
    cplx two_d;    // |2_D, 0_A>
    cplx two_a;    // |0_D, 2_A>
    cplx one_one;  // |1_D, 1_A>
};

/// Coherent amplitudes of `path` re-expressed in the D/A basis.
inline DiagonalAmplitudes diagonal_view(const TwoPhotonState& st, int path = 1) {
    if (st.modes() != kModesPerBlock) throw UsageError("diagonal view needs a 4-mode state");
    // D = (H + V)/sqrt2, A = (H - V)/sqrt2; the coefficient matrix transforms
    // with the inverse (here equal) basis change.
    Mat2 b;
    b << 1.0, 1.0, 1.0, -1.0;
    b /= std::sqrt(2.0);
    const int o = 2 * (path - 1);
    const Mat2 s = st.symmetric().block<2, 2>(o, o);
    const Mat2 sd = b.transpose() * s * b;
    return {std::sqrt(2.0) * sd(0, 0), std::sqrt(2.0) * sd(1, 1), 2.0 * sd(0, 1)};
}

/// Evolves both components through a linear mode map (rows: output modes).
inline TwoPhotonState apply_linear_map(const TwoPhotonState& st, const ComplexMatrix& t) {
    if (t.cols() != st.modes()) throw UsageError("mode map does not match the state");
    Eigen::JacobiSVD<ComplexMatrix> svd(t);
    if (svd.singularValues()(0) > 1.0 + tolerance::construction) throw DomainError("mode map has gain");
    ComplexMatrix s = t * st.symmetric() * t.transpose();
    s = 0.5 * (s + s.transpose()).eval();
    std::vector<ProductPair> cl;
    cl.reserve(st.classical().size());
    for (const auto& p : st.classical()) cl.push_back({p.weight, t * p.first, t * p.second});
    return TwoPhotonState::from_symmetric(std::move(s), std::move(cl));
}

inline TwoPhotonState apply_mode_transform(const TwoPhotonState& st, const ModeTransfer& t) {
    return apply_linear_map(st, t.matrix());
}

/// Router map for two photons with partial arm mode overlap.  Each output
/// (port, pol) mode is split into a shared spatial mode and one residual mode
/// per arm, so the output has 12 modes in blocks of 4:
///   [shared | arm-1 residual | arm-2 residual].
inline ComplexMatrix router_mode_map(const RouterConfig& cfg, double voltage, double t_hours = 0.0) {
    const auto [v1, v2] = detail::split_voltage(cfg, voltage);
    const auto arms = detail::arm_transfers(cfg, v1, v2, t_hours);
    const double mu = effective_mode_overlap(cfg, v1, v2);
    ComplexMatrix m = ComplexMatrix::Zero(3 * kModesPerBlock, kModesPerBlock);
    m.block<4, 4>(0, 0) = std::sqrt(mu) * (arms.arm1 + arms.arm2);
    m.block<4, 4>(4, 0) = std::sqrt(1.0 - mu) * arms.arm1;
    m.block<4, 4>(8, 0) = std::sqrt(1.0 - mu) * arms.arm2;
    return m;
}

inline TwoPhotonState route_two_photon(const RouterConfig& cfg, const TwoPhotonState& st, double voltage,
                                       double t_hours = 0.0) {
    if (st.modes() != kModesPerBlock) throw UsageError("router input must be a 4-mode state");
    return apply_linear_map(st, router_mode_map(cfg, voltage, t_hours));
}

struct FringePoint {
    double angle = 0.0;  // HWP axis angle, rad
    double rate = 0.0;   // coincidence probability
};

using FringeScan = std::vector<FringePoint>;

/// HWP in front of a PBS at one output port.  The PBS sends H and V to two
/// detectors that do not resolve the spatial blocks.
struct Analyzer {
    int port = 1;
};

inline FringeScan coincidence_fringe(const TwoPhotonState& st, const std::vector<double>& angles,
                                     const Analyzer& an = {}) {
    if (an.port != 1 && an.port != 2) throw UsageError("analyzer port must be 1 or 2");
    if (st.modes() % kModesPerBlock != 0) throw UsageError("state modes must come in blocks of 4");
    const int blocks = st.modes() / kModesPerBlock;
    const int h = mode_index(an.port, Polarization::H);
    const int v = mode_index(an.port, Polarization::V);
    FringeScan scan;
    scan.reserve(angles.size());
    for (double th : angles) {
        ComplexMatrix w = ComplexMatrix::Identity(st.modes(), st.modes());
        const Mat2 hwp = waveplate_jones(half_wave_plate(th));
        for (int b = 0; b < blocks; ++b) w.block<2, 2>(b * kModesPerBlock + h, b * kModesPerBlock + h) = hwp;
        const TwoPhotonState out = apply_linear_map(st, w);
        double p = 0.0;
        for (int bh = 0; bh < blocks; ++bh)
            for (int bv = 0; bv < blocks; ++bv)
                p += out.pair_probability(bh * kModesPerBlock + h, bv * kModesPerBlock + v);
        scan.push_back({th, std::max(p, 0.0)});
    }
    return scan;
}

struct FringeVisibility {
    double v2 = 0.0;
    SinusoidFit fit;
};

/// V2 from a fit of A (1 - V cos(w theta + phi0)).  The frequency is seeded
/// from the scan's periodogram unless `omega_seed` is given.
inline FringeVisibility fringe_visibility(const FringeScan& scan, std::optional<double> omega_seed = std::nullopt,
                                          const std::vector<double>& sigma = {}) {
    if (!sigma.empty() && sigma.size() != scan.size()) throw UsageError("sigma must match the scan length");
    std::vector<FitPoint> pts;
    pts.reserve(scan.size());
    for (std::size_t i = 0; i < scan.size(); ++i)
        pts.push_back({scan[i].angle, scan[i].rate, sigma.empty() ? 0.0 : sigma[i]});
    SinusoidFitOptions opt;
    opt.omega_seed = omega_seed;
    FringeVisibility r;
    r.fit = sinusoid_fit(pts, opt);
    r.v2 = r.fit.visibility;
    return r;
}

}  // namespace polrouter
