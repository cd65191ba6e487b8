#pragma once

// Semi-common-path Mach-Zehnder router as a 4-mode transfer matrix.
//
// Mode order is (path1 H, path1 V, path2 H, path2 V).  Input port 1 feeds
// path 1 of the input splitter; at zero differential phase an input-1 photon
// leaves from output port 2.  Each arm holds one EOM and one mirror.  Output
// port 1 leaves through one more reflection than port 2, so after the arm
// mirror only port 2 carries a net pi phase on H.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polrouter/elements.hpp"
#include "polrouter/polmath.hpp"

namespace polrouter {

inline constexpr double kNominalHalfWaveVoltage = 960.0;

struct Imperfections {
    double misalignment = 0.0;  // rad, applied to both EOMs
    double mode_overlap = 1.0;
    double field_distortion = 0.0;  // fractional overlap loss at a full U_pi arm voltage difference
};

struct RouterConfig {
    BsConfig bs_in;
    BsConfig bs_out;
    EomConfig eom1;
    EomConfig eom2;
    double mirror_loss = 0.0;  // per arm mirror
    bool push_pull = true;
    double mode_overlap = 1.0;  // inter-arm coherence with no voltage applied
    // Field-induced wavefront distortion: the coherence is scaled by
    // 1 - field_distortion * ((v1 - v2) / U_pi)^2.
    double field_distortion = 0.0;
    double phase_offset = 0.0;  // rad, static arm imbalance (arm 1 relative to arm 2)
    double drift_rate = 0.0;    // rad/hour added to phase_offset
    // With the EOMs idle no voltage is applied and `idle` replaces the
    // crystal misalignment and mode overlap.
    bool eoms_active = true;
    Imperfections idle{};

    void validate() const {
        bs_in.validate();
        bs_out.validate();
        eom1.validate();
        eom2.validate();
        if (!(mirror_loss >= 0.0 && mirror_loss < 1.0)) throw ConfigurationError("mirror loss must be in [0,1)");
        if (!(mode_overlap >= 0.0 && mode_overlap <= 1.0)) throw ConfigurationError("mode overlap must be in [0,1]");
        if (!(field_distortion >= 0.0 && field_distortion <= 1.0))
            throw ConfigurationError("field distortion must be in [0,1]");
        if (!(idle.mode_overlap >= 0.0 && idle.mode_overlap <= 1.0))
            throw ConfigurationError("idle mode overlap must be in [0,1]");
        if (!(std::abs(idle.misalignment) < 0.1)) throw ConfigurationError("idle misalignment must satisfy |eps| < 0.1");
        if (!std::isfinite(phase_offset) || !std::isfinite(drift_rate))
            throw ConfigurationError("phase offset and drift rate must be finite");
    }

    /// The configuration actually seen by photons, with the idle set substituted.
    RouterConfig effective() const {
        RouterConfig e = *this;
        if (!eoms_active) {
            e.eom1.misalignment = idle.misalignment;
            e.eom2.misalignment = idle.misalignment;
            e.mode_overlap = idle.mode_overlap;
            e.field_distortion = idle.field_distortion;
        }
        return e;
    }

    void set_imperfections(const Imperfections& imp) {
        eom1.misalignment = imp.misalignment;
        eom2.misalignment = imp.misalignment;
        mode_overlap = imp.mode_overlap;
        field_distortion = imp.field_distortion;
    }

    Imperfections imperfections() const { return {eom1.misalignment, mode_overlap, field_distortion}; }
};

/// Lossless, perfectly aligned router switching at `u_pi`.
inline RouterConfig ideal_router_config(double u_pi = kNominalHalfWaveVoltage) {
    RouterConfig cfg;
    const double scale = calibrate_eo_scale(cfg.eom1, u_pi);
    cfg.eom1.eo_scale = scale;
    cfg.eom2.eo_scale = scale;
    return cfg;
}

/// Voltage giving a pi arm phase difference for this configuration.
inline double half_wave_voltage(const RouterConfig& cfg) {
    const double k1 = cfg.eom1.eo_scale * eom_field_response(cfg.eom1);
    const double k2 = cfg.eom2.eo_scale * eom_field_response(cfg.eom2);
    const double slope = cfg.push_pull ? 0.5 * (k1 + k2) : k1;
    if (!(slope > 0.0)) throw ConfigurationError("router has no electro-optic response");
    return kPi / slope;
}

inline int mode_index(int port, Polarization pol) {
    if (port != 1 && port != 2) throw UsageError("port must be 1 or 2");
    return 2 * (port - 1) + (pol == Polarization::H ? 0 : 1);
}

class ModeTransfer {
public:
    explicit ModeTransfer(const Mat4& m) : m_(m) {
        Eigen::JacobiSVD<Mat4> svd(m_);
        if (svd.singularValues()(0) > 1.0 + tolerance::construction)
            throw DomainError("mode transfer has gain (singular value > 1)");
    }
    const Mat4& matrix() const { return m_; }
    /// 2x2 polarization block from input port to output port.
    Mat2 block(int out_port, int in_port) const {
        return m_.block<2, 2>(mode_index(out_port, Polarization::H), mode_index(in_port, Polarization::H));
    }

private:
    Mat4 m_;
};

namespace detail {
inline Mat4 path_kron(const Mat2& path) {
    Mat4 m = Mat4::Zero();
    for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) m.block<2, 2>(2 * p, 2 * q) = path(p, q) * Mat2::Identity();
    return m;
}

inline Mat4 output_frame() {
    Mat4 f = Mat4::Identity();
    f(0, 0) = -1.0;  // extra reflection on the port-1 exit
    return f;
}

struct ArmTransfers {
    Mat4 arm1;
    Mat4 arm2;
};

inline ArmTransfers arm_transfers(const RouterConfig& raw, double v_eom1, double v_eom2, double t_hours) {
    raw.validate();
    const RouterConfig cfg = raw.effective();
    if (!cfg.eoms_active) v_eom1 = v_eom2 = 0.0;
    const Mat2 mirror = mirror_operator(cfg.mirror_loss);
    const Mat2 a1 = std::sqrt(1.0 - cfg.eom1.insertion_loss) * mirror * eom_jones(cfg.eom1, v_eom1) *
                    std::polar(1.0, cfg.phase_offset + cfg.drift_rate * t_hours);
    const Mat2 a2 = std::sqrt(1.0 - cfg.eom2.insertion_loss) * mirror * eom_jones(cfg.eom2, v_eom2);
    const Mat4 in = path_kron(bs_operator(cfg.bs_in));
    const Mat4 out = output_frame() * path_kron(bs_operator(cfg.bs_out));
    Mat4 arm = Mat4::Zero();
    arm.block<2, 2>(0, 0) = a1;
    const Mat4 t1 = out * arm * in;
    arm.setZero();
    arm.block<2, 2>(2, 2) = a2;
    const Mat4 t2 = out * arm * in;
    return {t1, t2};
}

inline std::pair<double, double> split_voltage(const RouterConfig& cfg, double voltage) {
    return cfg.push_pull ? std::pair{0.5 * voltage, -0.5 * voltage} : std::pair{voltage, 0.0};
}
}  // namespace detail

/// Inter-arm coherence at the given EOM voltages.
inline double effective_mode_overlap(const RouterConfig& cfg, double v_eom1, double v_eom2) {
    const RouterConfig e = cfg.effective();
    if (!e.eoms_active) return e.mode_overlap;
    const double x = (v_eom1 - v_eom2) / half_wave_voltage(e);
    return std::clamp(e.mode_overlap * (1.0 - e.field_distortion * x * x), 0.0, 1.0);
}

/// Transfer with explicit per-EOM voltages (used for transients).
inline ModeTransfer router_transfer_split(const RouterConfig& cfg, double v_eom1, double v_eom2, double t_hours = 0.0) {
    const auto arms = detail::arm_transfers(cfg, v_eom1, v_eom2, t_hours);
    return ModeTransfer(arms.arm1 + arms.arm2);
}

inline ModeTransfer router_transfer(const RouterConfig& cfg, double voltage, double t_hours = 0.0) {
    const auto [v1, v2] = detail::split_voltage(cfg, voltage);
    return router_transfer_split(cfg, v1, v2, t_hours);
}

/// Kraus operators of the (unnormalized) map from the input-port polarization
/// to the output-port polarization.  Partial mode overlap splits the map into
/// a coherent arm sum and an incoherent mixture of the two arms.
inline std::vector<Mat2> port_kraus_split(const RouterConfig& cfg, int in_port, int out_port, double v_eom1,
                                          double v_eom2, double t_hours = 0.0) {
    const auto arms = detail::arm_transfers(cfg, v_eom1, v_eom2, t_hours);
    const int r = mode_index(out_port, Polarization::H);
    const int c = mode_index(in_port, Polarization::H);
    const Mat2 k1 = arms.arm1.block<2, 2>(r, c);
    const Mat2 k2 = arms.arm2.block<2, 2>(r, c);
    const double mu = effective_mode_overlap(cfg, v_eom1, v_eom2);
    std::vector<Mat2> kraus{std::sqrt(mu) * (k1 + k2)};
    if (mu < 1.0) {
        kraus.push_back(std::sqrt(1.0 - mu) * k1);
        kraus.push_back(std::sqrt(1.0 - mu) * k2);
    }
    return kraus;
}

inline std::vector<Mat2> port_kraus(const RouterConfig& cfg, int in_port, int out_port, double voltage,
                                    double t_hours = 0.0) {
    const auto [v1, v2] = detail::split_voltage(cfg, voltage);
    return port_kraus_split(cfg, in_port, out_port, v1, v2, t_hours);
}

/// Reads output-port-2 polarization in a frame whose H axis is inverted.
inline std::vector<Mat2> invert_h_coordinate(std::vector<Mat2> kraus) {
    for (Mat2& k : kraus) k = pauli(Pauli::Z) * k;
    return kraus;
}

inline Mat2 apply_kraus(const std::vector<Mat2>& kraus, const Mat2& rho) {
    Mat2 out = Mat2::Zero();
    for (const Mat2& k : kraus) out += k * rho * k.adjoint();
    return out;
}

struct RoutingResult {
    double p_out1 = 0.0;
    double p_out2 = 0.0;
    double loss_prob = 0.0;
    // Empty when the port receives (numerically) nothing.
    std::optional<DensityMatrix2> rho_out1;
    std::optional<DensityMatrix2> rho_out2;
};

inline RoutingResult route_single_photon_split(const RouterConfig& cfg, const DensityMatrix2& rho_in, int in_port,
                                               double v_eom1, double v_eom2, double t_hours = 0.0) {
    if (in_port != 1 && in_port != 2) throw UsageError("input port must be 1 or 2");
    RoutingResult res;
    std::array<Mat2, 2> out;
    for (int port = 1; port <= 2; ++port)
        out[port - 1] = apply_kraus(port_kraus_split(cfg, in_port, port, v_eom1, v_eom2, t_hours), rho_in.matrix());
    res.p_out1 = out[0].trace().real();
    res.p_out2 = out[1].trace().real();
    res.loss_prob = 1.0 - res.p_out1 - res.p_out2;
    constexpr double kEmpty = 1e-14;
    if (res.p_out1 > kEmpty) res.rho_out1 = DensityMatrix2::from_matrix(out[0] / res.p_out1, 1e-10);
    if (res.p_out2 > kEmpty) res.rho_out2 = DensityMatrix2::from_matrix(out[1] / res.p_out2, 1e-10);
    return res;
}

inline RoutingResult route_single_photon(const RouterConfig& cfg, const DensityMatrix2& rho_in, int in_port,
                                         double voltage, double t_hours = 0.0) {
    const auto [v1, v2] = detail::split_voltage(cfg, voltage);
    return route_single_photon_split(cfg, rho_in, in_port, v1, v2, t_hours);
}

struct SwitchingPoint {
    double voltage = 0.0;
    double p1 = 0.0;  // S1 / (S1 + S2)
    double p2 = 0.0;
};

inline std::vector<SwitchingPoint> switching_curve(const RouterConfig& cfg, PolLabel input, int in_port,
                                                   const std::vector<double>& voltages) {
    std::vector<SwitchingPoint> curve;
    curve.reserve(voltages.size());
    const DensityMatrix2 rho = DensityMatrix2::from_label(input);
    for (double u : voltages) {
        const RoutingResult r = route_single_photon(cfg, rho, in_port, u);
        const double s = r.p_out1 + r.p_out2;
        if (!(s > 0.0)) throw AnalysisError("no photons reach either output");
        curve.push_back({u, r.p_out1 / s, r.p_out2 / s});
    }
    return curve;
}

struct SerVisibility {
    double e_db = 0.0;  // +infinity when the weaker port is empty
    double v1 = 0.0;
};

/// Switching extinction ratio and visibility from the two output signals.
inline SerVisibility ser_and_visibility(double s1, double s2) {
    if (!(s1 >= 0.0) || !(s2 >= 0.0)) throw UsageError("signals must be non-negative");
    const double hi = std::max(s1, s2);
    const double lo = std::min(s1, s2);
    if (hi == 0.0) throw UsageError("both signals are zero");
    SerVisibility r;
    r.v1 = (hi - lo) / (hi + lo);
    r.e_db = lo == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(hi / lo);
    return r;
}

struct LossEntry {
    std::string element;
    double loss_db = 0.0;
};

/// A photon crosses both splitters, one mirror and one EOM, so the router
/// loss is the arm-averaged path loss.
struct LossBudget {
    std::vector<LossEntry> elements;  // physical elements
    double eom_average_db = 0.0;
    double other_optics_db = 0.0;  // splitters plus the average mirror
    double total_db = 0.0;

    std::vector<LossEntry> rows() const {
        auto r = elements;
        r.push_back({"eom_average", eom_average_db});
        r.push_back({"other_optics", other_optics_db});
        r.push_back({"total", total_db});
        return r;
    }
};

inline LossBudget insertion_loss_budget(const RouterConfig& cfg) {
    cfg.validate();
    LossBudget b;
    const double e1 = loss_to_db(cfg.eom1.insertion_loss);
    const double e2 = loss_to_db(cfg.eom2.insertion_loss);
    const double m = loss_to_db(cfg.mirror_loss);
    const double bi = loss_to_db(cfg.bs_in.loss);
    const double bo = loss_to_db(cfg.bs_out.loss);
    b.elements = {{"bs_in", bi}, {"eom1", e1}, {"eom2", e2}, {"mirror1", m}, {"mirror2", m}, {"bs_out", bo}};
    b.eom_average_db = 0.5 * (e1 + e2);
    b.other_optics_db = bi + bo + m;
    b.total_db = b.eom_average_db + b.other_optics_db;
    return b;
}

/// Mean single-photon visibility over H, D, R inputs at input port 1, for
/// output port 1 at U_pi or output port 2 at U = 0.
inline double mean_port_visibility(const RouterConfig& cfg, int out_port) {
    const double u = out_port == 1 ? half_wave_voltage(cfg) : 0.0;
    double sum = 0.0;
    for (PolLabel l : {PolLabel::H, PolLabel::D, PolLabel::R}) {
        const RoutingResult r = route_single_photon(cfg, DensityMatrix2::from_label(l), 1, u);
        sum += ser_and_visibility(r.p_out1, r.p_out2).v1;
    }
    return sum / 3.0;
}

/// Voltage that sends input `in_port` to `out_port`.
inline double routing_voltage(const RouterConfig& cfg, int in_port, int out_port) {
    if ((in_port != 1 && in_port != 2) || (out_port != 1 && out_port != 2)) throw UsageError("ports must be 1 or 2");
    return in_port == out_port ? half_wave_voltage(cfg) : 0.0;
}

/// Process matrix of an in->out routing at its switching voltage, read in the
/// inverted-H frame at output port 2.
inline ProcessMatrix routing_process(const RouterConfig& cfg, int in_port, int out_port) {
    auto k = port_kraus(cfg, in_port, out_port, routing_voltage(cfg, in_port, out_port));
    if (out_port == 2) k = invert_h_coordinate(std::move(k));
    return ProcessMatrix::from_kraus(k);
}

inline double mean_routing_fidelity(const RouterConfig& cfg) {
    double sum = 0.0;
    for (int i = 1; i <= 2; ++i)
        for (int o = 1; o <= 2; ++o) sum += process_fidelity(routing_process(cfg, i, o), ProcessMatrix::identity());
    return sum / 4.0;
}

struct CalibrationTargets {
    double port1_visibility = 0.0;  // mean over H, D, R at U = U_pi
    double port2_visibility = 0.0;  // mean over H, D, R at U = 0
    double mean_fidelity = 0.0;     // mean identity fidelity of the four port combinations
};

/// Solves for (mode overlap, misalignment, field distortion).  Port 2 at U = 0
/// sees identical arms, so it depends on the mode overlap alone; the process
/// fidelity is governed by the misalignment and the remaining port-1 loss of
/// contrast by the field distortion.  Solved by alternating bisections.
inline Imperfections calibrate_imperfections(RouterConfig cfg, const CalibrationTargets& target) {
    cfg.eoms_active = true;
    auto bisect = [](auto&& f, double lo, double hi) {
        const bool rising = f(hi) > f(lo);
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((f(mid) > 0.0) == rising) hi = mid; else lo = mid;
        }
        return 0.5 * (lo + hi);
    };
    auto with = [&](Imperfections imp) {
        RouterConfig c = cfg;
        c.set_imperfections(imp);
        return c;
    };
    Imperfections imp{0.0, 1.0, 0.0};
    for (int pass = 0; pass < 6; ++pass) {
        imp.mode_overlap = bisect(
            [&](double mu) { return mean_port_visibility(with({imp.misalignment, mu, imp.field_distortion}), 2) - target.port2_visibility; },
            0.0, 1.0);
        auto fid = [&](double eps) { return mean_routing_fidelity(with({eps, imp.mode_overlap, imp.field_distortion})) - target.mean_fidelity; };
        if (fid(0.0) < 0.0 || fid(0.0999) > 0.0) throw ConfigurationError("fidelity target not reachable with |eps| < 0.1");
        imp.misalignment = bisect(fid, 0.0, 0.0999);
        auto port1 = [&](double k) { return mean_port_visibility(with({imp.misalignment, imp.mode_overlap, k}), 1) - target.port1_visibility; };
        if (port1(0.0) < 0.0) throw ConfigurationError("port-1 visibility target above the zero-distortion value");
        if (port1(1.0) > 0.0) throw ConfigurationError("port-1 visibility target not reachable");
        imp.field_distortion = bisect(port1, 0.0, 1.0);
    }
    return imp;
}

}  // namespace polrouter
