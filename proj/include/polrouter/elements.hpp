#pragma once

// Jones and path operators for the router's optical components.

#include <cmath>

#include "polrouter/errors.hpp"
#include "polrouter/polmath.hpp"

namespace polrouter {

enum class Polarization { H, V };

/// Crystallographic axis lying along the lab H direction.
enum class CrystalAxis { Y, Z };

inline double loss_to_db(double loss) { return -10.0 * std::log10(1.0 - loss); }
inline double db_to_loss(double db) { return 1.0 - std::pow(10.0, -db / 10.0); }

// Built-in RTP constants.  Mirrors data/rtp_material.toml.
namespace material {
inline constexpr int kTableVersion = 1;
inline constexpr double kWavelength = 1.570e-6;
inline constexpr double kRtpNy = 1.7515;
inline constexpr double kRtpNz = 1.8276;
inline constexpr double kRtpR23 = 15.0e-12;
inline constexpr double kRtpR33 = 35.0e-12;
inline constexpr double kRtpLength = 0.010;
inline constexpr double kRtpWidth = 0.003;
}  // namespace material

struct RtpCrystal {
    double length = material::kRtpLength;  // m, along the beam
    double width = material::kRtpWidth;    // m, electrode gap
    double n_y = material::kRtpNy;
    double n_z = material::kRtpNz;
    double r23 = material::kRtpR23;  // m/V
    double r33 = material::kRtpR33;  // m/V
    CrystalAxis axis_along_h = CrystalAxis::Y;

    void validate() const {
        if (!(length > 0.0) || !(width > 0.0)) throw ConfigurationError("RTP crystal dimensions must be positive");
        if (!(n_y >= 1.0) || !(n_z >= 1.0)) throw ConfigurationError("RTP refractive indices must be >= 1");
        if (!(r23 > 0.0) || !(r33 > 0.0)) throw ConfigurationError("RTP electro-optic coefficients must be positive");
    }
};

/// Phase split into the field-free part and the voltage-induced part.  The
/// static part is ~1e4 rad, so keeping the two apart preserves the precision
/// of the small differential phases the router actually uses.
struct RtpPhase {
    double static_part = 0.0;
    double field_part = 0.0;
    double total() const { return static_part + field_part; }
};

inline RtpPhase rtp_phase_parts(const RtpCrystal& c, Polarization pol, double voltage, double wavelength,
                                double eo_scale = 1.0) {
    c.validate();
    if (!(wavelength > 0.0)) throw ConfigurationError("wavelength must be positive");
    const bool h = pol == Polarization::H;
    const CrystalAxis axis =
        h ? c.axis_along_h : (c.axis_along_h == CrystalAxis::Y ? CrystalAxis::Z : CrystalAxis::Y);
    const double n = axis == CrystalAxis::Y ? c.n_y : c.n_z;
    const double r = axis == CrystalAxis::Y ? c.r23 : c.r33;
    const double k = 2.0 * kPi / wavelength * c.length;
    return {k * n, -k * 0.5 * r * n * n * n * eo_scale * voltage / c.width};
}

/// Optical phase picked up by `pol` light in one crystal with `voltage` along Z.
inline double rtp_phase(const RtpCrystal& c, Polarization pol, double voltage, double wavelength,
                        double eo_scale = 1.0) {
    return rtp_phase_parts(c, pol, voltage, wavelength, eo_scale).total();
}

/// Two cross-aligned crystals driven by the same voltage.  The second crystal
/// is nominally rotated 90 degrees (Z along H); `misalignment` is its residual
/// rotation in radians.
struct EomConfig {
    RtpCrystal first{.axis_along_h = CrystalAxis::Y};
    RtpCrystal second{.axis_along_h = CrystalAxis::Z};
    double wavelength = material::kWavelength;
    double misalignment = 0.0;
    double eo_scale = 1.0;
    double insertion_loss = 0.0;

    void validate() const {
        first.validate();
        second.validate();
        if (!(wavelength > 0.0)) throw ConfigurationError("wavelength must be positive");
        if (!(std::abs(misalignment) < 0.1)) throw ConfigurationError("crystal misalignment must satisfy |eps| < 0.1 rad");
        if (!(insertion_loss >= 0.0 && insertion_loss < 1.0)) throw ConfigurationError("EOM loss must be in [0,1)");
    }
};

inline Mat2 rotation(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat2 r;
    r << c, -s, s, c;
    return r;
}

namespace detail {
inline cplx phasor(const RtpPhase& p) { return std::polar(1.0, p.static_part) * std::polar(1.0, p.field_part); }

inline Mat2 crystal_jones(const RtpCrystal& c, double voltage, double wavelength, double eo_scale) {
    Mat2 m = Mat2::Zero();
    m(0, 0) = phasor(rtp_phase_parts(c, Polarization::H, voltage, wavelength, eo_scale));
    m(1, 1) = phasor(rtp_phase_parts(c, Polarization::V, voltage, wavelength, eo_scale));
    return m;
}
}  // namespace detail

/// Lossless Jones matrix of the compensated EOM at `voltage`.
inline Mat2 eom_jones(const EomConfig& cfg, double voltage) {
    cfg.validate();
    const Mat2 j1 = detail::crystal_jones(cfg.first, voltage, cfg.wavelength, cfg.eo_scale);
    Mat2 j2 = detail::crystal_jones(cfg.second, voltage, cfg.wavelength, cfg.eo_scale);
    if (cfg.misalignment != 0.0) {
        const Mat2 r = rotation(cfg.misalignment);
        j2 = r * j2 * r.transpose();
    }
    return j2 * j1;
}

/// Magnitude of d(phase)/dU of one EOM at eo_scale = 1, averaged over H and V (rad/V).
inline double eom_field_response(const EomConfig& cfg) {
    cfg.validate();
    double sum = 0.0;
    for (const RtpCrystal* c : {&cfg.first, &cfg.second})
        for (Polarization p : {Polarization::H, Polarization::V})
            sum += -rtp_phase_parts(*c, p, 1.0, cfg.wavelength, 1.0).field_part;
    return sum / 2.0;
}

/// eo_scale making a push-pull pair of these EOMs switch at `target_u_pi`.
/// The arm phase difference is eo_scale * response * U, which must equal pi.
inline double calibrate_eo_scale(const EomConfig& cfg, double target_u_pi) {
    if (!(target_u_pi > 0.0)) throw UsageError("target half-wave voltage must be positive");
    const double k = eom_field_response(cfg);
    if (!(k > 0.0) || !std::isfinite(k)) throw ConfigurationError("EOM has no electro-optic response");
    return kPi / (k * target_u_pi);
}

struct WaveplateConfig {
    double retardance = kPi;
    double axis_angle = 0.0;

    void validate() const {
        if (!(retardance > 0.0 && retardance < 2.0 * kPi)) throw ConfigurationError("retardance must be in (0, 2pi)");
    }
};

inline WaveplateConfig half_wave_plate(double angle) { return {kPi, angle}; }
inline WaveplateConfig quarter_wave_plate(double angle) { return {kPi / 2.0, angle}; }

inline Mat2 waveplate_jones(const WaveplateConfig& cfg) {
    cfg.validate();
    Mat2 d = Mat2::Zero();
    d(0, 0) = std::polar(1.0, -cfg.retardance / 2.0);
    d(1, 1) = std::polar(1.0, cfg.retardance / 2.0);
    const Mat2 r = rotation(cfg.axis_angle);
    return r * d * r.transpose();
}

struct BsConfig {
    double transmittance = 0.5;
    double loss = 0.0;

    void validate() const {
        if (!(transmittance >= 0.0 && transmittance <= 1.0)) throw ConfigurationError("BS transmittance must be in [0,1]");
        if (!(loss >= 0.0 && loss < 1.0)) throw ConfigurationError("BS loss must be in [0,1)");
    }
};

/// Path operator on (path1, path2); reflection carries a factor i.
inline Mat2 bs_operator(const BsConfig& cfg) {
    cfg.validate();
    const double t = std::sqrt(cfg.transmittance);
    const cplx r{0.0, std::sqrt(1.0 - cfg.transmittance)};
    Mat2 m;
    m << t, r, r, t;
    return std::sqrt(1.0 - cfg.loss) * m;
}

/// Near-normal-incidence mirror: H picks up pi relative to V.
inline Mat2 mirror_operator(double loss) {
    if (!(loss >= 0.0 && loss < 1.0)) throw ConfigurationError("mirror loss must be in [0,1)");
    Mat2 m = Mat2::Zero();
    m(0, 0) = -1.0;
    m(1, 1) = 1.0;
    return std::sqrt(1.0 - loss) * m;
}

}  // namespace polrouter
