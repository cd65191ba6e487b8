#pragma once

// Transient response of the router when the photon arrival is scanned
// across the EOM drive pulse.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "polrouter/router.hpp"

namespace polrouter {

struct TemporalEdgeConfig {
    // Optical 10-90 times of the switched signal at output port 1.
    double rise_10_90 = 3.3e-9;
    double fall_10_90 = 3.1e-9;
    double delay_mismatch = 0.0;  // EOM2 trigger lag behind EOM1
    double gate_width = 10.0e-9;

    void validate() const {
        if (!(rise_10_90 >= 0.0) || !(fall_10_90 >= 0.0) || !(delay_mismatch >= 0.0))
            throw ConfigurationError("edge times and delay mismatch must be >= 0");
        if (!(gate_width > 0.0)) throw ConfigurationError("gate width must be positive");
    }
};

struct TemporalPoint {
    double delay = 0.0;      // s
    double rate_norm = 0.0;  // port-1 probability relative to the static U_pi value
};

struct EdgeTimes {
    double rise = 0.0;
    double fall = 0.0;
};

/// Gaussian widths of the per-EOM drive edges.
struct DriveEdges {
    double sigma_rise = 0.0;
    double sigma_fall = 0.0;
};

namespace detail {
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double edge(double x, double sigma) {
    if (sigma <= 0.0) return x > 0.0 ? 1.0 : (x < 0.0 ? 0.0 : 0.5);
    return normal_cdf(x / sigma);
}

/// Normalized drive of the EOM triggered at `start`.
inline double drive(double d, double start, double width, const DriveEdges& e) {
    return edge(d - start, e.sigma_rise) * edge(start + width - d, e.sigma_fall);
}

/// Port-1 probability of the ideal push-pull router with both drives
/// normalized to U_pi.  Used for edge calibration only.
inline double ideal_port1(double g1, double g2) {
    const double s = std::sin(0.25 * kPi * (g1 + g2));
    return s * s;
}
}  // namespace detail

/// Linear interpolation of 10 % and 90 % crossings.  The rising edge uses
/// the first upward crossing of each level, the falling edge the last
/// downward crossing.
inline EdgeTimes extract_10_90(const std::vector<TemporalPoint>& curve) {
    if (curve.size() < 3) throw AnalysisError("curve too short for 10-90 extraction");
    double lo = curve.front().rate_norm, hi = lo;
    std::size_t peak = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        lo = std::min(lo, curve[i].rate_norm);
        if (curve[i].rate_norm > hi) {
            hi = curve[i].rate_norm;
            peak = i;
        }
    }
    if (!(hi > lo)) throw AnalysisError("curve is flat");
    const double l10 = lo + 0.1 * (hi - lo);
    const double l90 = lo + 0.9 * (hi - lo);
    auto interp = [&](std::size_t i, double level) {
        const auto& a = curve[i];
        const auto& b = curve[i + 1];
        return a.delay + (level - a.rate_norm) * (b.delay - a.delay) / (b.rate_norm - a.rate_norm);
    };
    auto first_up = [&](double level) -> std::optional<double> {
        for (std::size_t i = 0; i < peak; ++i)
            if (curve[i].rate_norm < level && curve[i + 1].rate_norm >= level) return interp(i, level);
        return std::nullopt;
    };
    auto last_down = [&](double level) -> std::optional<double> {
        for (std::size_t i = curve.size() - 1; i-- > peak;)
            if (curve[i].rate_norm >= level && curve[i + 1].rate_norm < level) return interp(i, level);
        return std::nullopt;
    };
    const auto r10 = first_up(l10), r90 = first_up(l90);
    const auto f90 = last_down(l90), f10 = last_down(l10);
    if (!r10 || !r90) throw AnalysisError("rising edge does not cross the 10 % and 90 % levels");
    if (!f90 || !f10) throw AnalysisError("falling edge does not cross the 90 % and 10 % levels");
    return {*r90 - *r10, *f10 - *f90};
}

namespace detail {
inline std::vector<TemporalPoint> ideal_pulse(const TemporalEdgeConfig& e, const DriveEdges& d, double dt) {
    const double pad = 8.0 * std::max({d.sigma_rise, d.sigma_fall, 1e-12});
    const double t0 = -pad;
    const double t1 = e.gate_width + e.delay_mismatch + pad;
    const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) / dt)) + 1;
    std::vector<TemporalPoint> c(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = t0 + static_cast<double>(i) * dt;
        c[i] = {t, ideal_port1(drive(t, 0.0, e.gate_width, d), drive(t, e.delay_mismatch, e.gate_width, d))};
    }
    return c;
}
}  // namespace detail

/// Drive edge widths for which the switched optical signal has the
/// configured 10-90 times.  The mismatch alone already stretches each
/// optical edge to about `delay_mismatch`, so the targets must exceed it.
inline DriveEdges calibrate_drive_edges(const TemporalEdgeConfig& e) {
    e.validate();
    if (!(e.rise_10_90 > e.delay_mismatch) || !(e.fall_10_90 > e.delay_mismatch))
        throw ConfigurationError("10-90 times must exceed the delay mismatch");
    if (e.rise_10_90 + e.fall_10_90 > e.gate_width)
        throw ConfigurationError("gate width too short for the configured edges");
    const double dt = std::min(e.rise_10_90, e.fall_10_90) / 500.0;
    DriveEdges d{e.rise_10_90 / 2.0, e.fall_10_90 / 2.0};
    auto solve = [&](double target, bool rising) {
        double lo = 0.0, hi = target;
        for (int it = 0; it < 40; ++it) {
            const double mid = 0.5 * (lo + hi);
            DriveEdges t = d;
            (rising ? t.sigma_rise : t.sigma_fall) = mid;
            const EdgeTimes m = extract_10_90(detail::ideal_pulse(e, t, dt));
            if ((rising ? m.rise : m.fall) > target) hi = mid; else lo = mid;
        }
        return 0.5 * (lo + hi);
    };
    for (int pass = 0; pass < 3; ++pass) {
        d.sigma_rise = solve(e.rise_10_90, true);
        d.sigma_fall = solve(e.fall_10_90, false);
    }
    return d;
}

/// Port-1 detection rate versus photon delay for input-port-1 light, EOM1
/// triggered at zero delay and EOM2 `delay_mismatch` later.  Each EOM swings
/// to its share of U_pi with Gaussian-integral (error-function) edges.
/// `rho_in` defaults to the maximally mixed state.
inline std::vector<TemporalPoint> temporal_response(const RouterConfig& cfg, const TemporalEdgeConfig& edges,
                                                    const std::vector<double>& delays,
                                                    const DensityMatrix2& rho_in = DensityMatrix2::maximally_mixed()) {
    const DriveEdges d = calibrate_drive_edges(edges);
    const double u_pi = half_wave_voltage(cfg);
    const auto [a1, a2] = detail::split_voltage(cfg, u_pi);
    const double full = route_single_photon(cfg, rho_in, 1, u_pi).p_out1;
    if (!(full > 0.0)) throw AnalysisError("router passes nothing to port 1 at U_pi");
    std::vector<TemporalPoint> out;
    out.reserve(delays.size());
    for (double t : delays) {
        const double g1 = detail::drive(t, 0.0, edges.gate_width, d);
        const double g2 = detail::drive(t, edges.delay_mismatch, edges.gate_width, d);
        const double p = route_single_photon_split(cfg, rho_in, 1, a1 * g1, a2 * g2).p_out1;
        out.push_back({t, p / full});
    }
    return out;
}

/// True when the rising edge has a stationary shoulder: an interior local
/// minimum of the slope between the 10 % and 90 % crossings that drops below
/// `fraction` of the edge's peak slope.
inline bool has_mid_edge_plateau(const std::vector<TemporalPoint>& curve, double fraction = 0.5) {
    if (curve.size() < 5) return false;
    double lo = curve.front().rate_norm, hi = lo;
    std::size_t peak = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        lo = std::min(lo, curve[i].rate_norm);
        if (curve[i].rate_norm > hi) {
            hi = curve[i].rate_norm;
            peak = i;
        }
    }
    if (!(hi > lo)) return false;
    const double l10 = lo + 0.1 * (hi - lo), l90 = lo + 0.9 * (hi - lo);
    std::vector<double> slope;
    for (std::size_t i = 0; i + 1 <= peak; ++i) {
        const double m = 0.5 * (curve[i].rate_norm + curve[i + 1].rate_norm);
        if (m < l10 || m > l90) continue;
        slope.push_back((curve[i + 1].rate_norm - curve[i].rate_norm) / (curve[i + 1].delay - curve[i].delay));
    }
    if (slope.size() < 3) return false;
    const double top = *std::max_element(slope.begin(), slope.end());
    for (std::size_t i = 1; i + 1 < slope.size(); ++i) {
        if (slope[i] <= slope[i - 1] && slope[i] <= slope[i + 1] && slope[i] < fraction * top) {
            // must be a dip with steeper parts on both sides
            const double left = *std::max_element(slope.begin(), slope.begin() + static_cast<long>(i));
            const double right = *std::max_element(slope.begin() + static_cast<long>(i) + 1, slope.end());
            if (left > slope[i] / fraction && right > slope[i] / fraction) return true;
        }
    }
    return false;
}

}  // namespace polrouter
