#pragma once

// Expected detection rates and count records.

#include <cmath>
#include <cstdint>
#include <string>

#include "polrouter/config.hpp"
#include "polrouter/errors.hpp"

namespace polrouter {

struct RateModel {
    double dark_probability = 0.0;  // per detector gate
    double herald_singles = 0.0;    // Hz
    double signal_singles = 0.0;    // Hz, heralded photons reaching the detector
    // Heralded single photons: herald and signal both clicking.
    double coincidences = 0.0;
    double accidentals = 0.0;  // herald click with a signal-detector dark count
    // Unheralded two-photon mode: both photons of a pair detected while the
    // EOMs are on, at unit analyzer probability.
    double twofold = 0.0;
    double twofold_accidentals = 0.0;
};

/// Rate algebra: pair_rate x efficiencies x duty factors, router transmission
/// from the loss budget, dark counts per gated detection window.
inline RateModel heralded_rate_model(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto& s = cfg.source;
    const auto& d = cfg.detector;
    const double t = std::pow(10.0, -insertion_loss_budget(cfg.router_config()).total_db / 10.0);
    RateModel r;
    r.dark_probability = d.dark_rate_hz * d.gate_window_s;
    r.herald_singles = s.pair_rate_hz * d.herald_efficiency + d.dark_rate_hz;
    r.signal_singles = s.pair_rate_hz * d.efficiency * t + d.dark_rate_hz;
    r.coincidences = s.pair_rate_hz * d.herald_efficiency * d.efficiency * t;
    r.accidentals = r.herald_singles * r.dark_probability;
    r.twofold = s.pair_rate_hz * s.duty_cycle * d.efficiency * d.efficiency * t * t;
    r.twofold_accidentals = 2.0 * s.pair_rate_hz * s.duty_cycle * d.efficiency * t * r.dark_probability;
    return r;
}

struct CountRecord {
    std::string setting;
    std::int64_t counts = 0;
    double duration = 0.0;  // s

    CountRecord(std::string setting_, std::int64_t counts_, double duration_)
        : setting(std::move(setting_)), counts(counts_), duration(duration_) {
        if (counts < 0) throw UsageError("counts must be >= 0");
        if (!(duration > 0.0)) throw UsageError("duration must be positive");
    }

    double poisson_err() const { return std::sqrt(static_cast<double>(counts)); }
    double rate() const { return static_cast<double>(counts) / duration; }
    double rate_err() const { return poisson_err() / duration; }
};

}  // namespace polrouter
