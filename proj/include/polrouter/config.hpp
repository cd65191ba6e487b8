#pragma once

// Experiment configuration: one TOML document, a table per module.  Every
// key is optional and defaults to the calibrated device values below.
// Unknown keys are rejected so that typos do not silently fall back.

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "polrouter/errors.hpp"
#include "polrouter/router.hpp"
#include "polrouter/temporal.hpp"

namespace polrouter {

/// Imperfections solved by calibrate_imperfections against the measured mean
/// visibilities and routing fidelity (re-derived in the unit tests).
inline constexpr Imperfections kCalibratedImperfections{0.045744026224859617, 0.9952354703675188,
                                                        0.0042581698632786491};
inline constexpr double kIdleModeOverlap = 0.999;

struct RouterSection {
    double u_pi_volts = kNominalHalfWaveVoltage;
    bool push_pull = true;
    double bs_transmittance = 0.5;
    double bs_in_loss_db = 0.010;
    double bs_out_loss_db = 0.010;
    double mirror_loss_db = 0.011;
    double eom1_loss_db = 0.017;
    double eom2_loss_db = 0.035;
    double misalignment_rad = kCalibratedImperfections.misalignment;
    double mode_overlap = kCalibratedImperfections.mode_overlap;
    double field_distortion = kCalibratedImperfections.field_distortion;
    double phase_offset_rad = 0.0;
    double drift_rate_rad_per_hour = 0.0;
    bool eoms_active = true;
    double idle_misalignment_rad = kCalibratedImperfections.misalignment;
    double idle_mode_overlap = kIdleModeOverlap;
};

struct TemporalSection {
    double rise_10_90_ns = 3.3;
    double fall_10_90_ns = 3.1;
    double delay_mismatch_ns = 3.0;
    double gate_width_ns = 10.0;
};

struct SourceSection {
    double mu = 0.968;
    double pair_rate_hz = 13370.0;  // gives ~5e3 two-photon coincidences/s at the fringe maximum
    double rep_rate_hz = 76.0e6;
    double eom_rate_hz = 1.0e6;
    double duty_cycle = 0.6;
};

struct DetectorSection {
    double efficiency = 0.8;
    double herald_efficiency = 0.8;
    double dark_rate_hz = 1000.0;
    double gate_window_s = 1.0e-9;  // dark_rate * gate_window ~ 1e-6 per gate
};

struct FiberSection {
    double rotation_rad = 0.1098;
    std::array<double, 3> axis{0.3, 0.8, 0.5};
    double depolarization = 0.002;
};

struct RunSection {
    std::uint64_t seed = 1;
    double point_duration_s = 1.0;
    double voltage_start = 0.0;
    double voltage_stop = 1200.0;
    double voltage_step = 25.0;
    double angle_start_deg = 0.0;
    double angle_stop_deg = 45.0;
    double angle_step_deg = 5.0;
    double delay_start_ns = -5.0;
    double delay_stop_ns = 20.0;
    double delay_step_ns = 0.1;
    double shots_per_setting = 1.0e4;
    int tomography_resamples = 10;
    int restarts = 8;
    double deconvolution_cost_threshold = 0.05;
    double stability_hours = 5.0;
    double stability_step_hours = 0.05;
    std::vector<double> drift_rates{0.0, 0.02, 0.1};  // rad/hour
};

struct ExperimentConfig {
    RouterSection router;
    TemporalSection temporal;
    SourceSection source;
    DetectorSection detector;
    FiberSection fiber;
    RunSection run;

    void validate() const;
    RouterConfig router_config() const;
    TemporalEdgeConfig temporal_config() const;
    ProcessMatrix fiber_process() const;
};

/// Inclusive arithmetic grid; the stop value is kept when it lands on the grid.
inline std::vector<double> make_grid(double start, double stop, double step) {
    if (!(step > 0.0) || !(stop >= start) || !std::isfinite(start) || !std::isfinite(stop))
        throw ConfigurationError("grid needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    if (n > 10'000'000) throw ConfigurationError("grid too large");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = start + static_cast<double>(i) * step;
    return g;
}

inline void ExperimentConfig::validate() const {
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigurationError(std::string(name) + " must be finite and >= 0");
    };
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigurationError(std::string(name) + " must be in [0,1]");
    };
    if (!(router.u_pi_volts > 0.0)) throw ConfigurationError("router.u_pi_volts must be positive");
    for (double db : {router.bs_in_loss_db, router.bs_out_loss_db, router.mirror_loss_db, router.eom1_loss_db,
                      router.eom2_loss_db})
        nonneg(db, "router losses");
    unit(source.mu, "source.mu");
    nonneg(source.pair_rate_hz, "source.pair_rate_hz");
    if (!(source.rep_rate_hz > 0.0)) throw ConfigurationError("source.rep_rate_hz must be positive");
    nonneg(source.eom_rate_hz, "source.eom_rate_hz");
    unit(source.duty_cycle, "source.duty_cycle");
    unit(detector.efficiency, "detector.efficiency");
    unit(detector.herald_efficiency, "detector.herald_efficiency");
    nonneg(detector.dark_rate_hz, "detector.dark_rate_hz");
    nonneg(detector.gate_window_s, "detector.gate_window_s");
    if (detector.dark_rate_hz * detector.gate_window_s > 1.0)
        throw ConfigurationError("dark count probability per gate exceeds 1");
    unit(fiber.depolarization, "fiber.depolarization");
    if (!(std::hypot(fiber.axis[0], fiber.axis[1], fiber.axis[2]) > 0.0))
        throw ConfigurationError("fiber.axis must be nonzero");
    if (!(run.point_duration_s > 0.0)) throw ConfigurationError("run.point_duration_s must be positive");
    if (!(run.shots_per_setting >= 1.0)) throw ConfigurationError("run.shots_per_setting must be >= 1");
    if (run.tomography_resamples < 0 || run.restarts < 1) throw ConfigurationError("run resamples/restarts out of range");
    nonneg(run.deconvolution_cost_threshold, "run.deconvolution_cost_threshold");
    make_grid(run.voltage_start, run.voltage_stop, run.voltage_step);
    make_grid(run.angle_start_deg, run.angle_stop_deg, run.angle_step_deg);
    make_grid(run.delay_start_ns, run.delay_stop_ns, run.delay_step_ns);
    make_grid(0.0, run.stability_hours, run.stability_step_hours);
    router_config().validate();
    temporal_config().validate();
}

inline RouterConfig ExperimentConfig::router_config() const {
    RouterConfig c;
    c.bs_in = {router.bs_transmittance, db_to_loss(router.bs_in_loss_db)};
    c.bs_out = {router.bs_transmittance, db_to_loss(router.bs_out_loss_db)};
    c.mirror_loss = db_to_loss(router.mirror_loss_db);
    c.eom1.insertion_loss = db_to_loss(router.eom1_loss_db);
    c.eom2.insertion_loss = db_to_loss(router.eom2_loss_db);
    c.push_pull = router.push_pull;
    const double scale = calibrate_eo_scale(c.eom1, router.u_pi_volts);
    c.eom1.eo_scale = scale;
    c.eom2.eo_scale = scale;
    c.set_imperfections({router.misalignment_rad, router.mode_overlap, router.field_distortion});
    c.phase_offset = router.phase_offset_rad;
    c.drift_rate = router.drift_rate_rad_per_hour;
    c.eoms_active = router.eoms_active;
    c.idle = {router.idle_misalignment_rad, router.idle_mode_overlap, 0.0};
    return c;
}

inline TemporalEdgeConfig ExperimentConfig::temporal_config() const {
    return {temporal.rise_10_90_ns * 1e-9, temporal.fall_10_90_ns * 1e-9, temporal.delay_mismatch_ns * 1e-9,
            temporal.gate_width_ns * 1e-9};
}

/// Fiber between router and analyzer: a small rotation about `axis` followed
/// by slight depolarization.
inline ProcessMatrix ExperimentConfig::fiber_process() const {
    const double n = std::hypot(fiber.axis[0], fiber.axis[1], fiber.axis[2]);
    const double half = fiber.rotation_rad / 2.0;
    Mat2 u = std::cos(half) * Mat2::Identity();
    for (int k = 0; k < 3; ++k) u -= cplx(0.0, std::sin(half) * fiber.axis[k] / n) * pauli(k + 1);
    const Mat4 m = (1.0 - fiber.depolarization) * ProcessMatrix::from_unitary(u).matrix() +
                   fiber.depolarization * Mat4::Identity() / 4.0;
    return ProcessMatrix::from_matrix(m, true);
}

// ---------------------------------------------------------------------------
// TOML

namespace detail {
class TableReader {
public:
    TableReader(const toml::table& root, std::string name) : name_(std::move(name)) {
        if (const auto* node = root.get(name_)) {
            t_ = node->as_table();
            if (!t_) throw ConfigurationError("[" + name_ + "] must be a table");
        }
    }

    void get(std::string_view key, double& out) {
        if (const auto* n = find(key)) {
            if (auto v = n->value<double>()) out = *v;
            else throw error(key, "a number");
        }
    }
    void get(std::string_view key, bool& out) {
        if (const auto* n = find(key)) {
            if (auto v = n->value<bool>()) out = *v;
            else throw error(key, "a boolean");
        }
    }
    void get(std::string_view key, int& out) {
        if (const auto* n = find(key)) {
            if (auto v = n->value<std::int64_t>()) out = static_cast<int>(*v);
            else throw error(key, "an integer");
        }
    }
    void get(std::string_view key, std::uint64_t& out) {
        if (const auto* n = find(key)) {
            auto v = n->value<std::int64_t>();
            if (!v || *v < 0) throw error(key, "a non-negative integer");
            out = static_cast<std::uint64_t>(*v);
        }
    }
    void get(std::string_view key, std::vector<double>& out) {
        if (const auto* n = find(key)) {
            const auto* arr = n->as_array();
            if (!arr) throw error(key, "an array of numbers");
            out.clear();
            for (const auto& e : *arr) {
                auto v = e.value<double>();
                if (!v) throw error(key, "an array of numbers");
                out.push_back(*v);
            }
        }
    }
    void get(std::string_view key, std::array<double, 3>& out) {
        std::vector<double> v(out.begin(), out.end());
        get(key, v);
        if (v.size() != 3) throw error(key, "an array of 3 numbers");
        std::copy(v.begin(), v.end(), out.begin());
    }

    void finish() const {
        if (!t_) return;
        for (const auto& [k, _] : *t_)
            if (!seen_.count(std::string(k.str())))
                throw ConfigurationError("unknown key " + name_ + "." + std::string(k.str()));
    }

private:
    const toml::node* find(std::string_view key) {
        seen_.insert(std::string(key));
        return t_ ? t_->get(key) : nullptr;
    }
    ConfigurationError error(std::string_view key, const char* what) const {
        return ConfigurationError(name_ + "." + std::string(key) + " must be " + what);
    }

    std::string name_;
    const toml::table* t_ = nullptr;
    std::set<std::string> seen_;
};
}  // namespace detail

inline ExperimentConfig config_from_toml(const toml::table& root) {
    static const std::set<std::string> sections{"router", "temporal", "source", "detector", "fiber", "run"};
    for (const auto& [k, _] : root)
        if (!sections.count(std::string(k.str()))) throw ConfigurationError("unknown section [" + std::string(k.str()) + "]");
    ExperimentConfig c;
    {
        detail::TableReader r(root, "router");
        auto& s = c.router;
        r.get("u_pi_volts", s.u_pi_volts);
        r.get("push_pull", s.push_pull);
        r.get("bs_transmittance", s.bs_transmittance);
        r.get("bs_in_loss_db", s.bs_in_loss_db);
        r.get("bs_out_loss_db", s.bs_out_loss_db);
        r.get("mirror_loss_db", s.mirror_loss_db);
        r.get("eom1_loss_db", s.eom1_loss_db);
        r.get("eom2_loss_db", s.eom2_loss_db);
        r.get("misalignment_rad", s.misalignment_rad);
        r.get("mode_overlap", s.mode_overlap);
        r.get("field_distortion", s.field_distortion);
        r.get("phase_offset_rad", s.phase_offset_rad);
        r.get("drift_rate_rad_per_hour", s.drift_rate_rad_per_hour);
        r.get("eoms_active", s.eoms_active);
        r.get("idle_misalignment_rad", s.idle_misalignment_rad);
        r.get("idle_mode_overlap", s.idle_mode_overlap);
        r.finish();
    }
    {
        detail::TableReader r(root, "temporal");
        auto& s = c.temporal;
        r.get("rise_10_90_ns", s.rise_10_90_ns);
        r.get("fall_10_90_ns", s.fall_10_90_ns);
        r.get("delay_mismatch_ns", s.delay_mismatch_ns);
        r.get("gate_width_ns", s.gate_width_ns);
        r.finish();
    }
    {
        detail::TableReader r(root, "source");
        auto& s = c.source;
        r.get("mu", s.mu);
        r.get("pair_rate_hz", s.pair_rate_hz);
        r.get("rep_rate_hz", s.rep_rate_hz);
        r.get("eom_rate_hz", s.eom_rate_hz);
        r.get("duty_cycle", s.duty_cycle);
        r.finish();
    }
    {
        detail::TableReader r(root, "detector");
        auto& s = c.detector;
        r.get("efficiency", s.efficiency);
        r.get("herald_efficiency", s.herald_efficiency);
        r.get("dark_rate_hz", s.dark_rate_hz);
        r.get("gate_window_s", s.gate_window_s);
        r.finish();
    }
    {
        detail::TableReader r(root, "fiber");
        auto& s = c.fiber;
        r.get("rotation_rad", s.rotation_rad);
        r.get("axis", s.axis);
        r.get("depolarization", s.depolarization);
        r.finish();
    }
    {
        detail::TableReader r(root, "run");
        auto& s = c.run;
        r.get("seed", s.seed);
        r.get("point_duration_s", s.point_duration_s);
        r.get("voltage_start", s.voltage_start);
        r.get("voltage_stop", s.voltage_stop);
        r.get("voltage_step", s.voltage_step);
        r.get("angle_start_deg", s.angle_start_deg);
        r.get("angle_stop_deg", s.angle_stop_deg);
        r.get("angle_step_deg", s.angle_step_deg);
        r.get("delay_start_ns", s.delay_start_ns);
        r.get("delay_stop_ns", s.delay_stop_ns);
        r.get("delay_step_ns", s.delay_step_ns);
        r.get("shots_per_setting", s.shots_per_setting);
        r.get("tomography_resamples", s.tomography_resamples);
        r.get("restarts", s.restarts);
        r.get("deconvolution_cost_threshold", s.deconvolution_cost_threshold);
        r.get("stability_hours", s.stability_hours);
        r.get("stability_step_hours", s.stability_step_hours);
        r.get("drift_rates", s.drift_rates);
        r.finish();
    }
    c.validate();
    return c;
}

inline ExperimentConfig config_from_toml_string(std::string_view text) {
    try {
        return config_from_toml(toml::parse(text));
    } catch (const toml::parse_error& e) {
        throw ConfigurationError(std::string("TOML parse error: ") + std::string(e.description()));
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    try {
        return config_from_toml(toml::parse_file(path));
    } catch (const toml::parse_error& e) {
        throw ConfigurationError(path + ": " + std::string(e.description()));
    }
}

/// Full configuration as JSON, echoed into every summary.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    const auto& r = c.router;
    const auto& t = c.temporal;
    const auto& s = c.source;
    const auto& d = c.detector;
    const auto& f = c.fiber;
    const auto& u = c.run;
    return {
        {"router",
         {{"u_pi_volts", r.u_pi_volts}, {"push_pull", r.push_pull}, {"bs_transmittance", r.bs_transmittance},
          {"bs_in_loss_db", r.bs_in_loss_db}, {"bs_out_loss_db", r.bs_out_loss_db},
          {"mirror_loss_db", r.mirror_loss_db}, {"eom1_loss_db", r.eom1_loss_db}, {"eom2_loss_db", r.eom2_loss_db},
          {"misalignment_rad", r.misalignment_rad}, {"mode_overlap", r.mode_overlap},
          {"field_distortion", r.field_distortion}, {"phase_offset_rad", r.phase_offset_rad},
          {"drift_rate_rad_per_hour", r.drift_rate_rad_per_hour}, {"eoms_active", r.eoms_active},
          {"idle_misalignment_rad", r.idle_misalignment_rad}, {"idle_mode_overlap", r.idle_mode_overlap}}},
        {"temporal",
         {{"rise_10_90_ns", t.rise_10_90_ns}, {"fall_10_90_ns", t.fall_10_90_ns},
          {"delay_mismatch_ns", t.delay_mismatch_ns}, {"gate_width_ns", t.gate_width_ns}}},
        {"source",
         {{"mu", s.mu}, {"pair_rate_hz", s.pair_rate_hz}, {"rep_rate_hz", s.rep_rate_hz},
          {"eom_rate_hz", s.eom_rate_hz}, {"duty_cycle", s.duty_cycle}}},
        {"detector",
         {{"efficiency", d.efficiency}, {"herald_efficiency", d.herald_efficiency},
          {"dark_rate_hz", d.dark_rate_hz}, {"gate_window_s", d.gate_window_s}}},
        {"fiber", {{"rotation_rad", f.rotation_rad}, {"axis", f.axis}, {"depolarization", f.depolarization}}},
        {"run",
         {{"seed", u.seed}, {"point_duration_s", u.point_duration_s}, {"voltage_start", u.voltage_start},
          {"voltage_stop", u.voltage_stop}, {"voltage_step", u.voltage_step},
          {"angle_start_deg", u.angle_start_deg}, {"angle_stop_deg", u.angle_stop_deg},
          {"angle_step_deg", u.angle_step_deg}, {"delay_start_ns", u.delay_start_ns},
          {"delay_stop_ns", u.delay_stop_ns}, {"delay_step_ns", u.delay_step_ns},
          {"shots_per_setting", u.shots_per_setting}, {"tomography_resamples", u.tomography_resamples},
          {"restarts", u.restarts}, {"deconvolution_cost_threshold", u.deconvolution_cost_threshold},
          {"stability_hours", u.stability_hours}, {"stability_step_hours", u.stability_step_hours},
          {"drift_rates", u.drift_rates}}},
    };
}

}  // namespace polrouter
