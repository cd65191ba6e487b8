#pragma once

// Experiment runners.  Each experiment has a simulate_* function returning
// its data and a writer that emits CSV/JSON tables plus summary.json.

#include <ceres/version.h>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "polrouter/config.hpp"
#include "polrouter/deconvolve.hpp"
#include "polrouter/fit.hpp"
#include "polrouter/multiphoton.hpp"
#include "polrouter/polmath_json.hpp"
#include "polrouter/random.hpp"
#include "polrouter/rates.hpp"
#include "polrouter/router.hpp"
#include "polrouter/temporal.hpp"
#include "polrouter/tomography.hpp"

namespace polrouter {

inline constexpr const char* kVersion = "1.0.0";

// HWP angle frequency of a two-photon fringe: the plate turns the
// polarization by 2 theta and the N = 2 phase doubles it again.
inline constexpr double kNoonFringeOmega = 8.0;

enum class Experiment { SwitchingCurve, RiseFall, ProcessTomography, Deconvolve, NoonFringe, LossBudget, Stability };

inline const std::array<std::pair<const char*, Experiment>, 7> kExperimentNames{{
    {"switching-curve", Experiment::SwitchingCurve},
    {"rise-fall", Experiment::RiseFall},
    {"process-tomography", Experiment::ProcessTomography},
    {"deconvolve", Experiment::Deconvolve},
    {"noon-fringe", Experiment::NoonFringe},
    {"loss-budget", Experiment::LossBudget},
    {"stability", Experiment::Stability},
}};

inline Experiment experiment_from_name(std::string_view name) {
    for (const auto& [n, e] : kExperimentNames)
        if (name == n) return e;
    throw UsageError("unknown experiment '" + std::string(name) + "'");
}

inline std::string experiment_name(Experiment e) {
    for (const auto& [n, x] : kExperimentNames)
        if (x == e) return n;
    return "?";
}

enum class OutputFormat { Csv, Json };

struct ExperimentOptions {
    std::filesystem::path out_dir = ".";
    bool analytic = false;
    OutputFormat format = OutputFormat::Csv;
};

/// Independent sub-seed for a named part of an experiment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) { return make_stream(seed, tag)(); }

// ---------------------------------------------------------------------------
// Tables

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
    std::string name;  // file stem
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

inline std::string format_cell(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    const double v = std::get<double>(c);
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

inline void write_csv(std::ostream& os, const Table& t) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
        os << '\n';
    }
}

/// Non-finite values become null.
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json table_to_json(const Table& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& c : row) std::visit([&](const auto& v) {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, double>) r.push_back(finite_or_null(v));
            else r.push_back(v);
        }, c);
        rows.push_back(r);
    }
    return {{"columns", t.columns}, {"rows", rows}};
}

// ---------------------------------------------------------------------------
// Switching curve

struct PortMeasurement {
    double s1 = 0.0, s2 = 0.0;  // counts; fractional in analytic mode
    double e_db = 0.0, e_err = 0.0, v1 = 0.0, v1_err = 0.0;
};

struct SwitchingSeries {
    PolLabel input = PolLabel::H;
    std::vector<double> voltage, p1, p2, sigma;
    SinusoidFit fit;
    double u_pi_fit = 0.0, u_pi_err = 0.0;
    PortMeasurement port1;  // at U_pi
    PortMeasurement port2;  // at U = 0
};

struct SwitchingData {
    std::vector<SwitchingSeries> series;  // H, D, R
};

namespace detail {
inline std::array<double, 2> detected(double p1, double p2, const RateModel& rm, double duration, bool analytic,
                                      std::uint64_t seed, std::uint64_t index) {
    const double s = p1 + p2;
    if (!(s > 0.0)) throw AnalysisError("no photons reach either output");
    std::array<double, 2> out{};
    const std::array<double, 2> p{p1 / s, p2 / s};
    for (int k = 0; k < 2; ++k) {
        const double rate = rm.coincidences * p[k] + 0.5 * rm.accidentals;
        if (analytic) {
            out[k] = rate * duration;
        } else {
            Rng rng = make_stream(seed, index + static_cast<std::uint64_t>(k));
            out[k] = static_cast<double>(poisson_counts(rate, duration, rng));
        }
    }
    return out;
}

inline PortMeasurement port_measurement(double s1, double s2) {
    PortMeasurement m;
    m.s1 = s1;
    m.s2 = s2;
    const double n = s1 + s2;
    if (!(n > 0.0)) throw AnalysisError("no counts in the visibility measurement");
    const auto sv = ser_and_visibility(s1, s2);
    m.e_db = sv.e_db;
    m.v1 = sv.v1;
    const double p = std::max(s1, s2) / n;
    m.v1_err = 2.0 * std::sqrt(p * (1.0 - p) / n);
    const double lo = std::min(s1, s2), hi = std::max(s1, s2);
    m.e_err = lo > 0.0 ? 10.0 / std::log(10.0) * std::sqrt(1.0 / lo + 1.0 / hi) : std::numeric_limits<double>::infinity();
    return m;
}
}  // namespace detail

/// Port-1 probability versus voltage for H, D and R inputs at input port 1,
/// plus fixed-voltage visibility measurements at U_pi (port 1) and U = 0
/// (port 2).  Every (input, point, port) has its own random stream.
inline SwitchingData simulate_switching(const ExperimentConfig& cfg, bool analytic, std::uint64_t seed) {
    const RouterConfig rc = cfg.router_config();
    const RateModel rm = heralded_rate_model(cfg);
    const double dur = cfg.run.point_duration_s;
    const auto grid = make_grid(cfg.run.voltage_start, cfg.run.voltage_stop, cfg.run.voltage_step);
    const double u_pi = half_wave_voltage(rc);
    SwitchingData data;
    std::uint64_t pol_index = 0;
    for (PolLabel pol : {PolLabel::H, PolLabel::D, PolLabel::R}) {
        SwitchingSeries s;
        s.input = pol;
        const DensityMatrix2 rho = DensityMatrix2::from_label(pol);
        const std::uint64_t base = pol_index << 32;
        std::vector<FitPoint> pts;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const RoutingResult r = route_single_photon(rc, rho, 1, grid[i]);
            const auto c = detail::detected(r.p_out1, r.p_out2, rm, dur, analytic, seed, base + 2 * i);
            const double n = c[0] + c[1];
            if (!(n > 0.0)) throw AnalysisError("no counts at U = " + format_cell(grid[i]) + " V");
            const double p1 = c[0] / n;
            s.voltage.push_back(grid[i]);
            s.p1.push_back(p1);
            s.p2.push_back(c[1] / n);
            // binomial error, floored at one count
            const double sig = analytic ? 0.0 : std::sqrt(std::max(p1 * (1.0 - p1), 1.0 / n) / n);
            s.sigma.push_back(sig);
            pts.push_back({grid[i], p1, sig});
        }
        SinusoidFitOptions fo;
        fo.omega_seed = kPi / u_pi;
        s.fit = sinusoid_fit(pts, fo);
        // P1 peaks where omega U + phi0 = pi
        s.u_pi_fit = (kPi - s.fit.phase) / s.fit.omega;
        const Eigen::Vector2d g(-s.u_pi_fit / s.fit.omega, -1.0 / s.fit.omega);
        Eigen::Matrix2d c;
        c << s.fit.covariance(2, 2), s.fit.covariance(2, 3), s.fit.covariance(3, 2), s.fit.covariance(3, 3);
        s.u_pi_err = std::sqrt(g.dot(c * g));

        const std::uint64_t fixed = base | (std::uint64_t{1} << 31);
        const RoutingResult a = route_single_photon(rc, rho, 1, u_pi);
        const auto ca = detail::detected(a.p_out1, a.p_out2, rm, dur, analytic, seed, fixed);
        s.port1 = detail::port_measurement(ca[0], ca[1]);
        const RoutingResult b = route_single_photon(rc, rho, 1, 0.0);
        const auto cb = detail::detected(b.p_out1, b.p_out2, rm, dur, analytic, seed, fixed + 2);
        s.port2 = detail::port_measurement(cb[0], cb[1]);
        data.series.push_back(std::move(s));
        ++pol_index;
    }
    return data;
}

// ---------------------------------------------------------------------------
// Rise and fall

struct RiseFallData {
    std::vector<TemporalPoint> model;     // expected curve
    std::vector<TemporalPoint> measured;  // counts / expected full-on counts
    EdgeTimes model_edges, measured_edges;
    bool plateau = false;  // detected on the model curve
};

inline RiseFallData simulate_rise_fall(const ExperimentConfig& cfg, bool analytic, std::uint64_t seed) {
    const RouterConfig rc = cfg.router_config();
    const auto delays_ns = make_grid(cfg.run.delay_start_ns, cfg.run.delay_stop_ns, cfg.run.delay_step_ns);
    std::vector<double> delays;
    for (double d : delays_ns) delays.push_back(d * 1e-9);
    RiseFallData out;
    out.model = temporal_response(rc, cfg.temporal_config(), delays);
    const double full = heralded_rate_model(cfg).coincidences * cfg.run.point_duration_s;
    if (!(full > 0.0)) throw AnalysisError("zero coincidence rate");
    for (std::size_t i = 0; i < out.model.size(); ++i) {
        double v = out.model[i].rate_norm;
        if (!analytic) {
            Rng rng = make_stream(seed, i);
            v = static_cast<double>(poisson_counts(full * v, 1.0, rng)) / full;
        }
        out.measured.push_back({out.model[i].delay, v});
    }
    out.model_edges = extract_10_90(out.model);
    out.measured_edges = extract_10_90(out.measured);
    out.plateau = has_mid_edge_plateau(out.model);
    return out;
}

// ---------------------------------------------------------------------------
// Process tomography and deconvolution

struct TomographyResult {
    int in_port = 1, out_port = 1;
    ProcessReconstruction rec;
    std::uint64_t seed = 0;
    double fidelity = 0.0;      // to identity
    double fidelity_err = 0.0;  // spread over resampled datasets
};

namespace detail {
inline std::optional<std::uint64_t> dataset_seed(bool analytic, std::uint64_t seed, std::uint64_t tag) {
    if (analytic) return std::nullopt;
    return derive_seed(seed, tag);
}

inline double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline MleOptions mle_options(const ExperimentConfig& cfg, std::uint64_t seed) {
    MleOptions o;
    o.restarts = cfg.run.restarts;
    o.seed = seed;
    o.target = ProcessMatrix::identity();
    return o;
}

/// Fidelity to identity of an MLE fit, with the spread over `resamples`
/// independently sampled datasets from `make`.
template <typename Make>
std::pair<ProcessReconstruction, double> reconstruct(const ExperimentConfig& cfg, bool analytic, std::uint64_t seed,
                                                     std::uint64_t tag, Make&& make) {
    auto rec = mle_process_tomography(make(dataset_seed(analytic, seed, tag)), mle_options(cfg, seed));
    double err = 0.0;
    if (!analytic && cfg.run.tomography_resamples > 1) {
        std::vector<double> f;
        for (int r = 1; r <= cfg.run.tomography_resamples; ++r) {
            const auto d = make(dataset_seed(false, seed, tag + 1000 * static_cast<std::uint64_t>(r)));
            f.push_back(*mle_process_tomography(d, mle_options(cfg, seed)).fidelity_to_target);
        }
        err = stddev(f);
    }
    return {rec, err};
}
}  // namespace detail

/// Router channels for the four port combinations, output port 2 read in the
/// inverted-H frame.
inline std::vector<TomographyResult> simulate_process_tomography(const ExperimentConfig& cfg, bool analytic,
                                                                 std::uint64_t seed) {
    const RouterConfig rc = cfg.router_config();
    std::vector<TomographyResult> out;
    for (int i = 1; i <= 2; ++i)
        for (int o = 1; o <= 2; ++o) {
            auto k = port_kraus(rc, i, o, routing_voltage(rc, i, o));
            if (o == 2) k = invert_h_coordinate(std::move(k));
            const std::uint64_t tag = static_cast<std::uint64_t>(10 * i + o);
            auto [rec, err] = detail::reconstruct(cfg, analytic, seed, tag, [&](auto s) {
                return simulate_tomography(k, cfg.run.shots_per_setting, s);
            });
            TomographyResult t;
            t.in_port = i;
            t.out_port = o;
            t.seed = seed;
            t.fidelity = *rec.fidelity_to_target;
            t.fidelity_err = err;
            t.rec = std::move(rec);
            out.push_back(std::move(t));
        }
    return out;
}

struct DeconvolutionResult {
    int in_port = 1, out_port = 1;
    ProcessReconstruction total, fiber, router;
    double f_total = 0.0, f_fiber = 0.0, f_router = 0.0;  // to identity
    double f_router_true = 0.0;                            // recovered vs simulated router
};

inline std::vector<DeconvolutionResult> simulate_deconvolution(const ExperimentConfig& cfg, bool analytic,
                                                               std::uint64_t seed) {
    const RouterConfig rc = cfg.router_config();
    const ProcessMatrix fiber = cfg.fiber_process();
    std::vector<DeconvolutionResult> out;
    for (int i = 1; i <= 2; ++i)
        for (int o = 1; o <= 2; ++o) {
            const ProcessMatrix router = routing_process(rc, i, o);
            const ProcessMatrix total = compose_processes(fiber, router);
            const std::uint64_t tag = static_cast<std::uint64_t>(100 * i + 10 * o);
            const double shots = cfg.run.shots_per_setting;
            DeconvolutionResult r;
            r.in_port = i;
            r.out_port = o;
            r.total = mle_process_tomography(simulate_tomography(total, shots, detail::dataset_seed(analytic, seed, tag)),
                                             detail::mle_options(cfg, seed));
            r.fiber = mle_process_tomography(
                simulate_tomography(fiber, shots, detail::dataset_seed(analytic, seed, tag + 1)),
                detail::mle_options(cfg, seed));
            DeconvolutionOptions d;
            d.restarts = cfg.run.restarts;
            d.seed = derive_seed(seed, tag + 2);
            d.cost_threshold = analytic ? 1e-6 : cfg.run.deconvolution_cost_threshold;
            d.target = ProcessMatrix::identity();
            r.router = deconvolve_fiber(r.total.chi, r.fiber.chi, d);
            r.f_total = *r.total.fidelity_to_target;
            r.f_fiber = *r.fiber.fidelity_to_target;
            r.f_router = *r.router.fidelity_to_target;
            r.f_router_true = process_fidelity(r.router.chi, router);
            out.push_back(std::move(r));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Two-photon fringe

struct FringeSeries {
    std::string label;  // in, out1, out2
    std::vector<double> angle_deg, rate, err;
    FringeVisibility vis;
};

struct NoonData {
    std::vector<FringeSeries> series;
};

/// N00N fringes at the router input, at output 1 (U = U_pi) and output 2
/// (U = 0).  Rates are two-photon coincidences per second.
inline NoonData simulate_noon(const ExperimentConfig& cfg, bool analytic, std::uint64_t seed) {
    const RouterConfig rc = cfg.router_config();
    const RateModel rm = heralded_rate_model(cfg);
    const auto& s = cfg.source;
    const double base = s.pair_rate_hz * s.duty_cycle * cfg.detector.efficiency * cfg.detector.efficiency;
    const double dur = cfg.run.point_duration_s;
    const auto deg = make_grid(cfg.run.angle_start_deg, cfg.run.angle_stop_deg, cfg.run.angle_step_deg);
    std::vector<double> rad;
    for (double d : deg) rad.push_back(d * kPi / 180.0);
    const TwoPhotonState in = noon_state(s.mu);
    const double u_pi = half_wave_voltage(rc);
    struct Case {
        const char* label;
        TwoPhotonState state;
        int port;
    };
    const std::array<Case, 3> cases{{{"in", in, 1},
                                     {"out1", route_two_photon(rc, in, u_pi), 1},
                                     {"out2", route_two_photon(rc, in, 0.0), 2}}};
    NoonData data;
    std::uint64_t ci = 0;
    for (const auto& c : cases) {
        FringeSeries fs;
        fs.label = c.label;
        const FringeScan scan = coincidence_fringe(c.state, rad, Analyzer{c.port});
        FringeScan measured;
        std::vector<double> sigma;
        for (std::size_t i = 0; i < scan.size(); ++i) {
            const double rate = base * scan[i].rate + rm.twofold_accidentals;
            double r = rate, e = 0.0;
            if (!analytic) {
                Rng rng = make_stream(seed, (ci << 32) + i);
                const auto n = poisson_counts(rate, dur, rng);
                r = static_cast<double>(n) / dur;
                e = std::sqrt(static_cast<double>(std::max<std::int64_t>(n, 1))) / dur;
            }
            fs.angle_deg.push_back(deg[i]);
            fs.rate.push_back(r);
            fs.err.push_back(e);
            measured.push_back({scan[i].angle, r});
            sigma.push_back(e);
        }
        fs.vis = fringe_visibility(measured, kNoonFringeOmega, analytic ? std::vector<double>{} : sigma);
        data.series.push_back(std::move(fs));
        ++ci;
    }
    return data;
}

// ---------------------------------------------------------------------------
// Stability

struct StabilityRow {
    double drift = 0.0, time_h = 0.0, p1 = 0.0, p2 = 0.0;
};

/// CW light at input port 1 with the EOMs idle; normalized port powers versus
/// time for each drift rate.  Synthetic: no noise model for the hardware drift.
inline std::vector<StabilityRow> simulate_stability(const ExperimentConfig& cfg) {
    RouterConfig rc = cfg.router_config();
    rc.eoms_active = false;
    const auto times = make_grid(0.0, cfg.run.stability_hours, cfg.run.stability_step_hours);
    const DensityMatrix2 rho = DensityMatrix2::maximally_mixed();
    std::vector<StabilityRow> rows;
    for (double d : cfg.run.drift_rates) {
        rc.drift_rate = d;
        for (double t : times) {
            const RoutingResult r = route_single_photon(rc, rho, 1, 0.0, t);
            const double s = r.p_out1 + r.p_out2;
            rows.push_back({d, t, r.p_out1 / s, r.p_out2 / s});
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Runner

struct ExperimentResult {
    nlohmann::json summary;
    std::vector<std::filesystem::path> files;
};

inline nlohmann::json versions_json() {
    return {{"polrouter", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"ceres", CERES_VERSION_STRING},
            {"tomlplusplus", std::to_string(TOML_LIB_MAJOR) + "." + std::to_string(TOML_LIB_MINOR) + "." +
                                 std::to_string(TOML_LIB_PATCH)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}};
}

namespace detail {
class Emitter {
public:
    Emitter(const ExperimentOptions& opt, ExperimentResult& res) : opt_(opt), res_(res) {}

    void table(const Table& t) {
        const bool csv = opt_.format == OutputFormat::Csv;
        const auto path = opt_.out_dir / (t.name + (csv ? ".csv" : ".json"));
        std::ofstream os(path, std::ios::binary);
        if (!os) throw UsageError("cannot write " + path.string());
        if (csv) write_csv(os, t);
        else os << table_to_json(t).dump(2) << '\n';
        res_.files.push_back(path);
    }

    void json(const std::string& name, const nlohmann::json& j) {
        const auto path = opt_.out_dir / (name + ".json");
        std::ofstream os(path, std::ios::binary);
        if (!os) throw UsageError("cannot write " + path.string());
        os << j.dump(2) << '\n';
        res_.files.push_back(path);
    }

private:
    const ExperimentOptions& opt_;
    ExperimentResult& res_;
};

inline nlohmann::json chi_json(const ProcessReconstruction& r, std::uint64_t seed) {
    nlohmann::json j = process_to_json(r.chi);
    j["log_likelihood"] = finite_or_null(r.log_likelihood);
    j["converged"] = r.converged;
    j["seed"] = seed;
    j["tp_residual"] = r.tp_residual;
    if (r.fidelity_to_target) j["fidelity_to_identity"] = *r.fidelity_to_target;
    return j;
}

inline nlohmann::json port_json(const PortMeasurement& m) {
    return {{"S1", m.s1}, {"S2", m.s2}, {"E_db", finite_or_null(m.e_db)}, {"E_err_db", finite_or_null(m.e_err)},
            {"V1", m.v1}, {"V1_err", m.v1_err}};
}

inline std::string combo(int i, int o) { return std::to_string(i) + std::to_string(o); }
}  // namespace detail

inline nlohmann::json switching_metrics(const SwitchingData& d) {
    nlohmann::json m;
    for (const auto& s : d.series) {
        const std::string p(1, to_char(s.input));
        m["port1"][p] = detail::port_json(s.port1);
        m["port2"][p] = detail::port_json(s.port2);
        m["fit"][p] = {{"visibility", s.fit.visibility}, {"visibility_err", s.fit.visibility_err},
                       {"amplitude", s.fit.amplitude}, {"u_pi_volts", s.u_pi_fit}, {"u_pi_err", s.u_pi_err},
                       {"chi2_per_dof", s.fit.chi2_per_dof()}};
    }
    return m;
}

/// Runs one experiment and writes its files plus summary.json into
/// `opt.out_dir`.  The seed is cfg.run.seed.
inline ExperimentResult run_experiment(Experiment e, const ExperimentConfig& cfg, const ExperimentOptions& opt = {}) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    if (ec) throw UsageError("cannot create output directory " + opt.out_dir.string() + ": " + ec.message());
    const std::uint64_t seed = cfg.run.seed;
    ExperimentResult res;
    detail::Emitter out(opt, res);
    nlohmann::json metrics;
    bool synthetic = false;

    switch (e) {
        case Experiment::SwitchingCurve: {
            const auto d = simulate_switching(cfg, opt.analytic, seed);
            for (const auto& s : d.series) {
                Table t{"switching_curve_" + std::string(1, to_char(s.input)), {"U_volts", "P1", "P2"}, {}};
                for (std::size_t i = 0; i < s.voltage.size(); ++i) t.rows.push_back({s.voltage[i], s.p1[i], s.p2[i]});
                out.table(t);
            }
            metrics = switching_metrics(d);
            break;
        }
        case Experiment::RiseFall: {
            const auto d = simulate_rise_fall(cfg, opt.analytic, seed);
            Table t{"rise_fall", {"delay_ns", "rate_norm"}, {}};
            for (const auto& p : d.measured) t.rows.push_back({p.delay * 1e9, p.rate_norm});
            out.table(t);
            metrics = {{"rise_ns", d.measured_edges.rise * 1e9},
                       {"fall_ns", d.measured_edges.fall * 1e9},
                       {"model_rise_ns", d.model_edges.rise * 1e9},
                       {"model_fall_ns", d.model_edges.fall * 1e9},
                       {"mid_edge_plateau", d.plateau}};
            break;
        }
        case Experiment::ProcessTomography: {
            for (const auto& r : simulate_process_tomography(cfg, opt.analytic, seed)) {
                const auto c = detail::combo(r.in_port, r.out_port);
                out.json("chi_" + c, detail::chi_json(r.rec, r.seed));
                metrics["fidelity"][c] = {{"value", r.fidelity}, {"err", r.fidelity_err},
                                          {"converged", r.rec.converged}};
            }
            break;
        }
        case Experiment::Deconvolve: {
            for (const auto& r : simulate_deconvolution(cfg, opt.analytic, seed)) {
                const auto c = detail::combo(r.in_port, r.out_port);
                out.json("chi_T_" + c, detail::chi_json(r.total, seed));
                out.json("chi_F_" + c, detail::chi_json(r.fiber, seed));
                auto jr = detail::chi_json(r.router, seed);
                jr["cost"] = r.router.cost;
                out.json("chi_R_" + c, jr);
                metrics["fidelity"][c] = {{"chi_T", r.f_total}, {"chi_F", r.f_fiber}, {"chi_R", r.f_router},
                                          {"chi_R_vs_simulated", r.f_router_true}, {"cost", r.router.cost},
                                          {"converged", r.router.converged}};
            }
            break;
        }
        case Experiment::NoonFringe: {
            for (const auto& s : simulate_noon(cfg, opt.analytic, seed).series) {
                Table t{"noon_fringe_" + s.label, {"hwp_deg", "coincidence_rate", "poisson_err"}, {}};
                for (std::size_t i = 0; i < s.rate.size(); ++i) t.rows.push_back({s.angle_deg[i], s.rate[i], s.err[i]});
                out.table(t);
                metrics["V2"][s.label] = {{"value", s.vis.v2}, {"err", s.vis.fit.visibility_err},
                                          {"max_rate", s.vis.fit.amplitude * (1.0 + s.vis.v2)},
                                          {"chi2_per_dof", s.vis.fit.chi2_per_dof()}};
            }
            break;
        }
        case Experiment::LossBudget: {
            const auto b = insertion_loss_budget(cfg.router_config());
            Table t{"loss_budget", {"element", "loss_db"}, {}};
            for (const auto& r : b.rows()) t.rows.push_back({r.element, r.loss_db});
            out.table(t);
            metrics = {{"total_db", b.total_db}, {"eom_average_db", b.eom_average_db},
                       {"other_optics_db", b.other_optics_db}};
            break;
        }
        case Experiment::Stability: {
            synthetic = true;
            Table t{"stability", {"drift_rad_per_hour", "time_h", "P1_norm", "P2_norm"}, {}};
            nlohmann::json dev;
            double worst = 0.0, last_drift = std::numeric_limits<double>::quiet_NaN();
            double p2_start = 0.0;
            for (const auto& r : simulate_stability(cfg)) {
                t.rows.push_back({r.drift, r.time_h, r.p1, r.p2});
                if (r.drift != last_drift) {
                    if (!std::isnan(last_drift)) dev.push_back({{"drift_rad_per_hour", last_drift}, {"max_dP2", worst}});
                    last_drift = r.drift;
                    p2_start = r.p2;
                    worst = 0.0;
                }
                worst = std::max(worst, std::abs(r.p2 - p2_start));
            }
            if (!std::isnan(last_drift)) dev.push_back({{"drift_rad_per_hour", last_drift}, {"max_dP2", worst}});
            out.table(t);
            metrics = {{"drift_sweep", dev}};
            break;
        }
    }

    res.summary = {{"experiment", experiment_name(e)}, {"seed", seed},       {"analytic", opt.analytic},
                   {"synthetic", synthetic},           {"metrics", metrics}, {"config_echo", config_to_json(cfg)},
                   {"versions", versions_json()}};
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : res.files) files.push_back(f.filename().string());
    res.summary["files"] = files;
    out.json("summary", res.summary);
    return res;
}

inline ExperimentResult run_experiment(std::string_view name, const ExperimentConfig& cfg,
                                       const ExperimentOptions& opt = {}) {
    return run_experiment(experiment_from_name(name), cfg, opt);
}

}  // namespace polrouter
