#include <gtest/gtest.h>

#include "polrouter/config.hpp"
#include "polrouter/router.hpp"
#include "support/oracles.hpp"

using namespace polrouter;

namespace {

DensityMatrix2 random_state(Rng& rng) {
    std::normal_distribution<double> g;
    Eigen::Matrix2cd a;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) a(i, j) = cplx(g(rng), g(rng));
    Mat2 m = a * a.adjoint();
    return DensityMatrix2::from_matrix(m / m.trace().real(), 1e-12);
}

RouterConfig random_lossy_config(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RouterConfig c = ideal_router_config();
    c.bs_in = {0.3 + 0.4 * u(rng), 0.05 * u(rng)};
    c.bs_out = {0.3 + 0.4 * u(rng), 0.05 * u(rng)};
    c.mirror_loss = 0.05 * u(rng);
    c.eom1.insertion_loss = 0.05 * u(rng);
    c.eom2.insertion_loss = 0.05 * u(rng);
    c.set_imperfections({0.09 * (u(rng) - 0.5), 0.9 + 0.1 * u(rng), 0.1 * u(rng)});
    c.phase_offset = u(rng);
    c.push_pull = u(rng) < 0.5;
    return c;
}

struct MeasuredPortRow {
    const char* label;
    double e_db, e_err, v1, v1_err;  // V1 in percent
};

// Output port 1 at U_pi, then output port 2 at U = 0; H, D, R inputs.
constexpr std::array<MeasuredPortRow, 6> kMeasuredPorts{{{"1H", 22.2, 0.8, 98.80, 0.22},
                                           {"1D", 23.3, 1.0, 99.07, 0.20},
                                           {"1R", 22.6, 0.8, 98.90, 0.22},
                                           {"2H", 25.5, 1.0, 99.44, 0.14},
                                           {"2D", 28.3, 1.6, 99.70, 0.12},
                                           {"2R", 25.4, 1.2, 99.43, 0.16}}};

}  // namespace

TEST(RouterTransfer, IdealEndpoints) {
    const RouterConfig c = ideal_router_config();
    const ModeTransfer t0 = router_transfer(c, 0.0);
    EXPECT_NEAR(t0.block(2, 1).squaredNorm() / 2.0, 1.0, 1e-12);
    EXPECT_NEAR(t0.block(1, 1).squaredNorm(), 0.0, 1e-24);
    const ModeTransfer t1 = router_transfer(c, 960.0);
    EXPECT_NEAR(t1.block(1, 1).squaredNorm() / 2.0, 1.0, 1e-12);
    EXPECT_NEAR(t1.block(2, 1).squaredNorm(), 0.0, 1e-24);
    for (double u : {0.0, 123.0, 480.0, 960.0, 1500.0}) {
        const Mat4 m = router_transfer(c, u).matrix();
        EXPECT_TRUE(approx_equal(Mat4(m.adjoint() * m), Mat4::Identity(), 1e-12));
    }
}

TEST(RouteSinglePhoton, Examples) {
    const RouterConfig c = ideal_router_config();
    Rng rng = make_stream(31);
    for (int k = 0; k < 10; ++k) {
        const auto r = route_single_photon(c, random_state(rng), 1, 480.0);
        EXPECT_NEAR(r.p_out1, 0.5, 1e-12);
        EXPECT_NEAR(r.p_out2, 0.5, 1e-12);
    }
    const auto d = route_single_photon(c, DensityMatrix2::from_label(PolLabel::D), 1, 960.0);
    ASSERT_TRUE(d.rho_out1);
    EXPECT_TRUE(approx_equal(d.rho_out1->matrix(), DensityMatrix2::from_label(PolLabel::D).matrix(), 1e-12));
    EXPECT_FALSE(d.rho_out2);
    EXPECT_THROW(route_single_photon(c, DensityMatrix2::maximally_mixed(), 3, 0.0), UsageError);
}

TEST(RouteSinglePhoton, ModeOverlapSetsVisibility) {
    for (double mu : {1.0, 0.99, 0.9, 0.5}) {
        RouterConfig c = ideal_router_config();
        c.mode_overlap = mu;
        double lo = 1.0, hi = 0.0;
        for (int i = 0; i <= 400; ++i) {
            const double u = 2.0 * 960.0 * i / 400.0;
            const double p2 = route_single_photon(c, DensityMatrix2::from_label(PolLabel::H), 1, u).p_out2;
            lo = std::min(lo, p2);
            hi = std::max(hi, p2);
        }
        // p2 = (1 + mu cos(pi U / U_pi)) / 2
        EXPECT_NEAR((hi - lo) / (hi + lo), mu, 1e-12);
    }
}

TEST(RouteSinglePhoton, ProbabilityConservation) {
    Rng rng = make_stream(32);
    std::uniform_real_distribution<double> volt(-2000.0, 2000.0);
    for (int trial = 0; trial < 200; ++trial) {
        const RouterConfig c = random_lossy_config(rng);
        const auto r = route_single_photon(c, random_state(rng), 1 + trial % 2, volt(rng), 0.1 * trial);
        EXPECT_NEAR(r.p_out1 + r.p_out2 + r.loss_prob, 1.0, 1e-10);
        EXPECT_GE(r.loss_prob, -1e-12);
    }
}

TEST(RouteSinglePhoton, IdealPolarizationMaintenance) {
    const RouterConfig c = ideal_router_config();
    Rng rng = make_stream(33);
    for (int in = 1; in <= 2; ++in)
        for (double u : {0.0, 960.0}) {
            const int out = (u == 0.0) == (in == 1) ? 2 : 1;
            auto k = port_kraus(c, in, out, u);
            if (out == 2) k = invert_h_coordinate(k);
            EXPECT_GE(process_fidelity(ProcessMatrix::from_kraus(k), ProcessMatrix::identity()), 1.0 - 1e-9);
            for (int s = 0; s < 50; ++s) {
                const auto rho = random_state(rng);
                const auto r = route_single_photon(c, rho, in, u);
                const auto& o = out == 1 ? r.rho_out1 : r.rho_out2;
                ASSERT_TRUE(o);
                Mat2 m = o->matrix();
                if (out == 2) m = pauli(Pauli::Z) * m * pauli(Pauli::Z);
                EXPECT_GE(state_fidelity(DensityMatrix2::from_matrix(m, 1e-10), rho), 1.0 - 1e-9);
            }
        }
}

TEST(RouteSinglePhoton, Port2WithoutInversionIsSigmaZ) {
    const RouterConfig c = ideal_router_config();
    const auto raw = ProcessMatrix::from_kraus(port_kraus(c, 1, 2, 0.0));
    EXPECT_NEAR(process_fidelity(raw, ProcessMatrix::pauli_channel(Pauli::Z)), 1.0, 1e-12);
    EXPECT_NEAR(process_fidelity(routing_process(c, 1, 2), ProcessMatrix::identity()), 1.0, 1e-12);
}

TEST(SwitchingCurve, IdealIsExactSine) {
    const RouterConfig c = ideal_router_config();
    std::vector<double> grid;
    for (int i = 0; i < 1000; ++i) grid.push_back(1200.0 * i / 999.0);
    std::vector<std::vector<SwitchingPoint>> curves;
    for (PolLabel p : {PolLabel::H, PolLabel::D, PolLabel::R}) curves.push_back(switching_curve(c, p, 1, grid));
    double worst = 0.0, gap = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double s = std::sin(kPi * grid[i] / (2.0 * 960.0));
        for (const auto& cv : curves) worst = std::max(worst, std::abs(cv[i].p1 - s * s));
        gap = std::max({gap, std::abs(curves[0][i].p1 - curves[1][i].p1), std::abs(curves[0][i].p1 - curves[2][i].p1)});
    }
    EXPECT_LT(worst, 1e-12);
    EXPECT_LT(gap, 1e-12);
    const auto ends = switching_curve(c, PolLabel::H, 1, {0.0, 480.0});
    EXPECT_NEAR(ends[0].p1, 0.0, 1e-12);
    EXPECT_NEAR(ends[0].p2, 1.0, 1e-12);
    EXPECT_NEAR(ends[1].p1, 0.5, 1e-12);
}

TEST(SwitchingCurve, NonPushPullUsesFullVoltageOnOneArm) {
    // Same differential phase for the same total U, on one crystal instead of two.
    RouterConfig c = ideal_router_config();
    c.push_pull = false;
    EXPECT_NEAR(half_wave_voltage(c), 960.0, 1e-9);
    const std::vector<double> u{0.0, 240.0, 480.0, 960.0, 1100.0};
    const auto a = switching_curve(c, PolLabel::D, 1, u);
    const auto b = switching_curve(ideal_router_config(), PolLabel::D, 1, u);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(a[i].p1, b[i].p1, 1e-12);
}

TEST(SerVisibility, Examples) {
    auto a = ser_and_visibility(100, 100);
    EXPECT_NEAR(a.e_db, 0.0, 1e-15);
    EXPECT_NEAR(a.v1, 0.0, 1e-15);
    auto b = ser_and_visibility(990, 10);
    EXPECT_NEAR(b.e_db, 10.0 * std::log10(99.0), 1e-12);
    EXPECT_NEAR(b.e_db, 19.956, 1e-3);
    EXPECT_NEAR(b.v1, 0.98, 1e-15);
    // V1 = 0.988 -> E = 10 log10(1.988 / 0.012)
    auto c = ser_and_visibility(0.994, 0.006);
    EXPECT_NEAR(c.e_db, 22.2, 0.05);
    EXPECT_TRUE(std::isinf(ser_and_visibility(5, 0).e_db));
    EXPECT_THROW(ser_and_visibility(0, 0), UsageError);
    EXPECT_THROW(ser_and_visibility(-1, 2), UsageError);
}

TEST(SerVisibility, DualityOnRandomCounts) {
    Rng rng = make_stream(34);
    std::uniform_real_distribution<double> u(1.0, 1e6);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto r = ser_and_visibility(u(rng), u(rng));
        if (r.v1 == 0.0) continue;
        EXPECT_NEAR(std::pow(10.0, r.e_db / 10.0), (1.0 + r.v1) / (1.0 - r.v1),
                    1e-9 * (1.0 + r.v1) / (1.0 - r.v1));
    }
}

TEST(SerVisibility, MeasuredPairsSatisfyDuality) {
    for (const auto& row : kMeasuredPorts) {
        const double v = row.v1 / 100.0;
        const double e_from_v = 10.0 * std::log10((1.0 + v) / (1.0 - v));
        // propagate the V1 uncertainty and add the quoted E uncertainty
        const double de_dv = 10.0 / std::log(10.0) * 2.0 / ((1.0 + v) * (1.0 - v));
        const double tol = std::hypot(row.e_err, de_dv * row.v1_err / 100.0);
        EXPECT_LE(std::abs(e_from_v - row.e_db), tol) << row.label;
    }
}

TEST(LossBudget, MeasuredLosses) {
    const RouterConfig c = ExperimentConfig{}.router_config();
    const auto b = insertion_loss_budget(c);
    EXPECT_NEAR(b.total_db, 0.057, 1e-3);
    EXPECT_NEAR(b.eom_average_db, 0.026, 1e-3);
    EXPECT_EQ(b.rows().back().element, "total");
    EXPECT_NEAR(insertion_loss_budget(ideal_router_config()).total_db, 0.0, 1e-15);
    // The budget is the mean transmission loss of the two arms.
    const auto r = route_single_photon(c, DensityMatrix2::maximally_mixed(), 1, 0.0);
    const double budget_t = std::pow(10.0, -b.total_db / 10.0);
    EXPECT_NEAR(r.p_out1 + r.p_out2, budget_t, 2e-5);
}

TEST(Imperfections, MonotoneDegradation) {
    const double u_pi = 960.0;
    double prev_eps = 1.0;
    for (double eps = 0.0; eps <= 0.09; eps += 0.01) {
        RouterConfig c = ideal_router_config();
        c.set_imperfections({eps, 1.0, 0.0});
        const auto r = route_single_photon(c, DensityMatrix2::from_label(PolLabel::D), 1, u_pi);
        const double v = ser_and_visibility(r.p_out1, r.p_out2).v1;
        EXPECT_LE(v, prev_eps + 1e-12);
        prev_eps = v;
        double prev_mu = 1.0;
        for (double m = 1.0; m >= 0.9; m -= 0.01) {
            c.mode_overlap = m;
            const auto q = route_single_photon(c, DensityMatrix2::from_label(PolLabel::D), 1, u_pi);
            const double w = ser_and_visibility(q.p_out1, q.p_out2).v1;
            EXPECT_LE(w, prev_mu + 1e-12);
            prev_mu = w;
        }
    }
}

TEST(Imperfections, IdleSetReplacesActiveSet) {
    RouterConfig c = ExperimentConfig{}.router_config();
    c.eoms_active = false;
    const auto r = route_single_photon(c, DensityMatrix2::from_label(PolLabel::H), 1, 0.0);
    const auto sv = ser_and_visibility(r.p_out1, r.p_out2);
    EXPECT_GT(sv.v1, 0.998);
    EXPECT_GT(sv.e_db, 30.0);
}

TEST(Imperfections, CalibrationReproducesFrozenDefaults) {
    const CalibrationTargets t{(98.80 + 99.07 + 98.90) / 300.0, (99.44 + 99.70 + 99.43) / 300.0,
                               (99.56 + 99.68 + 99.32 + 99.61) / 400.0};
    RouterConfig base = ExperimentConfig{}.router_config();
    const Imperfections imp = calibrate_imperfections(base, t);
    EXPECT_NEAR(imp.misalignment, kCalibratedImperfections.misalignment, 1e-9);
    EXPECT_NEAR(imp.mode_overlap, kCalibratedImperfections.mode_overlap, 1e-9);
    EXPECT_NEAR(imp.field_distortion, kCalibratedImperfections.field_distortion, 1e-9);
    base.set_imperfections(imp);
    EXPECT_NEAR(mean_port_visibility(base, 1), t.port1_visibility, 1e-9);
    EXPECT_NEAR(mean_port_visibility(base, 2), t.port2_visibility, 1e-9);
    EXPECT_NEAR(mean_routing_fidelity(base), t.mean_fidelity, 1e-9);
    for (int i = 1; i <= 2; ++i)
        for (int o = 1; o <= 2; ++o)
            EXPECT_GE(process_fidelity(routing_process(base, i, o), ProcessMatrix::identity()), 0.993);
    EXPECT_THROW(calibrate_imperfections(base, {t.port1_visibility, t.port2_visibility, 0.5}), ConfigurationError);
}

TEST(Router, Drift) {
    RouterConfig c = ideal_router_config();
    c.drift_rate = kPi;  // rad per hour
    const auto r = route_single_photon(c, DensityMatrix2::from_label(PolLabel::H), 1, 0.0, 1.0);
    EXPECT_NEAR(r.p_out1, 1.0, 1e-12);
}

TEST(Router, ValidationRejectsBadConfigs) {
    RouterConfig c = ideal_router_config();
    c.mode_overlap = 1.5;
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = ideal_router_config();
    c.mirror_loss = -0.1;
    EXPECT_THROW(c.validate(), ConfigurationError);
}
