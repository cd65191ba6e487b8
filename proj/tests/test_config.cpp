#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "polrouter/config.hpp"

using namespace polrouter;

TEST(Config, DefaultsValidate) {
    const ExperimentConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.router.u_pi_volts, 960.0);
    EXPECT_EQ(c.temporal.rise_10_90_ns, 3.3);
    EXPECT_EQ(c.temporal.fall_10_90_ns, 3.1);
    EXPECT_EQ(c.source.mu, 0.968);
    EXPECT_NEAR(c.detector.dark_rate_hz * c.detector.gate_window_s, 1e-6, 1e-18);
    const auto r = c.router_config();
    EXPECT_EQ(r.imperfections().mode_overlap, kCalibratedImperfections.mode_overlap);
    EXPECT_NO_THROW(ProcessMatrix::from_matrix(c.fiber_process().matrix(), true));
}

TEST(Config, ParsesToml) {
    const auto c = config_from_toml_string(R"(
[router]
u_pi_volts = 1000.0
push_pull = false
mode_overlap = 0.99

[source]
mu = 0.9

[run]
seed = 42
drift_rates = [0.0, 0.5]
)");
    EXPECT_EQ(c.router.u_pi_volts, 1000.0);
    EXPECT_FALSE(c.router.push_pull);
    EXPECT_EQ(c.router.mode_overlap, 0.99);
    EXPECT_EQ(c.source.mu, 0.9);
    EXPECT_EQ(c.run.seed, 42u);
    EXPECT_EQ(c.run.drift_rates, (std::vector<double>{0.0, 0.5}));
    EXPECT_EQ(c.temporal.gate_width_ns, 10.0);  // untouched default
}

TEST(Config, IntegerValuesAcceptedForFloats) {
    const auto c = config_from_toml_string("[router]\nu_pi_volts = 900\n");
    EXPECT_EQ(c.router.u_pi_volts, 900.0);
}

TEST(Config, RejectsUnknownAndInvalid) {
    EXPECT_THROW(config_from_toml_string("[router]\nupi = 3.0\n"), ConfigurationError);
    EXPECT_THROW(config_from_toml_string("[routr]\n"), ConfigurationError);
    EXPECT_THROW(config_from_toml_string("[router]\nu_pi_volts = \"high\"\n"), ConfigurationError);
    EXPECT_THROW(config_from_toml_string("[router]\nu_pi_volts = -1.0\n"), ConfigurationError);
    EXPECT_THROW(config_from_toml_string("[source]\nmu = 1.5\n"), ConfigurationError);
    EXPECT_THROW(config_from_toml_string("[run]\nvoltage_step = 0.0\n"), ConfigurationError);
    EXPECT_THROW(config_from_toml_string("not toml = = 1"), ConfigurationError);
    EXPECT_THROW(load_config("/nonexistent/path.toml"), ConfigurationError);
}

TEST(Config, LoadFromFileAndEcho) {
    const auto path = std::filesystem::temp_directory_path() / "polrouter_test_config.toml";
    {
        std::ofstream f(path);
        f << "[temporal]\ndelay_mismatch_ns = 0.0\n";
    }
    const auto c = load_config(path.string());
    EXPECT_EQ(c.temporal.delay_mismatch_ns, 0.0);
    const auto j = config_to_json(c);
    EXPECT_EQ(j["temporal"]["delay_mismatch_ns"].get<double>(), 0.0);
    EXPECT_EQ(j["router"]["u_pi_volts"].get<double>(), 960.0);
    std::filesystem::remove(path);
}

TEST(Grid, Inclusive) {
    const auto g = make_grid(0.0, 1200.0, 25.0);
    EXPECT_EQ(g.size(), 49u);
    EXPECT_EQ(g.back(), 1200.0);
    EXPECT_EQ(make_grid(-5.0, 20.0, 0.1).size(), 251u);
    EXPECT_THROW(make_grid(0.0, 1.0, -1.0), ConfigurationError);
}
