#include <gtest/gtest.h>

#include "polrouter/random.hpp"

using namespace polrouter;

TEST(Poisson, ZeroRate) {
    Rng rng = make_stream(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(poisson_counts(0.0, 1.0, rng), 0);
    EXPECT_EQ(poisson_counts(5.0, 0.0, rng), 0);
    EXPECT_THROW(poisson_counts(-1.0, 1.0, rng), UsageError);
    EXPECT_THROW(poisson_counts(std::nan(""), 1.0, rng), UsageError);
}

TEST(Poisson, LargeMeanWithinThreeSigma) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng = make_stream(2, s);
        const auto k = poisson_counts(1e6, 1.0, rng);
        EXPECT_LT(std::abs(static_cast<double>(k) - 1e6), 3.0 * 1e3 + 1.0);
    }
}

TEST(Poisson, SampleMeanAndVariance) {
    Rng rng = make_stream(3);
    const int n = 20000;
    double m = 0.0, v = 0.0;
    std::vector<double> x(n);
    for (auto& k : x) m += (k = static_cast<double>(poisson_counts(7.5, 2.0, rng)));
    m /= n;
    for (double k : x) v += (k - m) * (k - m);
    v /= n - 1;
    EXPECT_NEAR(m, 15.0, 4.0 * std::sqrt(15.0 / n));
    EXPECT_NEAR(v / 15.0, 1.0, 0.05);
}

TEST(Streams, DeterministicAndIndependent) {
    Rng a = make_stream(9, 4), b = make_stream(9, 4), c = make_stream(9, 5), d = make_stream(10, 4);
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
    EXPECT_NE(x, d());
}
