#include <gtest/gtest.h>

#include "polrouter/polmath.hpp"
#include "polrouter/polmath_json.hpp"
#include "polrouter/random.hpp"
#include "support/oracles.hpp"

using namespace polrouter;

namespace {

Mat4 random_psd4(Rng& rng, int rank = 4) {
    std::normal_distribution<double> g;
    Eigen::Matrix<cplx, 4, Eigen::Dynamic> a(4, rank);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < rank; ++j) a(i, j) = cplx(g(rng), g(rng));
    Mat4 m = a * a.adjoint();
    return m / m.trace().real();
}

double power_iteration_norm(const Eigen::MatrixXcd& m) {
    const Eigen::MatrixXcd g = m.adjoint() * m;
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(g.cols());
    double lambda = 0.0;
    for (int it = 0; it < 5000; ++it) {
        Eigen::VectorXcd w = g * v;
        const double n = w.norm();
        if (n == 0.0) return 0.0;
        v = w / n;
        if (std::abs(n - lambda) < 1e-15 * n) {
            lambda = n;
            break;
        }
        lambda = n;
    }
    return std::sqrt((v.adjoint() * g * v)(0).real());
}

}  // namespace

TEST(Pauli, Definitions) {
    EXPECT_TRUE(approx_equal(pauli('I'), Mat2::Identity(), 0.0));
    Mat2 x;
    x << 0, 1, 1, 0;
    EXPECT_TRUE(approx_equal(pauli('X'), x, 0.0));
    EXPECT_TRUE(approx_equal(pauli('Y') * pauli('Y'), Mat2::Identity(), 1e-15));
    EXPECT_TRUE(approx_equal(pauli('X') * pauli('Y'), cplx(0, 1) * pauli('Z'), 1e-15));
    EXPECT_THROW(pauli('Q'), UsageError);
}

TEST(States, Labels) {
    EXPECT_NEAR(std::abs(state_from_label('H').h() - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(state_from_label('H').v()), 0.0, 1e-15);
    EXPECT_NEAR(state_from_label('D').h().real(), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(state_from_label('D').v().real(), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(std::abs(state_from_label('R').inner(state_from_label('L'))), 0.0, 1e-15);
    EXPECT_NEAR(state_from_label('R').v().imag(), -1.0 / std::sqrt(2.0), 1e-15);  // R = (H - iV)/sqrt2
    EXPECT_THROW(state_from_label('Q'), UsageError);
    EXPECT_THROW(JonesVector::normalize(0.0, 0.0), DomainError);
}

TEST(States, FiducialPairsAreOrthogonalEigenstates) {
    const std::array<std::pair<char, char>, 3> pairs{{{'H', 'V'}, {'D', 'A'}, {'R', 'L'}}};
    const std::array<char, 3> ops{'Z', 'X', 'Y'};
    for (int k = 0; k < 3; ++k) {
        const auto a = state_from_label(pairs[k].first), b = state_from_label(pairs[k].second);
        EXPECT_NEAR(std::abs(a.inner(b)), 0.0, 1e-15);
        // H, D are the +1 eigenstates of Z, X.  R = (H - iV)/sqrt2 is the -1 eigenstate of Y.
        const double sign = ops[k] == 'Y' ? -1.0 : 1.0;
        EXPECT_NEAR((a.vector().adjoint() * pauli(ops[k]) * a.vector())(0).real(), sign, 1e-15);
        EXPECT_NEAR((b.vector().adjoint() * pauli(ops[k]) * b.vector())(0).real(), -sign, 1e-15);
    }
}

TEST(DensityMatrix, RejectsInvalid) {
    Mat2 m = Mat2::Identity();
    EXPECT_THROW(DensityMatrix2::from_matrix(m), DomainError);  // trace 2
    m << 1.5, 0, 0, -0.5;
    EXPECT_THROW(DensityMatrix2::from_matrix(m), DomainError);
    m << 0.5, 0.1, 0.2, 0.5;
    EXPECT_THROW(DensityMatrix2::from_matrix(m), DomainError);
}

TEST(ProcessMatrix, RejectsInvalidAndChecksTp) {
    EXPECT_THROW(ProcessMatrix::from_matrix(Mat4::Identity()), DomainError);
    Mat4 m = Mat4::Zero();
    m(0, 0) = 1.2;
    m(1, 1) = -0.2;
    EXPECT_THROW(ProcessMatrix::from_matrix(m), DomainError);
    // Amplitude damping is PSD but not unital: flagging TP must respect the TP form.
    Mat2 k0, k1;
    const double g = 0.3;
    k0 << 1, 0, 0, std::sqrt(1 - g);
    k1 << 0, std::sqrt(g), 0, 0;
    const auto ad = ProcessMatrix::from_kraus(std::vector<Mat2>{k0, k1});
    EXPECT_TRUE(ad.flagged_trace_preserving());
    EXPECT_NO_THROW(ProcessMatrix::from_matrix(ad.matrix(), true));
    EXPECT_LT(ad.tp_violation(), 1e-12);
    // A lossy filter is not TP.
    Mat2 f = Mat2::Zero();
    f(0, 0) = 1.0;
    const auto pf = ProcessMatrix::from_kraus(std::vector<Mat2>{f});
    EXPECT_FALSE(pf.flagged_trace_preserving());
    EXPECT_THROW(ProcessMatrix::from_matrix(pf.matrix(), true), DomainError);
}

TEST(MatrixSqrt, Examples) {
    EXPECT_TRUE(approx_equal(matrix_sqrt_psd(Mat2(Mat2::Identity())), Mat2::Identity(), 1e-15));
    Mat2 d = Mat2::Zero();
    d(0, 0) = 4.0;
    d(1, 1) = 1.0;
    Mat2 e = Mat2::Zero();
    e(0, 0) = 2.0;
    e(1, 1) = 1.0;
    EXPECT_TRUE(approx_equal(matrix_sqrt_psd(d), e, 1e-14));
    Mat2 neg = Mat2::Zero();
    neg(0, 0) = -1.0;
    EXPECT_THROW(matrix_sqrt_psd(neg), DomainError);
}

TEST(MatrixSqrt, RandomPsdSquaresBack) {
    Rng rng = make_stream(11);
    for (int trial = 0; trial < 100; ++trial) {
        const Mat4 m = random_psd4(rng, 1 + trial % 4);
        const Mat4 s = matrix_sqrt_psd(m);
        EXPECT_LT((s * s - m).cwiseAbs().maxCoeff(), 1e-9);
        const Mat4 q = matrix_sqrt_psd(s);
        EXPECT_LT((q * q * q * q - m).cwiseAbs().maxCoeff(), 1e-7);
    }
}

TEST(ProcessFidelity, Examples) {
    const auto id = ProcessMatrix::identity();
    EXPECT_NEAR(process_fidelity(id, id), 1.0, 1e-12);
    EXPECT_NEAR(process_fidelity(id, ProcessMatrix::pauli_channel(Pauli::X)), 0.0, 1e-12);
    EXPECT_NEAR(process_fidelity(id, ProcessMatrix::depolarizing()), 0.25, 1e-12);
}

TEST(ProcessFidelity, SymmetricAndBounded) {
    Rng rng = make_stream(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = ProcessMatrix::from_matrix(random_psd4(rng, 1 + trial % 4));
        const auto b = ProcessMatrix::from_matrix(random_psd4(rng, 1 + (trial / 4) % 4));
        const double fab = process_fidelity(a, b), fba = process_fidelity(b, a);
        EXPECT_NEAR(fab, fba, 1e-9);
        EXPECT_GE(fab, 0.0);
        EXPECT_LE(fab, 1.0);
        EXPECT_NEAR(process_fidelity(a, a), 1.0, 1e-9);
    }
}

TEST(ProcessFidelity, RankOneMatchesOverlap) {
    // For pure chi = |a><a|, F(chi, b) = <a|b|a>.
    Rng rng = make_stream(13);
    for (int trial = 0; trial < 50; ++trial) {
        const Mat4 a = random_psd4(rng, 1);
        const Mat4 b = random_psd4(rng, 4);
        Eigen::SelfAdjointEigenSolver<Mat4> es(a);
        const Vec4 v = es.eigenvectors().col(3);
        const double expect = (v.adjoint() * b * v)(0).real();
        EXPECT_NEAR(process_fidelity(ProcessMatrix::from_matrix(a), ProcessMatrix::from_matrix(b)), expect, 1e-9);
    }
}

TEST(SpectralNorm, ExamplesAndOracle) {
    EXPECT_NEAR(spectral_norm(Mat4(Mat4::Identity())), 1.0, 1e-15);
    EXPECT_EQ(spectral_norm(Mat4(Mat4::Zero())), 0.0);
    Rng rng = make_stream(14);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 100; ++trial) {
        Mat4 m, n;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                m(i, j) = cplx(g(rng), g(rng));
                n(i, j) = cplx(g(rng), g(rng));
            }
        EXPECT_NEAR(spectral_norm(m), power_iteration_norm(m), 1e-10 * spectral_norm(m));
        EXPECT_LE(spectral_norm(Mat4(m * n)), spectral_norm(m) * spectral_norm(n) + 1e-9);
    }
}

TEST(StateFidelity, Examples) {
    const auto h = DensityMatrix2::from_label(PolLabel::H);
    EXPECT_NEAR(state_fidelity(h, h), 1.0, 1e-12);
    EXPECT_NEAR(state_fidelity(h, DensityMatrix2::from_label(PolLabel::V)), 0.0, 1e-12);
    EXPECT_NEAR(state_fidelity(h, DensityMatrix2::from_label(PolLabel::D)), 0.5, 1e-12);
}

TEST(Constructions, RandomValidObjectsPassChecks) {
    Rng rng = make_stream(15);
    for (int trial = 0; trial < 100; ++trial) {
        const auto k = oracle::random_tp_kraus(rng);
        const auto chi = ProcessMatrix::from_kraus(k);
        EXPECT_TRUE(chi.flagged_trace_preserving());
        EXPECT_NO_THROW(ProcessMatrix::from_matrix(chi.matrix(), true));
        EXPECT_LT((chi.matrix() - oracle::chi_of_kraus(k)).cwiseAbs().maxCoeff(), 1e-12);
        const Eigen::MatrixXcd u = oracle::haar_unitary(2, rng);
        const Vec2 psi = u.col(0);
        EXPECT_NO_THROW(DensityMatrix2::pure(JonesVector::normalize(psi)));
    }
}

TEST(Json, MatrixRoundTrip) {
    Rng rng = make_stream(16);
    const auto chi = ProcessMatrix::from_kraus(oracle::random_tp_kraus(rng));
    const auto j = process_to_json(chi);
    EXPECT_EQ(j["matrix"]["re"].size(), 16u);
    const auto back = process_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_LT((back.matrix() - chi.matrix()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_TRUE(back.flagged_trace_preserving());
    nlohmann::json bad = j;
    bad["matrix"]["im"].erase(0);
    EXPECT_THROW(process_from_json(bad), UsageError);
}
