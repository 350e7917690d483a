#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "compscore/compscore.hpp"

using namespace compscore;

namespace {

bool rows_valid(const ContinuousDataset& d) {
    const auto& u = d.proportions();
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        if (u.row(i).minCoeff() < 0.0) return false;
        if (std::abs(u.row(i).sum() - 1.0) > 1e-9) return false;
    }
    return true;
}

double mc_se(const Eigen::VectorXd& x) {
    const double m = x.mean();
    return std::sqrt((x.array() - m).square().sum() / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
}

} // namespace

TEST(Rng, DeterministicStreams) {
    Rng a(5, 1), b(5, 1), c(5, 2);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        differs = differs || x != c.next();
    }
    EXPECT_TRUE(differs);
    EXPECT_EQ(stream_id("replicate", 3), stream_id("replicate", 3));
    EXPECT_NE(stream_id("replicate", 3), stream_id("replicate", 4));
    EXPECT_NE(stream_id("simulate", 0), stream_id("diagnose", 0));
}

TEST(Rng, UniformOpenInterval) {
    Rng r(1, 0);
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Rng, NormalAndGammaMoments) {
    Rng r(2, 0);
    const int n = 200000;
    double s = 0, s2 = 0, g = 0, gs = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
        const double y = r.gamma(0.3);
        g += y;
        gs += y * y;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.015);
    EXPECT_NEAR(g / n, 0.3, 0.006);
    EXPECT_NEAR(gs / n - (g / n) * (g / n), 0.3, 0.01);
}

TEST(Rng, BinomialMeanAndVariance) {
    Rng r(3, 0);
    for (auto [n, p] : {std::pair<std::int64_t, double>{10, 0.3}, {2000, 0.001}, {2000, 0.4}, {1000000, 0.25}}) {
        const int reps = 40000;
        double s = 0, s2 = 0;
        for (int i = 0; i < reps; ++i) {
            const auto x = static_cast<double>(r.binomial(n, p));
            ASSERT_GE(x, 0);
            ASSERT_LE(x, static_cast<double>(n));
            s += x;
            s2 += x * x;
        }
        const double mean = s / reps, var = s2 / reps - mean * mean;
        const double tv = static_cast<double>(n) * p * (1 - p);
        EXPECT_NEAR(mean, static_cast<double>(n) * p, 5 * std::sqrt(tv / reps)) << n << " " << p;
        EXPECT_NEAR(var, tv, 0.05 * tv) << n << " " << p;
    }
}

TEST(TruncatedGaussian, ModelFourMeans) {
    const auto& pr = preset(4);
    Rng rng(4, 0);
    const auto d = sample_truncated_gaussian(pr.spec, 20000, rng);
    EXPECT_TRUE(rows_valid(d));
    for (int j = 0; j < 9; ++j) {
        const Eigen::VectorXd col = d.proportions().col(j);
        EXPECT_NEAR(col.mean(), 0.04, 3 * mc_se(col)) << j;
    }
}

TEST(TruncatedGaussian, OneDimensionalQuadrature) {
    // density of u1 proportional to exp(-2 u^2 + 2 u) on [0, 1]
    Eigen::MatrixXd a(1, 1);
    a << -2;
    Eigen::VectorXd b(1);
    b << 2;
    const auto spec = make_truncated_gaussian(a, b);
    const int grid = 200000;
    double z = 0, m = 0;
    for (int k = 0; k <= grid; ++k) {
        const double u = static_cast<double>(k) / grid;
        const double w = (k == 0 || k == grid) ? 1 : (k % 2 ? 4 : 2);
        const double f = std::exp(-2 * u * u + 2 * u);
        z += w * f;
        m += w * u * f;
    }
    const double expected = m / z;
    Rng rng(5, 0);
    const auto d = sample_truncated_gaussian(spec, 200000, rng);
    const Eigen::VectorXd col = d.proportions().col(0);
    EXPECT_NEAR(col.mean(), expected, 4 * mc_se(col));
    EXPECT_NEAR(expected, 0.5, 1e-12); // symmetric about 0.5
}

TEST(TruncatedGaussian, Errors) {
    Eigen::MatrixXd a(2, 2);
    a << 1, 0, 0, -1;
    auto spec = make_truncated_gaussian(a, Eigen::VectorXd::Zero(2));
    Rng rng(6, 0);
    try {
        sample_truncated_gaussian(spec, 10, rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_family);
    }
    // mean far outside the simplex with a tiny spread
    a << -1e6, 0, 0, -1e6;
    Eigen::VectorXd b(2);
    b << -2e6, -2e6;
    spec = make_truncated_gaussian(a, b);
    SamplerOptions opt;
    opt.check_every = 10000;
    try {
        sample_truncated_gaussian(spec, 10, rng, nullptr, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::infeasible_truncation);
        EXPECT_EQ(exit_status(e.code()), 4);
    }
}

TEST(Dirichlet, Means) {
    Rng rng(7, 0);
    const auto d = sample_dirichlet(Eigen::VectorXd::Zero(2), 50000, rng);
    EXPECT_TRUE(rows_valid(d));
    EXPECT_NEAR(d.proportions().col(0).mean(), 0.5, 3 * mc_se(d.proportions().col(0)));
    const auto d9 = sample_dirichlet(Eigen::VectorXd::Constant(10, 9.0), 20000, rng);
    for (int j = 0; j < 10; ++j) EXPECT_NEAR(d9.proportions().col(j).mean(), 0.1, 3 * mc_se(d9.proportions().col(j)));
    Eigen::VectorXd beta(3);
    beta << -0.5, 0.7, 3.0;
    const auto d3 = sample_dirichlet(beta, 50000, rng);
    const double tot = (beta.array() + 1).sum();
    for (int j = 0; j < 3; ++j)
        EXPECT_NEAR(d3.proportions().col(j).mean(), (beta(j) + 1) / tot, 3 * mc_se(d3.proportions().col(j)));
}

TEST(Hybrid, FlatRatioIsExactDirichlet) {
    Eigen::VectorXd beta(3);
    beta << -0.3, 0.5, 1.0;
    const auto spec = make_hybrid(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2), beta);
    Rng rng(8, 0);
    RejectionStats st;
    const auto h = sample_hybrid(spec, 20000, rng, &st);
    EXPECT_EQ(st.attempted, st.accepted);
    EXPECT_EQ(st.updates, 0);
    Rng rng2(8, 1);
    const auto d = sample_dirichlet(beta, 20000, rng2);
    for (int j = 0; j < 3; ++j) {
        const auto ks = ks_compare(Eigen::VectorXd(h.proportions().col(j)), Eigen::VectorXd(d.proportions().col(j)));
        EXPECT_GT(ks.p_value, 0.01) << j;
    }
}

TEST(Hybrid, MicrobiomeSpecTerminates) {
    const auto& pr = preset(1);
    Rng rng(9, 0);
    RejectionStats st;
    const auto d = sample_hybrid(pr.spec, 2000, rng, &st);
    EXPECT_TRUE(rows_valid(d));
    for (int j = 0; j < 5; ++j) {
        const double m = d.proportions().col(j).mean();
        EXPECT_TRUE(std::isfinite(m));
        EXPECT_GT(m, 0.0);
        EXPECT_LT(m, 1.0);
    }
    EXPECT_LE(st.accepted, st.attempted);
}

TEST(Hybrid, EnvelopeMonotone) {
    // positive curvature pushes the ratio above the starting envelope
    Eigen::MatrixXd a(2, 2);
    a << 3, 1, 1, 2;
    Eigen::VectorXd b(2);
    b << 1, 0.5;
    const auto spec = make_hybrid(a, b, Eigen::VectorXd::Zero(3));
    Rng rng(10, 0);
    RejectionStats st;
    sample_hybrid(spec, 5000, rng, &st);
    EXPECT_GT(st.updates, 0);
    EXPECT_EQ(st.envelope_trace.size(), static_cast<std::size_t>(st.updates + 1));
    for (std::size_t i = 1; i < st.envelope_trace.size(); ++i)
        EXPECT_GE(st.envelope_trace[i], st.envelope_trace[i - 1]);
    EXPECT_DOUBLE_EQ(st.envelope, st.envelope_trace.back());
}

TEST(Hybrid, AgreesWithTruncatedGaussian) {
    const auto& pr = preset(3);
    auto as_hybrid = pr.spec;
    as_hybrid.family = Family::hybrid;
    Rng r1(11, 0), r2(11, 1);
    const auto a = sample_truncated_gaussian(pr.spec, 20000, r1);
    const auto b = sample_hybrid(as_hybrid, 20000, r2);
    for (int j = 0; j < 3; ++j) {
        const auto ks = ks_compare(Eigen::VectorXd(a.proportions().col(j)), Eigen::VectorXd(b.proportions().col(j)));
        EXPECT_GT(ks.p_value, 0.01) << j;
    }
}

TEST(Hybrid, EnvelopeFailure) {
    Eigen::MatrixXd a(1, 1);
    a << 200;
    const auto spec = make_hybrid(a, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2));
    SamplerOptions opt;
    opt.min_acceptance = 0.05;
    opt.check_every = 20000;
    Rng rng(12, 0);
    try {
        sample_hybrid(spec, 100000, rng, nullptr, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::envelope_failure);
        EXPECT_NE(std::string(e.what()).find("envelope trace"), std::string::npos);
    }
}

TEST(Multinomial, DegenerateCell) {
    RowMatrix u(1, 3);
    u << 1, 0, 0;
    Rng rng(13, 0);
    const auto c = sample_multinomial_compound(ContinuousDataset(u), 7, rng);
    EXPECT_EQ(c.counts.counts()(0, 0), 7);
    EXPECT_EQ(c.counts.counts()(0, 1), 0);
    EXPECT_EQ(c.counts.counts()(0, 2), 0);
}

TEST(Multinomial, MeanMatchesProbabilities) {
    Eigen::RowVectorXd u(4);
    u << 0.05, 0.15, 0.3, 0.5;
    const int reps = 100000;
    const std::int64_t m = 50;
    RowMatrix lat = u.replicate(reps, 1);
    Rng rng(14, 0);
    const auto c = sample_multinomial_compound(ContinuousDataset(lat), m, rng);
    for (int j = 0; j < 4; ++j) {
        const double mean = c.counts.counts().col(j).cast<double>().mean() / m;
        EXPECT_LT(std::abs(mean - u(j)), 4 * std::sqrt(u(j) * (1 - u(j)) / (m * reps)));
    }
    EXPECT_EQ((c.counts.counts().rowwise().sum().array() == m).count(), reps);
}

TEST(Multinomial, OverdispersionVariance) {
    Eigen::VectorXd beta(3);
    beta << 1.0, 2.0, 0.5;
    Rng rng(15, 0);
    const auto latent = sample_dirichlet(beta, 200000, rng);
    const std::int64_t m = 20;
    const auto c = sample_multinomial_compound(latent, m, rng);
    for (int j = 0; j < 3; ++j) {
        const Eigen::VectorXd u = c.latent.proportions().col(j);
        const Eigen::VectorXd x = c.counts.counts().col(j).cast<double>() / static_cast<double>(m);
        const double eu = u.mean(), eu2 = u.squaredNorm() / static_cast<double>(u.size());
        const double predicted = (eu2 - eu * eu) + (eu - eu2) / static_cast<double>(m);
        const double observed = (x.array() - x.mean()).square().mean();
        EXPECT_NEAR(observed, predicted, 0.05 * predicted) << j;
    }
}

TEST(Samplers, ByteIdenticalUnderFixedSeed) {
    for (int id : {1, 3, 9}) {
        Rng a(99, 3), b(99, 3);
        const auto x = sample_model(preset(id).spec, 300, a);
        const auto y = sample_model(preset(id).spec, 300, b);
        EXPECT_EQ(x.proportions(), y.proportions()) << id;
    }
}
