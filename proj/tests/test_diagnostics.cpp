#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "compscore/compscore.hpp"
#include "compscore/io.hpp"

using namespace compscore;

TEST(RoundToGrid, Examples) {
    EXPECT_DOUBLE_EQ(round_to_grid(0.0123, 2000), 25.0 / 2000);
    EXPECT_EQ(round_to_grid(0.0, 2000), 0.0);
    EXPECT_DOUBLE_EQ(round_to_grid(1.0 / 2000, 2000), 1.0 / 2000);
    EXPECT_DOUBLE_EQ(round_to_grid(0.25, 2), 0.5); // half away from zero
    EXPECT_THROW(round_to_grid(0.5, 0), Error);
}

TEST(RoundToGrid, Idempotent) {
    Rng rng(1, 0);
    const auto d = sample_dirichlet(Eigen::VectorXd::Constant(4, -0.5), 500, rng);
    for (std::int64_t m : {1, 7, 2000}) {
        const RowMatrix once = round_to_grid(d.proportions(), m);
        EXPECT_EQ(round_to_grid(once, m), once);
    }
}

TEST(Ks, IdenticalSamples) {
    const std::vector<double> a{0.1, 0.4, 0.2, 0.9};
    const auto r = ks_compare(a, a);
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_TRUE(r.ties);
}

TEST(Ks, DisjointSamples) {
    const auto r = ks_compare(std::vector<double>(10, 0.0), std::vector<double>(20, 1.0));
    EXPECT_EQ(r.statistic, 1.0);
    EXPECT_LT(r.p_value, 1e-3);
}

TEST(Ks, KnownStatistic) {
    const auto r = ks_compare(std::vector<double>{1, 2, 3}, std::vector<double>{2.5, 4, 5, 6});
    // at x = 3 the first ECDF is 1 and the second 1/4
    EXPECT_NEAR(r.statistic, 0.75, 1e-15);
    EXPECT_FALSE(r.ties);
}

TEST(Ks, KolmogorovTailContinuity) {
    // the two series agree where they switch
    const double lo = kolmogorov_tail(1.18 - 1e-9), hi = kolmogorov_tail(1.18 + 1e-9);
    EXPECT_NEAR(lo, hi, 1e-8);
    EXPECT_NEAR(kolmogorov_tail(1.36), 0.0494, 5e-4);
    EXPECT_NEAR(kolmogorov_tail(1.63), 0.0098, 3e-4);
}

TEST(Ks, NullCalibration) {
    int pass = 0;
    for (int run = 0; run < 100; ++run) {
        Rng rng(1000 + static_cast<std::uint64_t>(run), 0);
        std::vector<double> a(5000), b(5000);
        for (auto& v : a) v = rng.uniform();
        for (auto& v : b) v = rng.uniform();
        if (ks_compare(a, b).p_value > 0.01) ++pass;
    }
    EXPECT_GE(pass, 98);
}

TEST(Ks, SymmetricAndMonotoneInvariant) {
    Rng rng(3, 0);
    std::vector<double> a(300), b(500);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = rng.uniform() * 0.9;
    const auto ab = ks_compare(a, b), ba = ks_compare(b, a);
    EXPECT_EQ(ab.statistic, ba.statistic);
    EXPECT_EQ(ab.p_value, ba.p_value);
    for (auto& v : a) v = std::sqrt(v);
    for (auto& v : b) v = std::sqrt(v);
    EXPECT_EQ(ks_compare(a, b).statistic, ab.statistic);
}

TEST(MarginalReport, SelfConsistency) {
    // observed drawn from the generating model itself
    const auto& pr = preset(3);
    int pass = 0;
    const int runs = 100;
    for (int run = 0; run < runs; ++run) {
        Rng rng(5, stream_id("self", static_cast<std::uint64_t>(run)));
        const auto obs = sample_model(pr.spec, 92, rng);
        const auto rep = marginal_report(obs, pr.spec, 0, 100000, rng);
        bool ok = true;
        for (const auto& m : rep.marginals) ok = ok && m.ks.p_value > 0.01;
        if (ok) ++pass;
    }
    EXPECT_GE(pass, 95);
}

TEST(MarginalReport, ShapeAndFields) {
    const auto& pr = preset(9);
    Rng rng(6, 0);
    const auto obs = sample_model(pr.spec, 50, rng);
    const auto rep = marginal_report(obs, pr.spec, 2000, 3000, rng);
    EXPECT_EQ(rep.marginals.size(), 10u);
    EXPECT_EQ(rep.qq.size(), 10u);
    EXPECT_EQ(rep.qq[0].size(), 99u);
    EXPECT_EQ(rep.grid_total, 2000);
    EXPECT_TRUE(rep.ties_present);
    for (const auto& m : rep.marginals) {
        EXPECT_GE(m.ks.statistic, 0.0);
        EXPECT_LE(m.ks.statistic, 1.0);
    }
}

TEST(MarginalReport, DegenerateCategoryFlagged) {
    RowMatrix u(4, 3);
    u << 0, 0.5, 0.5, 0, 0.2, 0.8, 0, 0.9, 0.1, 0, 0.4, 0.6;
    const ContinuousDataset obs(u);
    Rng rng(7, 0);
    const auto rep = marginal_report(obs, make_dirichlet(Eigen::VectorXd::Zero(3)), 0, 1000, rng);
    EXPECT_TRUE(rep.marginals[0].degenerate);
    EXPECT_FALSE(rep.marginals[1].degenerate);
    for (const auto& m : rep.marginals) {
        EXPECT_TRUE(std::isfinite(m.ks.statistic));
        EXPECT_TRUE(std::isfinite(m.ks.p_value));
        EXPECT_TRUE(std::isfinite(m.observed_sd));
    }
}

TEST(MarginalReport, DirichletUnderstatesOverdispersion) {
    const auto loaded = load_data(std::string(COMPSCORE_DATA_DIR) + "/microbiome_synthetic.csv");
    const auto& obs = loaded.proportions;
    const auto beta = dirichlet_moment_fit(obs);
    Rng rng(8, 0);
    const auto rep = marginal_report(obs, make_dirichlet(beta), 2000, 20000, rng);
    int understated = 0;
    for (const auto& m : rep.marginals) {
        EXPECT_NEAR(m.simulated_mean, m.observed_mean, 0.35 * m.observed_mean + 1e-3);
        if (m.simulated_sd < m.observed_sd) ++understated;
    }
    EXPECT_GE(understated, 3);
}
