#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "compscore/compscore.hpp"
#include "oracles.hpp"

using namespace compscore;

namespace {

ContinuousDataset one_row(const std::vector<double>& u) {
    RowMatrix m(1, static_cast<Eigen::Index>(u.size()));
    for (std::size_t j = 0; j < u.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = u[j];
    return ContinuousDataset(m);
}

ObservationTerms terms_at(const std::vector<double>& u, const WeightSpec& w) {
    HybridContinuousSource src(one_row(u), w);
    ObservationTerms t;
    src.terms(0, t);
    return t;
}

Eigen::VectorXd z_of(const std::vector<double>& u) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(u.size()));
    for (std::size_t j = 0; j < u.size(); ++j) z(static_cast<Eigen::Index>(j)) = std::sqrt(u[j]);
    return z;
}

} // namespace

TEST(Gradients, VertexQuartic) {
    const std::vector<double> z{1, 0, 0};
    const auto g = gradients(z, index_map(3));
    EXPECT_EQ(g.mu.row(0), Eigen::RowVector3d(4, 0, 0));
    EXPECT_EQ(g.nu(0), 4.0);
}

TEST(Gradients, CrossVanishesWhenFirstIsZero) {
    const std::vector<double> z{0, 1, 0};
    const auto m = index_map(3);
    const auto g = gradients(z, m);
    EXPECT_EQ(g.mu.row(m.cross_index(0, 1)), Eigen::RowVector3d(0, 0, 0));
    EXPECT_EQ(g.nu(m.cross_index(0, 1)), 0.0);
}

TEST(Gradients, NuIsDotProduct) {
    Rng rng(1, 0);
    for (int p : {2, 3, 6}) {
        const auto d = sample_dirichlet(Eigen::VectorXd::Zero(p), 20, rng);
        const RowMatrix z = sqrt_transform(d);
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const std::vector<double> zi(z.row(i).data(), z.row(i).data() + p);
            const auto g = gradients(zi, index_map(p));
            const Eigen::VectorXd zv = z.row(i).transpose();
            for (Eigen::Index k = 0; k < g.nu.size(); ++k) EXPECT_NEAR(g.nu(k), g.mu.row(k).dot(zv), 1e-14);
        }
    }
}

TEST(Gradients, MatchFiniteDifferences) {
    const auto u = std::vector<double>{0.15, 0.25, 0.35, 0.25};
    const Eigen::VectorXd z = z_of(u);
    const auto t = oracle::statistics(4);
    const std::vector<double> zs(z.data(), z.data() + 4);
    const auto g = gradients(zs, index_map(4));
    for (std::size_t k = 0; k < t.size(); ++k)
        EXPECT_LT((g.mu.row(static_cast<Eigen::Index>(k)).transpose() - oracle::gradient(t[k], z)).norm(), 1e-8);
}

TEST(Laplacian, EigenvalueFormula) {
    EXPECT_EQ(laplacian_eigenvalue(2, 3), 6.0);
    EXPECT_EQ(laplacian_eigenvalue(4, 3), 20.0);
}

TEST(Laplacian, QuadraticAtUniformIsZero) {
    const auto m = index_map(3);
    const std::vector<double> u{1.0 / 3, 1.0 / 3, 1.0 / 3};
    EXPECT_NEAR(laplacian<double>(m.stat(m.linear_index(0)), u, 3, 1.0), 0.0, 1e-15);
}

TEST(Laplacian, QuarticAtVertex) {
    const auto m = index_map(3);
    const std::vector<double> u{1.0, 0.0, 0.0};
    EXPECT_DOUBLE_EQ(laplacian<double>(m.stat(0), u, 3, 1.0), -8.0);
    Eigen::VectorXd z(3);
    z << 1, 0, 0;
    EXPECT_NEAR(oracle::sphere_laplacian(oracle::statistics(3)[0], z), -8.0, 1e-5);
}

TEST(Laplacian, MatchesFiniteDifferenceOperator) {
    Rng rng(2, 0);
    for (int p : {2, 3, 5}) {
        const auto d = sample_dirichlet(Eigen::VectorXd::Zero(p), 5, rng);
        const auto m = index_map(p);
        const auto t = oracle::statistics(p);
        for (Eigen::Index i = 0; i < d.n(); ++i) {
            const std::vector<double> u(d.proportions().row(i).data(), d.proportions().row(i).data() + p);
            const Eigen::VectorXd z = z_of(u);
            for (int k = 0; k < m.q(); ++k)
                EXPECT_NEAR(laplacian<double>(m.stat(k), u, p, 1.0),
                            oracle::sphere_laplacian(t[static_cast<std::size_t>(k)], z), 2e-5)
                    << "p=" << p << " k=" << k;
        }
    }
}

TEST(BuildW, HandComputedTwoParts) {
    // p = 2, t = (z1^4, z1^2), mu = (4 z1^3, 0), (2 z1, 0); nu = (4 z1^4, 2 z1^2)
    const double u1 = 0.3, u2 = 0.7;
    const auto d = one_row({u1, u2});
    const auto w = WeightSpec::make(WeightKind::product);
    const double h2 = u1 * u2;
    Eigen::Matrix2d expect;
    expect(0, 0) = h2 * (16 * u1 * u1 * u1 - 16 * u1 * u1 * u1 * u1);
    expect(0, 1) = h2 * (8 * u1 * u1 - 8 * u1 * u1 * u1);
    expect(1, 0) = expect(0, 1);
    expect(1, 1) = h2 * (4 * u1 - 4 * u1 * u1);
    EXPECT_LT((build_W(d, w) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BuildW, SymmetricExactly) {
    const auto d = oracle::random_data(5, 60, 3);
    for (auto k : {WeightKind::product, WeightKind::capped_product, WeightKind::min, WeightKind::capped_min}) {
        const auto W = build_W(d, WeightSpec::make(k, 0.1));
        EXPECT_EQ(W, W.transpose());
    }
}

TEST(BuildW, BoundaryRowsGiveZero) {
    RowMatrix u(3, 3);
    u << 0.0, 0.4, 0.6, 0.5, 0.0, 0.5, 0.3, 0.7, 0.0;
    const ContinuousDataset d(u);
    for (auto k : {WeightKind::product, WeightKind::capped_product, WeightKind::min, WeightKind::capped_min}) {
        const auto w = WeightSpec::make(k, 0.3);
        EXPECT_EQ(build_W(d, w).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(build_d1(d, w).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(ObservationTerms, MatchNumericOracle) {
    Rng rng(4, 0);
    for (int p : {2, 3, 5}) {
        const auto d = sample_dirichlet(Eigen::VectorXd::Constant(p, 0.5), 6, rng);
        for (auto k : {WeightKind::product, WeightKind::capped_product, WeightKind::min, WeightKind::capped_min}) {
            // caps chosen so both the binding and non-binding branches occur
            const double cap = is_product_kind(k) ? std::pow(0.8 / p, p / 2.0) : std::sqrt(0.6 / p);
            const auto w = WeightSpec::make(k, cap);
            for (Eigen::Index i = 0; i < d.n(); ++i) {
                const std::vector<double> u(d.proportions().row(i).data(), d.proportions().row(i).data() + p);
                const auto t = terms_at(u, w);
                const auto o = oracle::observation_terms(z_of(u), k, w.cap);
                const double scale = 1.0 + o.W.cwiseAbs().maxCoeff();
                EXPECT_LT((t.R - o.W).cwiseAbs().maxCoeff(), 1e-7 * scale) << p;
                EXPECT_LT((t.d1 - o.d1).cwiseAbs().maxCoeff(), 1e-5 * scale) << p;
                EXPECT_LT((t.d2 - o.d2).cwiseAbs().maxCoeff(), 1e-6) << p << " " << to_string(k);
                EXPECT_LT((t.V - o.V).cwiseAbs().maxCoeff(), 1e-7 * scale) << p;
            }
        }
    }
}

TEST(BoundaryTerm, ProductUniformPointVanishes) {
    const int p = 4;
    const auto m = index_map(p);
    const std::vector<double> u(p, 1.0 / p);
    for (int j = 0; j < p - 1; ++j) {
        EXPECT_NEAR(product_boundary_term<double>(m.stat(j), u, p, 1.0), 0.0, 1e-15);
        EXPECT_NEAR(product_boundary_term<double>(m.stat(m.linear_index(j)), u, p, 1.0), 0.0, 1e-15);
    }
}

TEST(BoundaryTerm, ProductCapBindsEverywhere) {
    RowMatrix u(2, 3);
    u << 0.3, 0.3, 0.4, 0.35, 0.3, 0.35;
    const auto d2 = build_d2_capped_product(ContinuousDataset(u), WeightSpec::make(WeightKind::capped_product, 0.01));
    EXPECT_EQ(d2.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BoundaryTerm, ProductSinglePointMatchesProjectedGradient) {
    const std::vector<double> u{0.2, 0.3, 0.5};
    const auto w = WeightSpec::make(WeightKind::product);
    const auto d2 = build_d2_capped_product(one_row(u), w);
    const auto o = oracle::observation_terms(z_of(u), WeightKind::product, 1.0);
    EXPECT_LT((d2 - o.d2).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BoundaryTerm, MinCaseTable) {
    // argmin i = 1 (first coordinate); d5 entries 0.64 and -0.24
    const std::vector<double> u{0.2, 0.3, 0.5};
    const auto m = index_map(3);
    EXPECT_NEAR(min_boundary_term(m.stat(m.linear_index(0)), u, 0), 0.64, 1e-15);
    EXPECT_NEAR(min_boundary_term(m.stat(m.linear_index(1)), u, 0), -0.24, 1e-15);
    // the estimator's d2 is minus the table and agrees with the numeric
    // projected gradient of min(z^2)
    const auto d2 = build_d2_capped_min(one_row(u), WeightSpec::make(WeightKind::min));
    EXPECT_NEAR(d2(m.linear_index(0)), -0.64, 1e-15);
    EXPECT_NEAR(d2(m.linear_index(1)), 0.24, 1e-15);
    const auto o = oracle::observation_terms(z_of(u), WeightKind::min, 1.0);
    EXPECT_LT((d2 - o.d2).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(BoundaryTerm, MinCapBindsContributesNothing) {
    const auto d2 = build_d2_capped_min(one_row({0.3, 0.3, 0.4}), WeightSpec::make(WeightKind::capped_min, 0.1));
    EXPECT_EQ(d2.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BoundaryTerm, MinTieUsesLowestIndex) {
    const std::vector<double> u{0.25, 0.25, 0.5};
    const auto m = index_map(3);
    const auto d2 = build_d2_capped_min(one_row(u), WeightSpec::make(WeightKind::min));
    for (int k = 0; k < m.q(); ++k) EXPECT_DOUBLE_EQ(d2(k), -min_boundary_term(m.stat(k), u, 0));
}

TEST(BoundaryTerm, WrongKindIsConfigurationError) {
    const auto d = one_row({0.2, 0.3, 0.5});
    try {
        build_d2_capped_min(d, WeightSpec::make(WeightKind::product));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::configuration);
    }
    EXPECT_THROW(build_d2_capped_product(d, WeightSpec::make(WeightKind::capped_min, 0.1)), Error);
}

TEST(BuildD6, HalfShapeCancels) {
    const auto d = oracle::random_data(4, 30, 8);
    const auto d6 = build_d6(d, WeightSpec::make(WeightKind::capped_min, 0.2), Eigen::VectorXd::Constant(4, -0.5));
    EXPECT_EQ(d6.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BuildD6, ZeroShapeIsNegativeRowSum) {
    const auto d = oracle::random_data(4, 30, 9);
    const auto w = WeightSpec::make(WeightKind::capped_min, 0.2);
    const auto ws = hybrid_workspace(d, w, Eigen::VectorXd::Zero(4));
    EXPECT_LT((ws.d6 + ws.V.rowwise().sum()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BuildD6, ZeroCoordinateIsFinite) {
    RowMatrix u(2, 3);
    u << 0.0, 0.4, 0.6, 0.2, 0.3, 0.5;
    const ContinuousDataset d(u);
    const auto w = WeightSpec::make(WeightKind::product);
    HybridContinuousSource src(d, w);
    ObservationTerms t;
    src.terms(0, t);
    EXPECT_TRUE(t.V.allFinite());
    EXPECT_EQ(t.V.col(0).cwiseAbs().maxCoeff(), 0.0);
    Eigen::VectorXd beta(3);
    beta << 0.3, -0.2, 1.0;
    EXPECT_TRUE(build_d6(d, w, beta).allFinite());
}

TEST(NanFreedom, ZeroHeavyDataAllKinds) {
    // half the entries zero, including rows with several zeros
    Rng rng(10, 0);
    const auto base = sample_dirichlet(Eigen::VectorXd::Constant(5, -0.6), 400, rng);
    RowMatrix u = base.proportions();
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        for (Eigen::Index j = 0; j < 4; ++j)
            if (u(i, j) < 0.05) u(i, j) = 0.0;
        u.row(i) /= u.row(i).sum();
    }
    const ContinuousDataset d(u);
    Eigen::VectorXd beta(5);
    beta << -0.8, -0.5, 0, 0.5, 2;
    for (auto k : {WeightKind::product, WeightKind::capped_product, WeightKind::min, WeightKind::capped_min}) {
        const auto ws = hybrid_workspace(d, WeightSpec::make(k, 0.05), beta);
        EXPECT_TRUE(ws.W.allFinite());
        EXPECT_TRUE(ws.d().allFinite());
        EXPECT_TRUE(ws.V.allFinite());
    }
}
