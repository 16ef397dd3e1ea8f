#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sigcond/kernels.hpp"
#include "test_support.hpp"

using namespace sigcond;

TEST(EvaluateKernel, RieszUnitDistance) {
    const auto k = KernelSpec::riesz(2.0, 0.0);
    EXPECT_DOUBLE_EQ(evaluate_kernel(k, Point{0, 0, 0}, Point{1, 0, 0}), 1.0);
}

TEST(EvaluateKernel, RegularizedDiagonal) {
    const auto k = KernelSpec::riesz(2.0, 0.3);
    EXPECT_NEAR(evaluate_kernel(k, Point{0, 0, 0}, Point{0, 0, 0}), 1.0 / 0.3, 1e-14);
}

TEST(EvaluateKernel, LogDiskUnitSeparation) {
    const auto k = KernelSpec::log_disk(0.0);
    EXPECT_DOUBLE_EQ(evaluate_kernel(k, Point{0.5, 0}, Point{-0.5, 0}), 0.0);
    EXPECT_NEAR(evaluate_kernel(k, Point{0.1, 0}, Point{-0.1, 0.2}), -std::log(std::sqrt(0.08)), 1e-15);
}

TEST(EvaluateKernel, RieszGeneralOrder) {
    const auto k = KernelSpec::riesz(1.5, 0.0);
    // |x-y|^(alpha-n) = 2^(-1.5)
    EXPECT_NEAR(evaluate_kernel(k, Point{0, 0, 0}, Point{0, 2, 0}), std::pow(2.0, -1.5), 1e-15);
}

TEST(EvaluateKernel, CustomTableLookup) {
    Eigen::MatrixXd t(2, 2);
    t << 2.0, 0.5, 0.5, 3.0;
    const auto k = KernelSpec::custom_table(t);
    EXPECT_EQ(evaluate_kernel(k, Point{0}, Point{1}), 0.5);
    EXPECT_EQ(evaluate_kernel(k, Point{1}, Point{1}), 3.0);
    EXPECT_THROW(evaluate_kernel(k, Point{2}, Point{1}), InvalidArgument);
    EXPECT_THROW(evaluate_kernel(k, Point{0.5}, Point{1}), InvalidArgument);
}

TEST(EvaluateKernel, Errors) {
    EXPECT_THROW(evaluate_kernel(KernelSpec::riesz(2.0, 0.1), Point{0, 0}, Point{0, 0, 0}), DimensionMismatch);
    EXPECT_THROW(evaluate_kernel(KernelSpec::riesz(3.0, 0.1), Point{0, 0, 0}, Point{1, 0, 0}), InvalidArgument);
    EXPECT_THROW(evaluate_kernel(KernelSpec::riesz(0.0, 0.1), Point{0, 0, 0}, Point{1, 0, 0}), InvalidArgument);
    EXPECT_THROW(evaluate_kernel(KernelSpec::log_disk(0.1), Point{1.0, 0}, Point{0, 0}), InvalidArgument);
    EXPECT_THROW(evaluate_kernel(KernelSpec::newtonian(0.1), Point{0, 0}, Point{1, 0}), InvalidArgument);
    EXPECT_THROW(evaluate_kernel(KernelSpec::riesz(2.0, 0.0), Point{0, 0, 0}, Point{0, 0, 0}), InvalidArgument);
}

TEST(EvaluateKernel, SymmetryIsExact) {
    std::mt19937_64 rng(7);
    const std::vector<KernelSpec> specs = {KernelSpec::riesz(2.0, 0.05), KernelSpec::riesz(1.3, 0.2),
                                           KernelSpec::newtonian(0.01)};
    for (const auto& k : specs) {
        for (int t = 0; t < 200; ++t) {
            const auto x = fixtures::random_point(rng, 3, -2.0, 2.0);
            const auto y = fixtures::random_point(rng, 3, -2.0, 2.0);
            ASSERT_EQ(evaluate_kernel(k, x, y), evaluate_kernel(k, y, x));
        }
    }
    const auto lk = KernelSpec::log_disk(0.01);
    for (int t = 0; t < 200; ++t) {
        const auto x = fixtures::random_point(rng, 2, -0.7, 0.7);
        const auto y = fixtures::random_point(rng, 2, -0.7, 0.7);
        ASSERT_EQ(evaluate_kernel(lk, x, y), evaluate_kernel(lk, y, x));
    }
}

TEST(EvaluateKernel, RegularizationContinuity) {
    // |kappa_eps - kappa_0| <= eps^2 at |x - y| >= 1 for alpha = 2, n = 3.
    std::mt19937_64 rng(11);
    for (int t = 0; t < 500; ++t) {
        const auto x = fixtures::random_point(rng, 3, -3.0, 3.0);
        const auto y = fixtures::random_point(rng, 3, -3.0, 3.0);
        if (distance(x, y) < 1.0) continue;
        const double exact = evaluate_kernel(KernelSpec::riesz(2.0, 0.0), x, y);
        for (double eps : {0.5, 0.1, 0.01, 1e-4}) {
            const double reg = evaluate_kernel(KernelSpec::riesz(2.0, eps), x, y);
            ASSERT_LE(std::abs(reg - exact), eps * eps);
        }
    }
}

TEST(AssembleGram, SingleNode) {
    const std::vector<Point> nodes = {Point{0, 0, 0}};
    const auto g = assemble_gram(KernelSpec::riesz(2.0, 1.0), nodes);
    ASSERT_EQ(g.size(), 1);
    EXPECT_DOUBLE_EQ(g.entries(0, 0), 1.0);
}

TEST(AssembleGram, TwoNodesUnitDistance) {
    const std::vector<Point> nodes = {Point{0, 0, 0}, Point{1, 0, 0}};
    const auto g = assemble_gram(KernelSpec::riesz(2.0, 1.0), nodes);
    EXPECT_DOUBLE_EQ(g.entries(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(g.entries(1, 1), 1.0);
    EXPECT_NEAR(g.entries(0, 1), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_EQ(g.entries(0, 1), g.entries(1, 0));
}

TEST(AssembleGram, RandomNodesSymmetricFiniteAndElementwise) {
    std::mt19937_64 rng(3);
    std::vector<Point> nodes;
    for (int i = 0; i < 50; ++i) nodes.push_back(fixtures::random_point(rng, 3, 0.0, 1.0));
    const auto spec = KernelSpec::riesz(2.0, default_epsilon(nodes));
    const auto g = assemble_gram(spec, nodes);
    ASSERT_TRUE(g.entries.allFinite());
    ASSERT_TRUE((g.entries.array() == g.entries.transpose().array()).all());
    for (std::size_t p = 0; p < nodes.size(); ++p)
        for (std::size_t q = 0; q < nodes.size(); ++q)
            ASSERT_EQ(g.entries(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)),
                      evaluate_kernel(spec, nodes[p], nodes[q]));
}

TEST(AssembleGram, Errors) {
    const std::vector<Point> empty;
    EXPECT_THROW(assemble_gram(KernelSpec::riesz(2.0, 1.0), empty), InvalidArgument);
    const std::vector<Point> mixed = {Point{0, 0, 0}, Point{1, 0}};
    EXPECT_THROW(assemble_gram(KernelSpec::riesz(2.0, 1.0), mixed), DimensionMismatch);
    // eps = 0 leaves the diagonal singular
    const std::vector<Point> two = {Point{0, 0, 0}, Point{1, 0, 0}};
    EXPECT_THROW(assemble_gram(KernelSpec::riesz(2.0, 0.0), two), InvalidArgument);
    Eigen::MatrixXd asym(2, 2);
    asym << 1, 0.5, 0.4, 1;
    const std::vector<Point> idx = {Point{0}, Point{1}};
    EXPECT_THROW(assemble_gram(KernelSpec::custom_table(asym), idx), InvalidArgument);
}

TEST(DefaultEpsilon, HalfMinimumSpacing) {
    const std::vector<Point> nodes = {Point{0, 0, 0}, Point{1, 0, 0}, Point{1, 0.4, 0}, Point{1, 0.4, 0}};
    EXPECT_DOUBLE_EQ(default_epsilon(nodes), 0.2);
}

TEST(CheckPositiveDefinite, Identity) {
    const auto d = check_positive_definite(Eigen::MatrixXd::Identity(3, 3));
    EXPECT_NEAR(d.min_eigenvalue, 1.0, 1e-15);
    EXPECT_TRUE(d.is_pd);
    EXPECT_TRUE(d.is_strictly_pd);
}

TEST(CheckPositiveDefinite, RankOnePsd) {
    Eigen::MatrixXd m(2, 2);
    m << 1, 1, 1, 1;
    const auto d = check_positive_definite(m);
    EXPECT_NEAR(d.min_eigenvalue, 0.0, 1e-15);
    EXPECT_TRUE(d.is_pd);
    EXPECT_FALSE(d.is_strictly_pd);
}

TEST(CheckPositiveDefinite, Indefinite) {
    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 2, 1;
    const auto d = check_positive_definite(m);
    EXPECT_NEAR(d.min_eigenvalue, -1.0, 1e-14);
    EXPECT_FALSE(d.is_pd);
}

TEST(CheckPositiveDefinite, RegularizedRieszStrictlyPd) {
    std::mt19937_64 rng(5);
    std::vector<Point> nodes;
    for (int i = 0; i < 20; ++i) nodes.push_back(fixtures::random_point(rng, 3, 0.0, 1.0));
    for (double alpha : {0.5, 1.0, 2.0, 2.5}) {
        const auto g = assemble_gram(KernelSpec::riesz(alpha, default_epsilon(nodes)), nodes);
        const auto d = check_positive_definite(g);
        EXPECT_TRUE(d.is_strictly_pd) << "alpha " << alpha << " lambda_min " << d.min_eigenvalue;
        // independent route: Cholesky succeeds
        Eigen::LLT<Eigen::MatrixXd> llt(g.entries);
        EXPECT_EQ(llt.info(), Eigen::Success);
    }
}

TEST(CheckPositiveDefinite, QuadraticFormsNonnegativeOnCatalog) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    std::vector<Point> nodes3, nodes2;
    for (int i = 0; i < 30; ++i) nodes3.push_back(fixtures::random_point(rng, 3, -1.0, 1.0));
    for (int i = 0; i < 30; ++i) nodes2.push_back(fixtures::random_point(rng, 2, -0.6, 0.6));
    const std::vector<GramMatrix> grams = {
        assemble_gram(KernelSpec::riesz(1.0, default_epsilon(nodes3)), nodes3),
        assemble_gram(KernelSpec::newtonian(default_epsilon(nodes3)), nodes3),
        assemble_gram(KernelSpec::log_disk(default_epsilon(nodes2)), nodes2),
    };
    for (const auto& g : grams) {
        const auto d = check_positive_definite(g);
        for (int t = 0; t < 100; ++t) {
            Eigen::VectorXd w(g.size());
            for (auto& x : w) x = n01(rng);
            ASSERT_GE(w.dot(g.entries * w), -d.pd_tol * w.squaredNorm());
        }
    }
}

TEST(CheckPositiveDefinite, Deterministic) {
    std::mt19937_64 rng(2);
    std::vector<Point> nodes;
    for (int i = 0; i < 40; ++i) nodes.push_back(fixtures::random_point(rng, 3, 0.0, 1.0));
    const auto g = assemble_gram(KernelSpec::newtonian(0.05), nodes);
    const auto a = check_positive_definite(g);
    const auto b = check_positive_definite(g);
    EXPECT_EQ(a.min_eigenvalue, b.min_eigenvalue);
    EXPECT_EQ(a.max_eigenvalue, b.max_eigenvalue);
}
