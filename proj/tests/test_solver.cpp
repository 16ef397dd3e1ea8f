#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sigcond/solver.hpp"
#include "test_support.hpp"

using namespace sigcond;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) out[k++] = x;
    return out;
}

Plate unit_plate(int sign, std::vector<Point> nodes, double mass, double sigma) {
    Plate p;
    p.sign = sign;
    p.nodes = std::move(nodes);
    p.g = Eigen::VectorXd::Ones(p.size());
    p.sigma = Eigen::VectorXd::Constant(p.size(), sigma);
    p.mass = mass;
    return p;
}

SolverConfig pg(double tol = 1e-10) {
    SolverConfig cfg;
    cfg.grad_tol = tol;
    cfg.max_iters = 200000;
    return cfg;
}

SolverConfig fw(double tol = 1e-10) {
    SolverConfig cfg = pg(tol);
    cfg.algorithm = Algorithm::frank_wolfe;
    return cfg;
}

void expect_admissible(const Condenser& c, const VectorMeasure& mu) {
    for (std::size_t i = 0; i < c.plate_count(); ++i) {
        const auto& p = c.plate(i);
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            EXPECT_GE(mu.weights[i][k], 0.0);
            EXPECT_LE(mu.weights[i][k], p.sigma[k]);
        }
        EXPECT_LE(std::abs(p.g.dot(mu.weights[i]) - p.mass), 1e-10 * p.mass);
    }
}

} // namespace

// --- projection ------------------------------------------------------------

TEST(ProjectPlate, AlreadyFeasible) {
    const auto w = project_plate(vec({0.9, 0.1}), vec({1, 1}), vec({1, 1}), 1.0);
    EXPECT_NEAR(w[0], 0.9, 1e-15);
    EXPECT_NEAR(w[1], 0.1, 1e-15);
}

TEST(ProjectPlate, CapBinds) {
    // KKT by hand: tau = 1 gives clip((1, -1)) = (1, 0) with mass 1.
    const auto w = project_plate(vec({2, 0}), vec({1, 1}), vec({1, 1}), 1.0);
    EXPECT_NEAR(w[0], 1.0, 1e-15);
    EXPECT_NEAR(w[1], 0.0, 1e-15);
}

TEST(ProjectPlate, Symmetric) {
    const auto w = project_plate(vec({0, 0}), vec({1, 1}), vec({1, 1}), 1.0);
    EXPECT_NEAR(w[0], 0.5, 1e-15);
    EXPECT_NEAR(w[1], 0.5, 1e-15);
}

TEST(ProjectPlate, Degenerate) {
    const auto w = project_plate(vec({5, -3, 0.2}), vec({1, 2, 1}), vec({0.5, 0.25, 1}), 2.0);
    EXPECT_EQ(w, vec({0.5, 0.25, 1}));
    EXPECT_EQ(project_plate(vec({5, -3}), vec({1, 1}), vec({1, 1}), 0.0), vec({0, 0}));
}

TEST(ProjectPlate, Infeasible) {
    EXPECT_THROW(project_plate(vec({0, 0}), vec({1, 1}), vec({0.4, 0.4}), 1.0), InfeasibleProblem);
    EXPECT_THROW(project_plate(vec({0, 0}), vec({1, 1}), vec({1, 1}), -0.1), InfeasibleProblem);
    EXPECT_THROW(project_plate(vec({0, 0}), vec({1}), vec({1, 1}), 1.0), ShapeMismatch);
}

TEST(ProjectPlate, MatchesEnumerationOracle) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 300; ++t) {
        const Eigen::Index n = 1 + t % 6;
        Eigen::VectorXd v(n), g(n), s(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            v[j] = 3.0 * u(rng) - 1.5;
            g[j] = 0.3 + u(rng);
            s[j] = (t % 5 == 0 && j == 0) ? 0.0 : 0.1 + u(rng);
        }
        const double a = u(rng) * g.dot(s);
        const Eigen::VectorXd w = project_plate(v, g, s, a);
        // min |w - v|^2 = w^T I w + 2 (-v)^T w + const
        const Eigen::VectorXd ref =
            fixtures::brute_force_qp(Eigen::MatrixXd::Identity(n, n), -v, {{0, n, g, s, a}});
        ASSERT_EQ(ref.size(), n);
        ASSERT_LE((w - ref).cwiseAbs().maxCoeff(), 1e-12) << "trial " << t;
        ASSERT_LE(std::abs(g.dot(w) - a), 1e-12 * (1.0 + a));
        ASSERT_TRUE((w.array() >= 0.0).all() && (w.array() <= s.array()).all());
    }
}

// --- solve -------------------------------------------------------------------

TEST(Solve, PinnedSingleNode) {
    const Condenser c({unit_plate(+1, {Point{0, 0, 0}}, 1.0, 1.0)});
    const auto k = assemble_gram(KernelSpec::newtonian(0.25), c);
    const auto r = solve(c, k, FieldSpec::zero(c));
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.minimizer.weights[0][0], 1.0);
    EXPECT_NEAR(r.value, 4.0, 1e-14);
    const auto cert = verify_kkt(c, k, FieldSpec::zero(c), r.minimizer, 1e-12);
    EXPECT_TRUE(cert.ok);
    EXPECT_EQ(cert.max_residual, 0.0);
}

TEST(Solve, SymmetricPair) {
    const Condenser c({unit_plate(+1, {Point{-1, 0, 0}, Point{1, 0, 0}}, 1.0, 1.0)});
    const auto k = assemble_gram(KernelSpec::newtonian(0.2), c);
    for (const auto& cfg : {pg(), fw()}) {
        const auto r = solve(c, k, FieldSpec::zero(c), cfg);
        EXPECT_NEAR(r.minimizer.weights[0][0], 0.5, 1e-10);
        EXPECT_NEAR(r.minimizer.weights[0][1], 0.5, 1e-10);
    }
}

TEST(Solve, MatchesBruteForceOnTinyInstances) {
    std::mt19937_64 rng(123);
    for (int t = 0; t < 25; ++t) {
        fixtures::RandomInstanceOptions o;
        o.plates = 2;
        o.nodes_per_plate = 3;
        o.sigma_headroom = 1.2 + 0.3 * (t % 4);
        const auto c = fixtures::random_condenser(rng, o);
        const auto k = assemble_gram(KernelSpec::newtonian(0.1), c);
        std::vector<Eigen::VectorXd> fvals;
        std::normal_distribution<double> n01;
        for (const auto& p : c.plates()) {
            Eigen::VectorXd v(p.size());
            for (auto& x : v) x = n01(rng);
            fvals.push_back(v);
        }
        const auto f = FieldSpec::case1(fvals);
        std::vector<fixtures::BruteBlock> blocks;
        Eigen::VectorXd cvec(c.size());
        for (std::size_t i = 0; i < c.plate_count(); ++i) {
            blocks.push_back({c.offset(i), c.plate(i).size(), c.plate(i).g, c.plate(i).sigma, c.plate(i).mass});
            cvec.segment(c.offset(i), c.plate(i).size()) = fvals[i];
        }
        Eigen::VectorXd s(c.size());
        for (std::size_t i = 0; i < c.plate_count(); ++i) s.segment(c.offset(i), c.plate(i).size()).setConstant(c.plate(i).sign);
        const Eigen::MatrixXd Q = s.asDiagonal() * k.entries * s.asDiagonal();
        const Eigen::VectorXd ref = fixtures::brute_force_qp(Q, cvec, blocks);
        ASSERT_EQ(ref.size(), c.size());
        const double ref_val = ref.dot(Q * ref) + 2.0 * cvec.dot(ref);
        for (const auto& cfg : {pg(), fw()}) {
            const auto r = solve(c, k, f, cfg);
            ASSERT_TRUE(r.converged) << "trial " << t << " " << to_string(cfg.algorithm);
            ASSERT_NEAR(r.value, ref_val, 1e-9);
            ASSERT_LE((signed_stack(c, r.minimizer).cwiseAbs() - ref.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-6);
        }
    }
}

TEST(Solve, AlgorithmsAgreeOnRandomSignedProblem) {
    std::mt19937_64 rng(5);
    fixtures::RandomInstanceOptions o;
    o.plates = 2;
    o.nodes_per_plate = 10;
    const auto c = fixtures::random_condenser(rng, o);
    const auto k = assemble_gram(KernelSpec::newtonian(0.05), c);
    const auto f = FieldSpec::zero(c);
    const auto a = solve(c, k, f, pg(1e-9));
    const auto b = solve(c, k, f, fw(1e-9));
    ASSERT_TRUE(a.converged);
    ASSERT_TRUE(b.converged);
    EXPECT_NEAR(a.value, b.value, 1e-6);
    EXPECT_LE(semimetric_distance(c, k, a.minimizer, b.minimizer), 1e-4);
}

TEST(Solve, ReportInvariants) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        fixtures::RandomInstanceOptions o;
        o.plates = 3;
        o.nodes_per_plate = 8;
        o.sigma_headroom = 1.05 + 0.2 * t;
        const auto c = fixtures::random_condenser(rng, o);
        const auto k = assemble_gram(KernelSpec::riesz(1.5, 0.05), c);
        const auto f = FieldSpec::zero(c);
        for (auto rule : {StepRule::fixed_lipschitz, StepRule::backtracking}) {
            auto cfg = pg(1e-9);
            cfg.step_rule = rule;
            const auto r = solve(c, k, f, cfg);
            ASSERT_TRUE(r.converged);
            expect_admissible(c, r.minimizer);
            EXPECT_NEAR(r.value, weighted_energy(c, k, f, r.minimizer), 1e-12 * std::abs(r.value));
            for (std::size_t s = 1; s < r.objective_trace.size(); ++s)
                ASSERT_LE(r.objective_trace[s], r.objective_trace[s - 1] + 1e-12 * (1.0 + std::abs(r.objective_trace[s - 1])));
        }
    }
}

TEST(Solve, FrankWolfeStepVariants) {
    std::mt19937_64 rng(10);
    fixtures::RandomInstanceOptions o;
    o.nodes_per_plate = 6;
    const auto c = fixtures::random_condenser(rng, o);
    const auto k = assemble_gram(KernelSpec::newtonian(0.05), c);
    const auto f = FieldSpec::zero(c);
    const auto ref = solve(c, k, f, pg(1e-11));
    for (auto step : {FrankWolfeStep::open_loop, FrankWolfeStep::line_search}) {
        auto cfg = fw(1e-9);
        cfg.fw_step = step;
        cfg.max_iters = 20000;
        const auto r = solve(c, k, f, cfg);
        expect_admissible(c, r.minimizer);
        // sublinear variants: value gap only
        EXPECT_LE(r.value - ref.value, 1e-2) << to_string(step);
        EXPECT_GE(r.value - ref.value, -1e-9) << to_string(step);
    }
}

TEST(Solve, InfiniteFieldNodesCarryNoCharge) {
    const Condenser c({unit_plate(+1, {Point{0, 0, 0}, Point{1, 0, 0}, Point{2, 0, 0}}, 1.0, 1.0)});
    const auto k = assemble_gram(KernelSpec::newtonian(0.2), c);
    const auto f = FieldSpec::case1({vec({0.0, kInf, 0.0})});
    const auto r = solve(c, k, f, pg());
    EXPECT_EQ(r.minimizer.weights[0][1], 0.0);
    EXPECT_TRUE(std::isfinite(r.value));
    EXPECT_NEAR(r.minimizer.weights[0][0], 0.5, 1e-9);
}

TEST(Solve, DegeneratePlateForcedToSigma) {
    const Condenser c({unit_plate(+1, {Point{0, 0, 0}, Point{1, 0, 0}}, 1.0, 0.5),
                       unit_plate(-1, {Point{4, 0, 0}, Point{5, 0, 0}}, 1.0, 1.0)});
    const auto k = assemble_gram(KernelSpec::newtonian(0.2), c);
    const auto r = solve(c, k, FieldSpec::zero(c), pg());
    EXPECT_EQ(r.minimizer.weights[0], vec({0.5, 0.5}));
    EXPECT_TRUE(r.converged);
}

TEST(Solve, Errors) {
    const Condenser c({unit_plate(+1, {Point{0, 0, 0}, Point{1, 0, 0}}, 1.0, 0.0)});
    const auto k = assemble_gram(KernelSpec::newtonian(0.2), c);
    try {
        solve(c, k, FieldSpec::zero(c));
        FAIL() << "expected InfeasibleProblem";
    } catch (const InfeasibleProblem& e) {
        EXPECT_EQ(std::string(e.what()), "plate 0: a exceeds ⟨g,σ⟩");
    }
    Eigen::MatrixXd bad(2, 2);
    bad << 1, 2, 2, 1;
    const Condenser c2({unit_plate(+1, {Point{0}, Point{1}}, 1.0, 1.0)});
    const auto k2 = assemble_gram(KernelSpec::custom_table(bad), c2);
    EXPECT_THROW(solve(c2, k2, FieldSpec::zero(c2)), NotPositiveDefinite);
}

TEST(Solve, UnconvergedReportsBestIterate) {
    std::mt19937_64 rng(14);
    const auto c = fixtures::random_condenser(rng, {});
    const auto k = assemble_gram(KernelSpec::newtonian(0.05), c);
    auto cfg = pg(1e-14);
    cfg.max_iters = 1;
    const auto r = solve(c, k, FieldSpec::zero(c), cfg);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 1);
    expect_admissible(c, r.minimizer);
}

TEST(Solve, LowerBoundCaseOne) {
    std::mt19937_64 rng(15);
    std::normal_distribution<double> n01;
    for (int t = 0; t < 10; ++t) {
        const auto c = fixtures::random_condenser(rng, {});
        const auto k = assemble_gram(KernelSpec::newtonian(0.05), c);
        std::vector<Eigen::VectorXd> vals;
        double bound = 0.0;
        for (const auto& p : c.plates()) {
            Eigen::VectorXd v(p.size());
            for (auto& x : v) x = 5.0 * n01(rng);
            bound += p.mass * v.cwiseAbs().maxCoeff() / p.g.minCoeff();
            vals.push_back(v);
        }
        const auto r = solve(c, k, FieldSpec::case1(vals), pg(1e-9));
        ASSERT_TRUE(std::isfinite(r.value));
        ASSERT_GE(r.value, -2.0 * bound);
    }
}

TEST(Solve, UniqueUpToSemimetricFromRandomStarts) {
    std::mt19937_64 rng(16);
    fixtures::RandomInstanceOptions o;
    o.plates = 3;
    o.nodes_per_plate = 8;
    o.overlap_equal_sign = true;
    const auto c = fixtures::random_condenser(rng, o);
    const auto k = assemble_gram(KernelSpec::newtonian(0.05), c);
    std::vector<SolveReport> runs;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        auto cfg = pg(1e-10);
        cfg.seed = seed;
        runs.push_back(solve(c, k, FieldSpec::zero(c), cfg));
    }
    for (std::size_t a = 0; a < runs.size(); ++a)
        for (std::size_t b = a + 1; b < runs.size(); ++b)
            EXPECT_LE(semimetric_distance(c, k, runs[a].minimizer, runs[b].minimizer), 1e-5);
}

TEST(Solve, MidpointConvexity) {
    std::mt19937_64 rng(18);
    const auto c = fixtures::random_condenser(rng, {});
    const auto k = assemble_gram(KernelSpec::newtonian(0.05), c);
    const auto f = FieldSpec::zero(c);
    // Two admissible measures: a solution and a random projection of noise.
    const auto r = solve(c, k, f, pg());
    for (int t = 0; t < 20; ++t) {
        VectorMeasure other;
        for (std::size_t i = 0; i < c.plate_count(); ++i) {
            const auto& p = c.plate(i);
            Eigen::VectorXd v(p.size());
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (auto& x : v) x = u(rng);
            other.weights.push_back(project_plate(v, p.g, p.sigma, p.mass));
        }
        VectorMeasure mid;
        for (std::size_t i = 0; i < c.plate_count(); ++i)
            mid.weights.push_back(0.5 * (r.minimizer.weights[i] + other.weights[i]));
        const double gm = weighted_energy(c, k, f, mid);
        ASSERT_LE(gm, std::max(r.value, weighted_energy(c, k, f, other)) + 1e-10);
        ASSERT_GE(weighted_energy(c, k, f, other), r.value - 1e-9);
    }
}

TEST(Solve, MonotoneUnderShrinkingCondenser) {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        fixtures::RandomInstanceOptions o;
        o.nodes_per_plate = 10;
        o.sigma_headroom = 3.0;
        const auto c = fixtures::random_condenser(rng, o);
        std::vector<Plate> sub;
        for (const auto& p : c.plates()) {
            Plate q = p;
            const Eigen::Index keep = 7;
            q.nodes.resize(static_cast<std::size_t>(keep));
            q.g = p.g.head(keep);
            q.sigma = p.sigma.head(keep) * (0.8 + 0.2 * u(rng));
            sub.push_back(q);
        }
        const Condenser cs(sub);
        if (!check_feasibility(cs, FieldSpec::zero(cs)).feasible) continue;
        const auto spec = KernelSpec::newtonian(0.05);
        const auto big = solve(c, assemble_gram(spec, c), FieldSpec::zero(c), pg());
        const auto small = solve(cs, assemble_gram(spec, cs), FieldSpec::zero(cs), pg());
        EXPECT_GE(small.value, big.value - 1e-8);
    }
}

// --- KKT certificate -----------------------------------------------------------

TEST(VerifyKkt, PerturbedMinimizerFails) {
    std::mt19937_64 rng(20);
    fixtures::RandomInstanceOptions o;
    o.nodes_per_plate = 10;
    o.sigma_headroom = 4.0;
    const auto c = fixtures::random_condenser(rng, o);
    const auto k = assemble_gram(KernelSpec::newtonian(0.05), c);
    const auto f = FieldSpec::zero(c);
    const auto r = solve(c, k, f, pg(1e-8));
    ASSERT_TRUE(verify_kkt(c, k, f, r.minimizer, 1e-6).ok);
    // Shift 0.01 of g-mass between two interior coordinates of plate 0.
    auto bad = r.minimizer;
    const auto& p = c.plate(0);
    Eigen::Index from = -1, to = -1;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        const double w = bad.weights[0][j];
        if (from < 0 && w > 0.02) from = j;
        else if (to < 0 && w + 0.02 < p.sigma[j]) to = j;
    }
    ASSERT_GE(from, 0);
    ASSERT_GE(to, 0);
    bad.weights[0][from] -= 0.01 / p.g[from];
    bad.weights[0][to] += 0.01 / p.g[to];
    const auto cert = verify_kkt(c, k, f, bad, 1e-6);
    EXPECT_FALSE(cert.ok);
    EXPECT_GT(cert.max_residual, 1e-4);
}

TEST(VerifyKkt, IndependentOfSolverState) {
    std::mt19937_64 rng(22);
    const auto c = fixtures::random_condenser(rng, {});
    const auto k = assemble_gram(KernelSpec::riesz(1.0, 0.05), c);
    const auto f = FieldSpec::zero(c);
    const auto r = solve(c, k, f, fw(1e-8));
    ASSERT_TRUE(r.converged);
    const auto cert = verify_kkt(c, k, f, r.minimizer, 1e-6);
    EXPECT_TRUE(cert.ok);
    EXPECT_EQ(cert.multipliers.size(), c.plate_count());
}
