#pragma once

// Potential-theory experiments on top of the solver engine: equilibrium
// measures and capacity, balayage onto a node set, the exhaustion schedule and
// the rotational-body capacity dichotomy.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sigcond/condenser.hpp"
#include "sigcond/errors.hpp"
#include "sigcond/geometry.hpp"
#include "sigcond/kernels.hpp"
#include "sigcond/solver.hpp"

namespace sigcond {

namespace detail {

/// Gram restricted to `idx` (in that order), as a single-plate matrix.
inline GramMatrix restrict_gram(const GramMatrix& k, const std::vector<Eigen::Index>& idx) {
    GramMatrix out;
    out.entries = k.entries(idx, idx);
    out.spec = k.spec;
    out.node_index.emplace_back(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
        out.node_index[0][j] = static_cast<Eigen::Index>(j);
        if (!k.nodes.empty()) out.nodes.push_back(k.nodes[static_cast<std::size_t>(idx[j])]);
    }
    return out;
}

inline std::vector<Eigen::Index> index_range(Eigen::Index begin, Eigen::Index end) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = begin; j < end; ++j) out.push_back(j);
    return out;
}

/// Runs the PG engine after the definiteness check every analysis op needs.
inline EngineResult run_engine(const QpProblem& qp, const Eigen::VectorXd& w0, double grad_tol, int max_iters,
                               const char* what) {
    const auto pd = check_positive_definite(qp.Q);
    if (!pd.is_pd) {
        throw NotPositiveDefinite(std::string(what) + ": kernel matrix is not positive semidefinite (lambda_min = " +
                                  std::to_string(pd.min_eigenvalue) + ")");
    }
    EngineOptions opt;
    opt.grad_tol = grad_tol;
    opt.max_iters = max_iters > 0 ? max_iters : 200000;
    opt.lipschitz = 2.0 * std::max(pd.max_eigenvalue, std::numeric_limits<double>::min());
    return minimize(qp, w0, opt);
}

/// Drops weights the engine already treats as zero.
inline void clear_dust(Eigen::VectorXd& w) {
    for (auto& x : w)
        if (x <= kActiveRelTol) x = 0.0;
}

} // namespace detail

// --- equilibrium -------------------------------------------------------------

struct EquilibriumReport {
    Eigen::VectorXd unit_minimizer;
    double robin_constant = 0.0;  // W
    double capacity = 0.0;        // 1 / W
    double frostman_violation = 0.0;
    double frostman_tol = 0.0;
    bool frostman_ok = false;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Unit-mass energy minimizer on the nodes of `k`. A negative frostman_tol
/// selects 1e-6 * W.
inline EquilibriumReport equilibrium(const GramMatrix& k, double frostman_tol = -1.0, double grad_tol = 1e-10,
                                     int max_iters = 0) {
    const Eigen::Index n = k.size();
    if (n == 0) throw InvalidArgument("equilibrium: empty node set");
    detail::QpProblem qp;
    qp.Q = k.entries;
    qp.c = Eigen::VectorXd::Zero(n);
    // sigma = +inf is replaced by the never-binding cap 1 (weights sum to 1).
    qp.blocks.push_back({0, n, Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(n), 1.0});
    const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    auto r = detail::run_engine(qp, w0, grad_tol, max_iters, "equilibrium");

    EquilibriumReport rep;
    rep.unit_minimizer = r.w;
    rep.robin_constant = detail::bilinear(k.entries, r.w, r.w);
    if (!(rep.robin_constant > 0.0)) throw NotPositiveDefinite("equilibrium: minimal energy is not positive");
    rep.capacity = 1.0 / rep.robin_constant;
    const Eigen::VectorXd pot = k.entries * r.w;
    double viol = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        viol = std::max(viol, rep.robin_constant - pot[j]);
        if (r.w[j] > detail::kActiveRelTol) viol = std::max(viol, std::abs(pot[j] - rep.robin_constant));
    }
    rep.frostman_violation = viol;
    rep.frostman_tol = frostman_tol >= 0.0 ? frostman_tol : 1e-6 * rep.robin_constant;
    rep.frostman_ok = viol <= rep.frostman_tol;
    rep.kkt_residual = r.kkt_residual;
    rep.iterations = r.iterations;
    rep.converged = r.converged;
    return rep;
}

inline EquilibriumReport equilibrium(const KernelSpec& spec, const std::vector<Point>& nodes, double frostman_tol = -1.0,
                                     double grad_tol = 1e-10, int max_iters = 0) {
    return equilibrium(assemble_gram(spec, std::span<const Point>(nodes)), frostman_tol, grad_tol, max_iters);
}

// --- balayage ----------------------------------------------------------------

struct BalayageReport {
    Eigen::VectorXd swept;  // weights on the target nodes
    double potential_residual = 0.0;
    double mass_ratio = 0.0;
    double source_mass = 0.0;
    double swept_mass = 0.0;
    double source_norm = 0.0;  // ||source||_kappa
    double swept_norm = 0.0;   // ||swept||_kappa
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Energy-norm projection of `source` (weights over the rows of `joint`)
/// onto nonnegative measures carried by the rows `target`.
inline BalayageReport balayage(const GramMatrix& joint, const Eigen::VectorXd& source,
                               const std::vector<Eigen::Index>& target, double tol = 1e-10, int max_iters = 0) {
    if (source.size() != joint.size()) throw ShapeMismatch("balayage: source length differs from the joint Gram");
    if (target.empty()) throw InvalidArgument("balayage: empty target");
    for (double w : source)
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("balayage: source must be nonnegative and finite");
    for (auto t : target)
        if (t < 0 || t >= joint.size()) throw InvalidArgument("balayage: target index out of range");
    const auto t_count = static_cast<Eigen::Index>(target.size());
    const Eigen::VectorXd src_pot_all = joint.entries * source;
    detail::QpProblem qp;
    qp.Q = joint.entries(target, target);
    qp.c = -src_pot_all(target);
    qp.blocks.push_back({0, t_count, Eigen::VectorXd::Ones(t_count), Eigen::VectorXd::Constant(t_count, kInf), std::nullopt});
    auto r = detail::run_engine(qp, Eigen::VectorXd::Zero(t_count), tol, max_iters, "balayage");
    detail::clear_dust(r.w);

    BalayageReport rep;
    rep.swept = r.w;
    const Eigen::VectorXd pot = qp.Q * r.w;
    double viol = 0.0;
    for (Eigen::Index j = 0; j < t_count; ++j) {
        const double diff = -qp.c[j] - pot[j];  // kappa(x, source) - kappa(x, swept)
        viol = std::max(viol, diff);
        if (r.w[j] > 0.0) viol = std::max(viol, std::abs(diff));
    }
    rep.potential_residual = viol;
    rep.source_mass = source.sum();
    rep.swept_mass = r.w.sum();
    rep.mass_ratio = rep.source_mass > 0.0 ? rep.swept_mass / rep.source_mass : 0.0;
    rep.source_norm = std::sqrt(std::max(0.0, detail::bilinear(joint.entries, source, source)));
    rep.swept_norm = std::sqrt(std::max(0.0, detail::bilinear(qp.Q, r.w, r.w)));
    rep.kkt_residual = r.kkt_residual;
    rep.iterations = r.iterations;
    rep.converged = r.converged;
    return rep;
}

/// Target nodes first, then source support points not already in the target.
struct JointNodes {
    std::vector<Point> nodes;
    std::vector<Eigen::Index> target;
    Eigen::VectorXd source;  // source weights over `nodes`
};

inline JointNodes joint_nodes(const ScalarSignedMeasure& source, const std::vector<Point>& target) {
    if (source.weights.size() != static_cast<Eigen::Index>(source.support.size()))
        throw ShapeMismatch("balayage: source support/weights mismatch");
    JointNodes j;
    std::map<Point, Eigen::Index> where;
    for (const auto& x : target) {
        if (!where.emplace(x, static_cast<Eigen::Index>(j.nodes.size())).second)
            throw InvalidArgument("balayage: duplicate target node");
        j.target.push_back(static_cast<Eigen::Index>(j.nodes.size()));
        j.nodes.push_back(x);
    }
    std::vector<std::pair<Eigen::Index, double>> placed;
    for (std::size_t m = 0; m < source.support.size(); ++m) {
        auto [it, inserted] = where.emplace(source.support[m], static_cast<Eigen::Index>(j.nodes.size()));
        if (inserted) j.nodes.push_back(source.support[m]);
        placed.emplace_back(it->second, source.weights[static_cast<Eigen::Index>(m)]);
    }
    j.source = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(j.nodes.size()));
    for (auto [idx, w] : placed) j.source[idx] += w;
    return j;
}

inline BalayageReport balayage(const KernelSpec& spec, const ScalarSignedMeasure& source, const std::vector<Point>& target,
                               double tol = 1e-10, int max_iters = 0) {
    const auto j = joint_nodes(source, target);
    return balayage(assemble_gram(spec, std::span<const Point>(j.nodes)), j.source, j.target, tol, max_iters);
}

// --- Green equilibrium -------------------------------------------------------

/// Minimizer theta of ||nu - bal(nu)||^2 over unit measures nu on `source`
/// rows, solved jointly with the swept measure on `target` rows.
struct GreenEquilibrium {
    Eigen::VectorXd theta;  // over source rows
    Eigen::VectorXd swept;  // balayage of theta onto target rows
    double green_energy = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline GreenEquilibrium green_equilibrium(const GramMatrix& joint, const std::vector<Eigen::Index>& source,
                                          const std::vector<Eigen::Index>& target, double grad_tol = 1e-10,
                                          int max_iters = 0) {
    const auto ns = static_cast<Eigen::Index>(source.size());
    const auto nt = static_cast<Eigen::Index>(target.size());
    if (ns == 0 || nt == 0) throw InvalidArgument("green_equilibrium: empty source or target");
    std::vector<Eigen::Index> all = source;
    all.insert(all.end(), target.begin(), target.end());
    Eigen::VectorXd s(ns + nt);
    s.head(ns).setOnes();
    s.tail(nt).setConstant(-1.0);
    detail::QpProblem qp;
    qp.Q = s.asDiagonal() * joint.entries(all, all) * s.asDiagonal();
    qp.c = Eigen::VectorXd::Zero(ns + nt);
    qp.blocks.push_back({0, ns, Eigen::VectorXd::Ones(ns), Eigen::VectorXd::Ones(ns), 1.0});
    qp.blocks.push_back({ns, nt, Eigen::VectorXd::Ones(nt), Eigen::VectorXd::Constant(nt, kInf), std::nullopt});
    Eigen::VectorXd w0 = Eigen::VectorXd::Zero(ns + nt);
    w0.head(ns).setConstant(1.0 / static_cast<double>(ns));
    auto r = detail::run_engine(qp, w0, grad_tol, max_iters, "green_equilibrium");
    GreenEquilibrium out;
    out.theta = r.w.head(ns);
    out.swept = r.w.tail(nt);
    detail::clear_dust(out.swept);
    out.green_energy = r.objective;
    out.kkt_residual = r.kkt_residual;
    out.iterations = r.iterations;
    out.converged = r.converged;
    return out;
}

// --- exhaustion --------------------------------------------------------------

struct ExhaustionStage {
    double node_fraction = 0.0;
    double sigma_scale = 1.0;
    std::vector<Eigen::Index> node_counts;  // per plate
    bool feasible = false;
    double value = 0.0;
    double semimetric_gap = 0.0;  // ||lambda_K - lambda_full||
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string message;  // infeasibility reason for skipped stages
};

struct ExhaustionTrace {
    std::vector<ExhaustionStage> stages;
    double full_value = 0.0;
    bool monotone = true;  // values nonincreasing over feasible stages within 1e-8
};

/// Solves truncations to the first ceil(fraction * N_i) nodes of every plate
/// with the constraint scaled by beta. Infeasible stages are recorded and skipped.
inline ExhaustionTrace exhaustion_experiment(const Condenser& c, const GramMatrix& k, const FieldSpec& f,
                                             const std::vector<double>& fractions, const std::vector<double>& betas,
                                             const SolverConfig& cfg = {}) {
    if (fractions.empty()) throw InvalidArgument("exhaustion: empty schedule");
    if (fractions.size() != betas.size()) throw InvalidArgument("exhaustion: fractions and betas differ in length");
    for (std::size_t s = 0; s < fractions.size(); ++s) {
        if (!(fractions[s] > 0.0 && fractions[s] <= 1.0)) throw InvalidArgument("exhaustion: fractions must lie in (0, 1]");
        if (!(betas[s] > 0.0) || !std::isfinite(betas[s])) throw InvalidArgument("exhaustion: betas must be finite and > 0");
    }
    check_gram(c, k);
    const auto full = solve(c, k, f, cfg);

    ExhaustionTrace trace;
    trace.full_value = full.value;
    double last = kInf;
    for (std::size_t s = 0; s < fractions.size(); ++s) {
        ExhaustionStage st;
        st.node_fraction = fractions[s];
        st.sigma_scale = betas[s];
        std::vector<Plate> plates;
        std::vector<Eigen::Index> rows;
        std::vector<Eigen::VectorXd> values;
        for (std::size_t i = 0; i < c.plate_count(); ++i) {
            const auto& p = c.plate(i);
            const auto n = std::min<Eigen::Index>(
                p.size(), static_cast<Eigen::Index>(std::ceil(fractions[s] * static_cast<double>(p.size()) - 1e-12)));
            st.node_counts.push_back(n);
            Plate q = p;
            q.nodes.resize(static_cast<std::size_t>(n));
            q.g = p.g.head(n);
            q.sigma = betas[s] * p.sigma.head(n);
            plates.push_back(std::move(q));
            for (Eigen::Index j = 0; j < n; ++j) rows.push_back(c.offset(i) + j);
            if (f.kind == FieldCase::case1) values.push_back(f.values.at(i).head(n));
        }
        const Condenser sub(std::move(plates));
        const FieldSpec sub_f = f.kind == FieldCase::case1 ? FieldSpec::case1(values) : f;
        const auto feas = check_feasibility(sub, sub_f);
        if (!feas.feasible) {
            st.message = feas.message();
            trace.stages.push_back(std::move(st));
            continue;
        }
        GramMatrix sub_k = detail::restrict_gram(k, rows);
        sub_k.node_index.clear();
        for (std::size_t i = 0; i < sub.plate_count(); ++i)
            sub_k.node_index.push_back(detail::index_range(sub.offset(i), sub.offset(i) + sub.plate(i).size()));
        const auto r = solve(sub, sub_k, sub_f, cfg);
        VectorMeasure padded = VectorMeasure::zero(c);
        for (std::size_t i = 0; i < c.plate_count(); ++i)
            padded.weights[i].head(sub.plate(i).size()) = r.minimizer.weights[i];
        st.feasible = true;
        st.value = r.value;
        st.semimetric_gap = semimetric_distance(c, k, padded, full.minimizer);
        st.kkt_residual = r.kkt_residual;
        st.iterations = r.iterations;
        st.converged = r.converged;
        if (st.value > last + 1e-8) trace.monotone = false;
        last = st.value;
        trace.stages.push_back(std::move(st));
    }
    return trace;
}

// --- thinness demo -----------------------------------------------------------

/// Rotational body A2 along the positive x1 axis, compact plate A1 and source
/// set K (both spheres), Newtonian kernel in R^3.
struct ThinnessOptions {
    geometry::Profile profile = geometry::Profile::power_s;
    double s = 1.0;
    std::vector<double> radii = {5.0, 10.0, 20.0};
    double q = 1.0;
    double axial_step_factor = 1.0;
    double min_ring_radius = 0.02;
    int slices = 3;  // sections omega_k carved from the far half of A2
    Point a1_center{-2.0, 0.0, 0.0};
    double a1_radius = 0.5;
    std::size_t a1_nodes = 40;
    Point k_center{-2.0, 1.5, 0.0};
    double k_radius = 0.5;
    std::size_t k_nodes = 40;
    double grad_tol = 1e-9;
    int max_iters = 0;
};

struct ThinnessRecord {
    double radius = 0.0;
    double resolved_length = 0.0;  // largest x1 carrying nodes
    std::size_t node_count = 0;    // nodes of the truncated A2
    double capacity = 0.0;
    double green_energy = 0.0;     // ||theta - bal(theta)||^2
    double balayage_mass = 0.0;    // bal(theta)(A2)
    double deficit = 0.0;          // c = 1 - bal(theta)(A2)
    int slices_used = 0;
    double value = 0.0;            // minimal G_f of the constrained problem
    double lower_bound = 0.0;      // green_energy - ||theta_K||^2
    double minimizer_mass_center = 0.0;  // x1-barycenter of mu^2
    double gap_to_balayage_candidate = 0.0;
    bool converged = false;
};

struct ThinnessReport {
    std::vector<ThinnessRecord> records;
    double epsilon = 0.0;
    bool capacity_nondecreasing = true;
    std::string note;
};

inline ThinnessReport thinness_demo(const ThinnessOptions& o) {
    if (o.radii.empty()) throw InvalidArgument("thinness: no truncation radii");
    for (std::size_t r = 1; r < o.radii.size(); ++r)
        if (!(o.radii[r] > o.radii[r - 1])) throw InvalidArgument("thinness: radii must be strictly increasing");
    if (o.slices < 1) throw InvalidArgument("thinness: slices must be >= 1");

    geometry::RotationalBodyOptions bo;
    bo.profile = o.profile;
    bo.s = o.s;
    bo.q = o.q;
    bo.axial_step_factor = o.axial_step_factor;
    bo.min_ring_radius = o.min_ring_radius;
    bo.length = o.radii.back();
    const auto longest = geometry::rotational_body(bo);
    const auto a1 = geometry::sphere(o.a1_center, o.a1_radius, o.a1_nodes);
    const auto kset = geometry::sphere(o.k_center, o.k_radius, o.k_nodes);

    // One kernel for every radius, so node sets and energies are nested.
    std::vector<Point> all = a1;
    all.insert(all.end(), kset.begin(), kset.end());
    all.insert(all.end(), longest.nodes.begin(), longest.nodes.end());
    ThinnessReport rep;
    rep.epsilon = default_epsilon(all);
    const auto spec = KernelSpec::newtonian(rep.epsilon);
    const auto gram = assemble_gram(spec, std::span<const Point>(all));
    const auto n1 = static_cast<Eigen::Index>(a1.size());
    const auto nk = static_cast<Eigen::Index>(kset.size());
    rep.note =
        "finite-resolution trend only: cross-sections thinner than min_ring_radius are not discretized, and "
        "an escaping minimizing sequence cannot be told apart from slow convergence";

    SolverConfig cfg;
    cfg.grad_tol = o.grad_tol;
    cfg.max_iters = o.max_iters > 0 ? o.max_iters : 200000;
    for (double radius : o.radii) {
        bo.length = radius;
        const auto body = geometry::rotational_body(bo);
        if (body.nodes.empty()) {
            throw InvalidArgument("thinness: empty discretization at radius " + std::to_string(radius));
        }
        const auto n2 = static_cast<Eigen::Index>(body.nodes.size());
        const Eigen::Index base = n1 + nk;
        const auto a2_rows = detail::index_range(base, base + n2);
        ThinnessRecord rec;
        rec.radius = radius;
        rec.resolved_length = body.resolved_length;
        rec.node_count = body.nodes.size();

        const auto eq = equilibrium(detail::restrict_gram(gram, a2_rows), -1.0, o.grad_tol, o.max_iters);
        rec.capacity = eq.capacity;

        const auto green = green_equilibrium(gram, detail::index_range(0, base), a2_rows, o.grad_tol, o.max_iters);
        rec.green_energy = green.green_energy;
        rec.balayage_mass = green.swept.sum();
        rec.deficit = std::max(0.0, 1.0 - rec.balayage_mass);

        // sigma^2 = bal(theta) + c * sum_k omega_k over slices of the far half.
        Eigen::VectorXd sigma2 = green.swept;
        const double x_mid = o.q + 0.5 * (body.resolved_length - o.q);
        const double width = (body.resolved_length - x_mid) / o.slices;
        for (int k = 0; k < o.slices; ++k) {
            const double lo = x_mid + k * width;
            const double hi = k + 1 == o.slices ? body.resolved_length : lo + width;
            std::vector<Eigen::Index> rows, local;
            for (Eigen::Index j = 0; j < n2; ++j) {
                const double x = body.nodes[static_cast<std::size_t>(j)][0];
                if (x >= lo && (x < hi || (k + 1 == o.slices && x <= hi))) {
                    rows.push_back(base + j);
                    local.push_back(j);
                }
            }
            if (rows.empty()) continue;
            const auto omega = equilibrium(detail::restrict_gram(gram, rows), -1.0, o.grad_tol, o.max_iters);
            for (std::size_t m = 0; m < local.size(); ++m)
                sigma2[local[m]] += rec.deficit * omega.unit_minimizer[static_cast<Eigen::Index>(m)];
            ++rec.slices_used;
        }

        const Eigen::VectorXd theta_a1 = green.theta.head(n1);
        Plate p1;
        p1.sign = +1;
        p1.nodes = a1;
        p1.g = Eigen::VectorXd::Ones(n1);
        p1.sigma = theta_a1;
        p1.mass = theta_a1.sum();
        Plate p2;
        p2.id = 1;
        p2.sign = -1;
        p2.nodes = body.nodes;
        p2.g = Eigen::VectorXd::Ones(n2);
        p2.sigma = sigma2;
        p2.mass = 1.0;
        const Condenser cond({p1, p2});
        std::vector<Eigen::Index> rows = detail::index_range(0, n1);
        for (auto r : a2_rows) rows.push_back(r);
        GramMatrix ck = detail::restrict_gram(gram, rows);
        ck.node_index = {detail::index_range(0, n1), detail::index_range(n1, n1 + n2)};
        ScalarSignedMeasure theta_k{kset, green.theta.segment(n1, nk)};
        const auto field = FieldSpec::case2(theta_k);
        const auto sol = solve(cond, ck, field, cfg);
        rec.value = sol.value;
        rec.converged = sol.converged && eq.converged && green.converged;
        rec.lower_bound = rec.green_energy - scalar_energy(spec, theta_k);
        const auto& mu2 = sol.minimizer.weights[1];
        double moment = 0.0;
        for (Eigen::Index j = 0; j < n2; ++j) moment += mu2[j] * body.nodes[static_cast<std::size_t>(j)][0];
        rec.minimizer_mass_center = moment / mu2.sum();
        const VectorMeasure gamma{{theta_a1, green.swept}};
        rec.gap_to_balayage_candidate = semimetric_distance(cond, ck, sol.minimizer, gamma);

        if (!rep.records.empty() && rec.capacity < rep.records.back().capacity - 1e-10 * rec.capacity)
            rep.capacity_nondecreasing = false;
        rep.records.push_back(rec);
    }
    return rep;
}

} // namespace sigcond
