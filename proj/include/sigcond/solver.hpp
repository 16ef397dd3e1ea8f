#pragma once

// Minimization of G_f over E+_{sigma,f}(A, a, g).
//
// With S = diag(alpha_i) over the stacked nodes the problem is the convex QP
//
//     min  w^T (S K S) w + 2 f^T w
//     s.t. 0 <= w_i <= sigma_i,  <g_i, w_i> = a_i   for every plate i,
//
// whose feasible set is a product of box-cap-hyperplane polytopes. Both
// algorithms below run on a generic block form of this QP (detail::QpProblem),
// which the analysis module reuses for equilibrium, balayage and the Green
// energy problem (blocks without a mass constraint are just boxes).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sigcond/condenser.hpp"
#include "sigcond/errors.hpp"
#include "sigcond/kernels.hpp"

namespace sigcond {

enum class Algorithm { projected_gradient, frank_wolfe };
enum class StepRule { fixed_lipschitz, backtracking };

/// Step policy of the conditional-gradient solver.
///   open_loop   - classic gamma_k = 2/(k+2)
///   line_search - exact line search along s - w
///   pairwise    - in-face pairwise steps (away vertex from the minimal face of w)
enum class FrankWolfeStep { open_loop, line_search, pairwise };

struct SolverConfig {
    Algorithm algorithm = Algorithm::projected_gradient;
    int max_iters = 0;  // 0 selects 50 * (total node count)
    double grad_tol = 1e-8;
    StepRule step_rule = StepRule::backtracking;
    FrankWolfeStep fw_step = FrankWolfeStep::pairwise;
    double projection_tol = 1e-14;
    std::uint64_t seed = 0;  // 0: deterministic scaled-sigma start
};

inline std::string to_string(Algorithm a) {
    return a == Algorithm::projected_gradient ? "projected_gradient" : "frank_wolfe";
}
inline std::string to_string(StepRule r) { return r == StepRule::fixed_lipschitz ? "fixed_lipschitz" : "backtracking"; }
inline std::string to_string(FrankWolfeStep s) {
    switch (s) {
        case FrankWolfeStep::open_loop: return "open_loop";
        case FrankWolfeStep::line_search: return "line_search";
        case FrankWolfeStep::pairwise: return "pairwise";
    }
    return "unknown";
}

struct SolveReport {
    VectorMeasure minimizer;
    double value = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;
    std::vector<double> multipliers;
};

struct KktReport {
    bool ok = false;
    double max_residual = 0.0;
    std::vector<double> multipliers;
};

/// Euclidean projection of v onto {0 <= w <= sigma, <g, w> = a}.
///
/// w(tau) = clip(v - tau g, 0, sigma) has nonincreasing g-mass in tau; tau is
/// bracketed by bisection to `tol` and then solved in closed form on the
/// resulting free set.
inline Eigen::VectorXd project_plate(const Eigen::VectorXd& v, const Eigen::VectorXd& g, const Eigen::VectorXd& sigma,
                                     double a, double tol = 1e-14) {
    const Eigen::Index n = v.size();
    if (g.size() != n || sigma.size() != n) throw ShapeMismatch("project_plate: v, g, sigma lengths differ");
    if (!(tol > 0.0)) throw InvalidArgument("project_plate: tol must be > 0");
    long double cap_acc = 0.0L;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!(g[j] > 0.0)) throw InvalidArgument("project_plate: g must be > 0");
        if (!(sigma[j] >= 0.0)) throw InvalidArgument("project_plate: sigma must be >= 0");
        cap_acc += static_cast<long double>(g[j]) * sigma[j];
    }
    const double cap = static_cast<double>(cap_acc);
    if (!(a >= 0.0) || a > cap * (1.0 + kFeasibilityRelTol)) {
        throw InfeasibleProblem("project_plate: a = " + std::to_string(a) + " outside [0, <g,sigma> = " +
                                std::to_string(cap) + "]");
    }
    if (a >= cap) return sigma;
    if (a == 0.0) return Eigen::VectorXd::Zero(n);

    auto clip_at = [&](double tau) {
        return (v - tau * g).cwiseMax(0.0).cwiseMin(sigma).eval();
    };
    auto mass_at = [&](double tau) {
        long double m = 0.0L;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double x = std::clamp(v[j] - tau * g[j], 0.0, sigma[j]);
            m += static_cast<long double>(g[j]) * x;
        }
        return static_cast<double>(m);
    };

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
        lo = std::min(lo, (v[j] - sigma[j]) / g[j]);
        hi = std::max(hi, v[j] / g[j]);
    }
    for (int it = 0; it < 400 && hi - lo > tol * std::max({1.0, std::abs(lo), std::abs(hi)}); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mass_at(mid) > a) lo = mid;
        else hi = mid;
    }
    const double tau = 0.5 * (lo + hi);

    // Closed form on the free set at tau.
    long double num = -static_cast<long double>(a), den = 0.0L;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double x = v[j] - tau * g[j];
        if (x >= sigma[j]) num += static_cast<long double>(g[j]) * sigma[j];
        else if (x > 0.0) {
            num += static_cast<long double>(g[j]) * v[j];
            den += static_cast<long double>(g[j]) * g[j];
        }
    }
    Eigen::VectorXd best = clip_at(tau);
    if (den > 0.0L) {
        const double exact = static_cast<double>(num / den);
        Eigen::VectorXd refined = clip_at(exact);
        if (std::abs(mass_at(exact) - a) <= std::abs(mass_at(tau) - a)) best = std::move(refined);
    }
    return best;
}

namespace detail {

/// One variable block: 0 <= w <= upper, optionally <g, w> = mass.
struct Block {
    Eigen::Index offset = 0;
    Eigen::Index size = 0;
    Eigen::VectorXd g;
    Eigen::VectorXd upper;
    std::optional<double> mass;
};

/// F(w) = w^T Q w + 2 c^T w over a product of blocks.
struct QpProblem {
    Eigen::MatrixXd Q;
    Eigen::VectorXd c;
    std::vector<Block> blocks;
};

struct EngineOptions {
    Algorithm algorithm = Algorithm::projected_gradient;
    StepRule step_rule = StepRule::backtracking;
    FrankWolfeStep fw_step = FrankWolfeStep::pairwise;
    int max_iters = 1000;
    double grad_tol = 1e-8;
    double projection_tol = 1e-14;
    double lipschitz = 0.0;  // 2 * lambda_max(Q), required
};

struct EngineResult {
    Eigen::VectorXd w;
    double objective = 0.0;
    double kkt_residual = 0.0;
    std::vector<double> multipliers;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

inline constexpr double kActiveRelTol = 1e-12;

struct BlockKkt {
    double residual = 0.0;
    double multiplier = 0.0;
};

/// Best per-block multiplier tau and the resulting max KKT violation of the
/// reduced gradient r = grad - tau g. Coordinates at 0 need r >= 0, at the
/// cap r <= 0, strictly inside r = 0. Blocks without a mass constraint use
/// tau = 0. Coordinates with cap 0 are fixed and carry no condition.
inline BlockKkt block_kkt(const Block& b, Eigen::Ref<const Eigen::VectorXd> w, Eigen::Ref<const Eigen::VectorXd> grad) {
    std::vector<Eigen::Index> up, down;  // up: lines tau*g - grad; down: grad - tau*g
    for (Eigen::Index j = 0; j < b.size; ++j) {
        if (b.upper[j] == 0.0) continue;
        // Within a relative 1e-12 of a bound counts as active, so float drift
        // from the final re-projection cannot flip a coordinate's status.
        const double slack = kActiveRelTol * (std::isfinite(b.upper[j]) ? b.upper[j] : 1.0);
        const bool at_lower = w[j] <= slack;
        const bool at_upper = std::isfinite(b.upper[j]) && w[j] >= b.upper[j] - slack;
        if (!at_upper) up.push_back(j);
        if (!at_lower) down.push_back(j);
    }
    BlockKkt out;
    auto f_up = [&](double tau) {
        double m = -std::numeric_limits<double>::infinity();
        for (auto j : up) m = std::max(m, tau * b.g[j] - grad[j]);
        return m;
    };
    auto f_down = [&](double tau) {
        double m = -std::numeric_limits<double>::infinity();
        for (auto j : down) m = std::max(m, grad[j] - tau * b.g[j]);
        return m;
    };
    if (!b.mass) {
        out.multiplier = 0.0;
        out.residual = std::max({0.0, f_up(0.0), f_down(0.0)});
        return out;
    }
    if (up.empty() && down.empty()) return out;
    if (up.empty()) {
        double t = -std::numeric_limits<double>::infinity();
        for (auto j : down) t = std::max(t, grad[j] / b.g[j]);
        out.multiplier = t;
        return out;
    }
    if (down.empty()) {
        double t = std::numeric_limits<double>::infinity();
        for (auto j : up) t = std::min(t, grad[j] / b.g[j]);
        out.multiplier = t;
        return out;
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto j : up) {
        lo = std::min(lo, grad[j] / b.g[j]);
        hi = std::max(hi, grad[j] / b.g[j]);
    }
    for (auto j : down) {
        lo = std::min(lo, grad[j] / b.g[j]);
        hi = std::max(hi, grad[j] / b.g[j]);
    }
    for (int it = 0; it < 200 && hi > lo; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (f_up(mid) < f_down(mid)) lo = mid;
        else hi = mid;
    }
    const double r_lo = std::max({0.0, f_up(lo), f_down(lo)});
    const double r_hi = std::max({0.0, f_up(hi), f_down(hi)});
    out.multiplier = r_lo <= r_hi ? lo : hi;
    out.residual = std::min(r_lo, r_hi);
    return out;
}

inline BlockKkt kkt_all(const QpProblem& qp, const Eigen::VectorXd& w, const Eigen::VectorXd& grad,
                        std::vector<double>* multipliers) {
    BlockKkt worst;
    if (multipliers) multipliers->clear();
    for (const auto& b : qp.blocks) {
        const auto r = block_kkt(b, w.segment(b.offset, b.size), grad.segment(b.offset, b.size));
        worst.residual = std::max(worst.residual, r.residual);
        if (multipliers) multipliers->push_back(r.multiplier);
    }
    return worst;
}

inline Eigen::VectorXd project_block(const Block& b, const Eigen::VectorXd& v, double tol) {
    if (b.mass) return project_plate(v, b.g, b.upper, *b.mass, tol);
    return v.cwiseMax(0.0).cwiseMin(b.upper);
}

inline Eigen::VectorXd project_all(const QpProblem& qp, const Eigen::VectorXd& v, double tol) {
    Eigen::VectorXd out(v.size());
    for (const auto& b : qp.blocks) out.segment(b.offset, b.size) = project_block(b, v.segment(b.offset, b.size), tol);
    return out;
}

inline double objective(const QpProblem& qp, const Eigen::VectorXd& w, const Eigen::VectorXd& qw) {
    return w.dot(qw) + 2.0 * qp.c.dot(w);
}

/// Linear minimization over {0 <= s <= upper, <g,s> = mass}: fill the
/// cheapest gradient-per-unit-g coordinates first (fractional knapsack).
/// `free` restricts the candidates; `descending` fills the most expensive first.
inline Eigen::VectorXd knapsack_vertex(const Block& b, Eigen::Ref<const Eigen::VectorXd> grad, double mass,
                                       const std::vector<Eigen::Index>& candidates, bool descending) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(b.size);
    std::vector<Eigen::Index> order = candidates;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index p, Eigen::Index q) {
        const double rp = grad[p] / b.g[p], rq = grad[q] / b.g[q];
        return descending ? rp > rq : rp < rq;
    });
    double remaining = mass;
    for (auto j : order) {
        if (remaining <= 0.0) break;
        const double take = std::min(b.upper[j], remaining / b.g[j]);
        s[j] = take;
        remaining -= take * b.g[j];
    }
    return s;
}

inline void snap_to_bounds(const Block& b, Eigen::Ref<Eigen::VectorXd> w) {
    for (Eigen::Index j = 0; j < b.size; ++j) {
        const double cap = b.upper[j];
        const double scale = std::isfinite(cap) ? std::max(cap, 1e-300) : 1.0;
        if (w[j] <= 1e-14 * scale) w[j] = 0.0;
        else if (std::isfinite(cap) && w[j] >= cap - 1e-14 * scale) w[j] = cap;
    }
}

inline EngineResult run_projected_gradient(const QpProblem& qp, Eigen::VectorXd w, const EngineOptions& opt) {
    EngineResult res;
    const double inv_l = 1.0 / opt.lipschitz;
    Eigen::VectorXd qw = qp.Q * w;
    double f = objective(qp, w, qw);
    Eigen::VectorXd grad = 2.0 * (qw + qp.c);
    res.trace.push_back(f);
    Eigen::VectorXd w_prev, grad_prev;
    double eta = inv_l;
    int it = 0;
    BlockKkt kkt = kkt_all(qp, w, grad, &res.multipliers);
    for (; it < opt.max_iters; ++it) {
        if (kkt.residual <= opt.grad_tol) {
            res.converged = true;
            break;
        }
        if (opt.step_rule == StepRule::backtracking && it > 0) {
            const Eigen::VectorXd s = w - w_prev;
            const double sy = s.dot(grad - grad_prev);
            eta = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, inv_l, 1e12 * inv_l) : inv_l;
        }
        Eigen::VectorXd cand, d, qd;
        double f_new = f;
        bool stalled = false;
        for (;;) {
            cand = project_all(qp, w - eta * grad, opt.projection_tol);
            d = cand - w;
            const double dd = d.squaredNorm();
            if (dd == 0.0) {
                stalled = true;
                break;
            }
            qd = qp.Q * d;
            const double gd = grad.dot(d);
            f_new = f + gd + d.dot(qd);
            if (opt.step_rule == StepRule::fixed_lipschitz || eta <= inv_l * (1.0 + 1e-12) ||
                f_new <= f + gd + 0.5 / eta * dd) {
                break;
            }
            eta = std::max(0.5 * eta, inv_l);
        }
        if (stalled) break;
        w_prev = w;
        grad_prev = grad;
        w = std::move(cand);
        if ((it + 1) % 64 == 0) qw = qp.Q * w;
        else qw += qd;
        f = objective(qp, w, qw);
        grad = 2.0 * (qw + qp.c);
        res.trace.push_back(f);
        kkt = kkt_all(qp, w, grad, &res.multipliers);
    }
    if (kkt.residual <= opt.grad_tol) res.converged = true;
    res.iterations = it;
    res.w = std::move(w);
    res.objective = f;
    res.kkt_residual = kkt.residual;
    return res;
}

inline EngineResult run_frank_wolfe(const QpProblem& qp, Eigen::VectorXd w, const EngineOptions& opt) {
    for (const auto& b : qp.blocks) {
        if (!b.mass) throw InvalidArgument("frank_wolfe needs a mass constraint on every block");
    }
    EngineResult res;
    Eigen::VectorXd qw = qp.Q * w;
    Eigen::VectorXd grad = 2.0 * (qw + qp.c);
    double f = objective(qp, w, qw);
    res.trace.push_back(f);
    BlockKkt kkt = kkt_all(qp, w, grad, &res.multipliers);
    int it = 0;
    std::vector<Eigen::Index> all_idx;
    for (; it < opt.max_iters; ++it) {
        if (kkt.residual <= opt.grad_tol) {
            res.converged = true;
            break;
        }
        if (opt.fw_step == FrankWolfeStep::pairwise) {
            bool moved = false;
            for (const auto& b : qp.blocks) {
                auto wb = w.segment(b.offset, b.size);
                auto gb = grad.segment(b.offset, b.size);
                all_idx.resize(static_cast<std::size_t>(b.size));
                std::iota(all_idx.begin(), all_idx.end(), Eigen::Index{0});
                const Eigen::VectorXd s = knapsack_vertex(b, gb, *b.mass, all_idx, false);
                // Away vertex over the minimal face containing w.
                std::vector<Eigen::Index> free;
                double face_mass = *b.mass;
                Eigen::VectorXd v = Eigen::VectorXd::Zero(b.size);
                for (Eigen::Index j = 0; j < b.size; ++j) {
                    if (wb[j] >= b.upper[j]) {
                        v[j] = b.upper[j];
                        face_mass -= b.g[j] * b.upper[j];
                    } else if (wb[j] > 0.0) {
                        free.push_back(j);
                    }
                }
                Eigen::VectorXd vf = knapsack_vertex(b, gb, std::max(face_mass, 0.0), free, true);
                for (auto j : free) v[j] = vf[j];
                const Eigen::VectorXd d = s - v;
                const double gd = gb.dot(d);
                if (!(gd < 0.0)) continue;
                double gamma_max = std::numeric_limits<double>::infinity();
                Eigen::Index blocking = -1;
                for (Eigen::Index j = 0; j < b.size; ++j) {
                    double limit = std::numeric_limits<double>::infinity();
                    if (d[j] > 0.0) limit = (b.upper[j] - wb[j]) / d[j];
                    else if (d[j] < 0.0) limit = wb[j] / -d[j];
                    if (limit < gamma_max) {
                        gamma_max = limit;
                        blocking = j;
                    }
                }
                const Eigen::VectorXd qd = qp.Q.middleCols(b.offset, b.size) * d;
                const double dqd = d.dot(qd.segment(b.offset, b.size));
                double gamma = dqd > 0.0 ? -gd / (2.0 * dqd) : gamma_max;
                bool hit = false;
                if (gamma >= gamma_max) {
                    gamma = gamma_max;
                    hit = true;
                }
                if (!(gamma > 0.0) || !std::isfinite(gamma)) continue;
                wb += gamma * d;
                if (hit && blocking >= 0) wb[blocking] = d[blocking] > 0.0 ? b.upper[blocking] : 0.0;
                snap_to_bounds(b, wb);
                qw += gamma * qd;
                grad = 2.0 * (qw + qp.c);
                moved = true;
            }
            if (!moved) break;
        } else {
            Eigen::VectorXd s(w.size());
            for (const auto& b : qp.blocks) {
                all_idx.resize(static_cast<std::size_t>(b.size));
                std::iota(all_idx.begin(), all_idx.end(), Eigen::Index{0});
                s.segment(b.offset, b.size) = knapsack_vertex(b, grad.segment(b.offset, b.size), *b.mass, all_idx, false);
            }
            const Eigen::VectorXd d = s - w;
            const Eigen::VectorXd qd = qp.Q * d;
            double gamma = 2.0 / (it + 2.0);
            if (opt.fw_step == FrankWolfeStep::line_search) {
                const double dqd = d.dot(qd);
                const double gd = grad.dot(d);
                if (!(gd < 0.0)) break;
                gamma = dqd > 0.0 ? std::min(1.0, -gd / (2.0 * dqd)) : 1.0;
            }
            w += gamma * d;
            for (const auto& b : qp.blocks) snap_to_bounds(b, w.segment(b.offset, b.size));
            qw += gamma * qd;
            grad = 2.0 * (qw + qp.c);
        }
        if ((it + 1) % 64 == 0) {
            qw = qp.Q * w;
            grad = 2.0 * (qw + qp.c);
        }
        f = objective(qp, w, qw);
        res.trace.push_back(f);
        kkt = kkt_all(qp, w, grad, &res.multipliers);
    }
    if (kkt.residual <= opt.grad_tol) res.converged = true;
    res.iterations = it;
    res.w = std::move(w);
    res.objective = f;
    res.kkt_residual = kkt.residual;
    return res;
}

/// Restores exact bound/mass feasibility after float drift, then re-certifies.
inline void finalize(const QpProblem& qp, EngineResult& r, const EngineOptions& opt) {
    for (const auto& b : qp.blocks) {
        if (!b.mass) continue;
        auto seg = r.w.segment(b.offset, b.size);
        seg = project_plate(seg, b.g, b.upper, *b.mass, opt.projection_tol);
    }
    const Eigen::VectorXd qw = qp.Q * r.w;
    r.objective = objective(qp, r.w, qw);
    const Eigen::VectorXd grad = 2.0 * (qw + qp.c);
    r.kkt_residual = kkt_all(qp, r.w, grad, &r.multipliers).residual;
    r.converged = r.kkt_residual <= opt.grad_tol;
}

inline EngineResult minimize(const QpProblem& qp, const Eigen::VectorXd& w0, const EngineOptions& opt) {
    if (!(opt.lipschitz > 0.0)) throw InvalidArgument("engine needs a positive Lipschitz constant");
    if (opt.max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
    if (!(opt.grad_tol > 0.0) || !(opt.projection_tol > 0.0)) throw InvalidArgument("tolerances must be > 0");
    EngineResult r = opt.algorithm == Algorithm::projected_gradient ? run_projected_gradient(qp, w0, opt)
                                                                     : run_frank_wolfe(qp, w0, opt);
    finalize(qp, r, opt);
    return r;
}

/// Feasible start: sigma scaled to the prescribed mass, or a seeded random point.
inline Eigen::VectorXd initial_point(const QpProblem& qp, std::uint64_t seed, double tol) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(qp.c.size());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 2.0);
    for (const auto& b : qp.blocks) {
        if (!b.mass) continue;
        const double cap = b.g.dot(b.upper);
        Eigen::VectorXd v = b.upper * (*b.mass / cap);
        if (seed != 0) {
            for (Eigen::Index j = 0; j < b.size; ++j) v[j] *= unif(rng);
        }
        w.segment(b.offset, b.size) = project_plate(v, b.g, b.upper, *b.mass, tol);
    }
    return w;
}

/// Q = S K S for the plate signs of c.
inline Eigen::MatrixXd signed_gram(const Condenser& c, const Eigen::MatrixXd& k) {
    Eigen::VectorXd s(c.size());
    for (std::size_t i = 0; i < c.plate_count(); ++i) s.segment(c.offset(i), c.plate(i).size()).setConstant(c.plate(i).sign);
    return s.asDiagonal() * k * s.asDiagonal();
}

/// Builds the plate QP. Nodes with f = +inf are fixed at zero charge.
inline QpProblem plate_qp(const Condenser& c, const GramMatrix& k, const std::vector<Eigen::VectorXd>& field) {
    QpProblem qp;
    qp.Q = signed_gram(c, k.entries);
    qp.c = Eigen::VectorXd::Zero(c.size());
    for (std::size_t i = 0; i < c.plate_count(); ++i) {
        const auto& p = c.plate(i);
        Block b;
        b.offset = c.offset(i);
        b.size = p.size();
        b.g = p.g;
        b.upper = p.sigma;
        b.mass = p.mass;
        for (Eigen::Index j = 0; j < p.size(); ++j) {
            if (field[i][j] == kInf) b.upper[j] = 0.0;
            else qp.c[b.offset + j] = field[i][j];
        }
        qp.blocks.push_back(std::move(b));
    }
    return qp;
}

} // namespace detail

/// First-order optimality certificate for an admissible mu.
inline KktReport verify_kkt(const Condenser& c, const GramMatrix& k, const FieldSpec& f, const VectorMeasure& mu,
                            double tol) {
    check_shape(c, mu);
    check_gram(c, k);
    const auto field = resolve_field(c, k.spec, f);
    const auto qp = detail::plate_qp(c, k, field);
    Eigen::VectorXd w(c.size());
    for (std::size_t i = 0; i < c.plate_count(); ++i) w.segment(c.offset(i), c.plate(i).size()) = mu.weights[i];
    const Eigen::VectorXd grad = 2.0 * (qp.Q * w + qp.c);
    KktReport r;
    r.max_residual = detail::kkt_all(qp, w, grad, &r.multipliers).residual;
    r.ok = r.max_residual <= tol;
    return r;
}

/// Minimizes G_f over the admissible class. Throws InfeasibleProblem or
/// NotPositiveDefinite when the preconditions fail; an unconverged run is
/// reported with converged = false and the last iterate.
inline SolveReport solve(const Condenser& c, const GramMatrix& k, const FieldSpec& f, const SolverConfig& cfg = {}) {
    check_gram(c, k);
    if (cfg.max_iters < 0) throw InvalidArgument("max_iters must be >= 1");
    const auto field = resolve_field(c, k.spec, f);
    const auto feas = check_feasibility(c, f);
    if (!feas.feasible) throw InfeasibleProblem(feas.message());
    const auto pd = check_positive_definite(k);
    if (!pd.is_pd) {
        throw NotPositiveDefinite("kernel matrix is not positive semidefinite (lambda_min = " +
                                  std::to_string(pd.min_eigenvalue) + "); the objective may be unbounded below");
    }
    const auto qp = detail::plate_qp(c, k, field);

    detail::EngineOptions opt;
    opt.algorithm = cfg.algorithm;
    opt.step_rule = cfg.step_rule;
    opt.fw_step = cfg.fw_step;
    opt.max_iters = cfg.max_iters > 0 ? cfg.max_iters : static_cast<int>(50 * c.size());
    opt.grad_tol = cfg.grad_tol;
    opt.projection_tol = cfg.projection_tol;
    opt.lipschitz = 2.0 * std::max(pd.max_eigenvalue, std::numeric_limits<double>::min());

    const Eigen::VectorXd w0 = detail::initial_point(qp, cfg.seed, cfg.projection_tol);
    auto r = detail::minimize(qp, w0, opt);

    SolveReport rep;
    rep.minimizer = unstack(c, r.w);
    rep.value = weighted_energy(c, k, f, rep.minimizer);
    rep.kkt_residual = r.kkt_residual;
    rep.iterations = r.iterations;
    rep.converged = r.converged;
    rep.objective_trace = std::move(r.trace);
    rep.multipliers = std::move(r.multipliers);
    return rep;
}

} // namespace sigcond
