#pragma once

// Signed condensers and the energy calculus of vector measures on them.
//
// A vector measure mu = (mu^i) is stored as one nonnegative weight vector per
// plate. Every quadratic form is evaluated on the "signed stack" s = (alpha_i
// mu^i)_i against the Gram matrix over the concatenated plate nodes, which is
// the matrix form of sum_{i,j} alpha_i alpha_j kappa(mu^i, mu^j).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sigcond/errors.hpp"
#include "sigcond/kernels.hpp"

namespace sigcond {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Plate {
    int id = 0;
    int sign = +1;
    std::vector<Point> nodes;
    Eigen::VectorXd g;      // g_i sampled at the nodes, > 0
    double mass = 1.0;      // a_i
    Eigen::VectorXd sigma;  // constraint sigma^i as node weights, >= 0

    [[nodiscard]] Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(nodes.size()); }
};

/// Immutable, validated (I+, I-)-condenser over finite node sets.
class Condenser {
public:
    Condenser() = default;

    explicit Condenser(std::vector<Plate> plates) : plates_(std::move(plates)) {
        if (plates_.empty()) throw InvalidArgument("condenser needs at least one plate");
        dimension_ = plates_.front().nodes.empty() ? 0 : plates_.front().nodes.front().dimension();
        Eigen::Index offset = 0;
        for (std::size_t i = 0; i < plates_.size(); ++i) {
            validate_plate(i);
            offsets_.push_back(offset);
            offset += plates_[i].size();
        }
        total_ = offset;
        check_separation();
    }

    [[nodiscard]] const std::vector<Plate>& plates() const noexcept { return plates_; }
    [[nodiscard]] const Plate& plate(std::size_t i) const { return plates_.at(i); }
    [[nodiscard]] std::size_t plate_count() const noexcept { return plates_.size(); }
    [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
    /// Total node count over all plates (shared locations counted per plate).
    [[nodiscard]] Eigen::Index size() const noexcept { return total_; }
    [[nodiscard]] Eigen::Index offset(std::size_t i) const { return offsets_.at(i); }

    /// Concatenated plate nodes in plate order.
    [[nodiscard]] std::vector<Point> stacked_nodes() const {
        std::vector<Point> out;
        out.reserve(static_cast<std::size_t>(total_));
        for (const auto& p : plates_) out.insert(out.end(), p.nodes.begin(), p.nodes.end());
        return out;
    }

    /// Minimum distance between a positive and a negative node; +inf if one sign is absent.
    [[nodiscard]] double cross_sign_separation() const {
        double best = kInf;
        for (const auto& p : plates_) {
            if (p.sign < 0) continue;
            for (const auto& q : plates_) {
                if (q.sign > 0) continue;
                for (const auto& x : p.nodes)
                    for (const auto& y : q.nodes) best = std::min(best, distance(x, y));
            }
        }
        return best;
    }

    /// True when no location is shared by two plates.
    [[nodiscard]] bool plates_pairwise_disjoint() const {
        std::map<Point, std::size_t> owner;
        for (std::size_t i = 0; i < plates_.size(); ++i) {
            for (const auto& x : plates_[i].nodes) {
                auto [it, inserted] = owner.emplace(x, i);
                if (!inserted && it->second != i) return false;
            }
        }
        return true;
    }

private:
    void validate_plate(std::size_t i) const {
        const auto& p = plates_[i];
        const std::string tag = "plate " + std::to_string(i);
        if (p.sign != 1 && p.sign != -1) throw InvalidArgument(tag + ": sign must be +1 or -1");
        if (p.nodes.empty()) throw InvalidArgument(tag + ": has no nodes");
        if (p.g.size() != p.size()) throw ShapeMismatch(tag + ": g has wrong length");
        if (p.sigma.size() != p.size()) throw ShapeMismatch(tag + ": sigma has wrong length");
        if (!(p.mass > 0.0) || !std::isfinite(p.mass)) throw InvalidArgument(tag + ": mass a must be finite and > 0");
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            if (!(p.g[k] > 0.0) || !std::isfinite(p.g[k])) throw InvalidArgument(tag + ": g must be finite and > 0");
            if (!(p.sigma[k] >= 0.0) || !std::isfinite(p.sigma[k]))
                throw InvalidArgument(tag + ": sigma must be finite and >= 0");
        }
        std::map<Point, int> seen;
        for (const auto& x : p.nodes) {
            if (x.dimension() != dimension_) throw DimensionMismatch(tag + ": node dimension differs");
            for (double v : x.coords)
                if (!std::isfinite(v)) throw InvalidArgument(tag + ": node has a non-finite coordinate");
            if (!seen.emplace(x, 0).second) throw InvalidArgument(tag + ": duplicate node coordinates");
        }
    }

    void check_separation() const {
        if (!(cross_sign_separation() > 0.0)) {
            throw InvalidArgument("oppositely signed plates must be disjoint with positive separation");
        }
    }

    std::vector<Plate> plates_;
    std::vector<Eigen::Index> offsets_;
    Eigen::Index total_ = 0;
    std::size_t dimension_ = 0;
};

/// mu = (mu^i): nonnegative weights per plate node.
struct VectorMeasure {
    std::vector<Eigen::VectorXd> weights;

    static VectorMeasure zero(const Condenser& c) {
        VectorMeasure m;
        for (const auto& p : c.plates()) m.weights.push_back(Eigen::VectorXd::Zero(p.size()));
        return m;
    }
};

/// Node-indexed signed measure; support points are distinct.
struct ScalarSignedMeasure {
    std::vector<Point> support;
    Eigen::VectorXd weights;

    [[nodiscard]] double total() const { return weights.sum(); }
};

inline void check_shape(const Condenser& c, const VectorMeasure& mu) {
    if (mu.weights.size() != c.plate_count()) throw ShapeMismatch("vector measure has wrong plate count");
    for (std::size_t i = 0; i < c.plate_count(); ++i) {
        if (mu.weights[i].size() != c.plate(i).size())
            throw ShapeMismatch("vector measure plate " + std::to_string(i) + " has wrong node count");
        for (Eigen::Index k = 0; k < mu.weights[i].size(); ++k) {
            const double w = mu.weights[i][k];
            if (!(w >= 0.0) || !std::isfinite(w))
                throw InvalidArgument("vector measure plate " + std::to_string(i) + " has a negative or non-finite weight");
        }
    }
}

inline void check_gram(const Condenser& c, const GramMatrix& k) {
    if (k.size() != c.size()) {
        throw ShapeMismatch("Gram matrix has " + std::to_string(k.size()) + " rows, condenser has " +
                            std::to_string(c.size()) + " nodes");
    }
}

/// Gram matrix over the condenser's plate nodes, plate-major.
inline GramMatrix assemble_gram(const KernelSpec& spec, const Condenser& c) {
    const auto nodes = c.stacked_nodes();
    GramMatrix g = assemble_gram(spec, std::span<const Point>(nodes));
    g.node_index.clear();
    for (std::size_t i = 0; i < c.plate_count(); ++i) {
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(c.plate(i).size()));
        for (std::size_t k = 0; k < rows.size(); ++k) rows[k] = c.offset(i) + static_cast<Eigen::Index>(k);
        g.node_index.push_back(std::move(rows));
    }
    return g;
}

/// (alpha_i mu^i)_i concatenated in plate order.
inline Eigen::VectorXd signed_stack(const Condenser& c, const VectorMeasure& mu) {
    Eigen::VectorXd s(c.size());
    for (std::size_t i = 0; i < c.plate_count(); ++i) {
        s.segment(c.offset(i), c.plate(i).size()) = static_cast<double>(c.plate(i).sign) * mu.weights[i];
    }
    return s;
}

inline VectorMeasure unstack(const Condenser& c, const Eigen::VectorXd& w) {
    VectorMeasure m;
    for (std::size_t i = 0; i < c.plate_count(); ++i) m.weights.emplace_back(w.segment(c.offset(i), c.plate(i).size()));
    return m;
}

namespace detail {

/// x^T M y with extended-precision accumulation.
inline double bilinear(const Eigen::MatrixXd& m, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    long double total = 0.0L;
    for (Eigen::Index q = 0; q < m.cols(); ++q) {
        if (y[q] == 0.0) continue;
        long double col = 0.0L;
        for (Eigen::Index p = 0; p < m.rows(); ++p) col += static_cast<long double>(x[p]) * m(p, q);
        total += col * y[q];
    }
    return static_cast<double>(total);
}

} // namespace detail

/// Rmu = sum_i alpha_i mu^i, merged over exactly coincident locations in
/// order of first appearance. Zero-weight locations are kept.
inline ScalarSignedMeasure r_map(const Condenser& c, const VectorMeasure& mu) {
    check_shape(c, mu);
    ScalarSignedMeasure out;
    std::map<Point, Eigen::Index> where;
    std::vector<long double> acc;
    for (std::size_t i = 0; i < c.plate_count(); ++i) {
        const auto& p = c.plate(i);
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            auto [it, inserted] = where.emplace(p.nodes[static_cast<std::size_t>(k)], static_cast<Eigen::Index>(acc.size()));
            if (inserted) {
                out.support.push_back(p.nodes[static_cast<std::size_t>(k)]);
                acc.push_back(0.0L);
            }
            acc[static_cast<std::size_t>(it->second)] += static_cast<long double>(p.sign) * mu.weights[i][k];
        }
    }
    out.weights.resize(static_cast<Eigen::Index>(acc.size()));
    for (std::size_t k = 0; k < acc.size(); ++k) out.weights[static_cast<Eigen::Index>(k)] = static_cast<double>(acc[k]);
    return out;
}

/// a + scale * b on the union of supports (exact coordinate matching).
inline ScalarSignedMeasure combine(const ScalarSignedMeasure& a, const ScalarSignedMeasure& b, double scale = 1.0) {
    ScalarSignedMeasure out;
    std::map<Point, std::size_t> where;
    std::vector<double> w;
    auto add = [&](const ScalarSignedMeasure& m, double f) {
        for (std::size_t k = 0; k < m.support.size(); ++k) {
            auto [it, inserted] = where.emplace(m.support[k], w.size());
            if (inserted) {
                out.support.push_back(m.support[k]);
                w.push_back(0.0);
            }
            w[it->second] += f * m.weights[static_cast<Eigen::Index>(k)];
        }
    };
    add(a, 1.0);
    add(b, scale);
    out.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    return out;
}

/// kappa(m1, m2) for scalar signed measures, assembled on the merged support.
inline double scalar_mutual_energy(const KernelSpec& spec, const ScalarSignedMeasure& m1, const ScalarSignedMeasure& m2) {
    ScalarSignedMeasure zero1{m1.support, Eigen::VectorXd::Zero(m1.weights.size())};
    const auto merged = combine(zero1, m2, 0.0);  // union of supports
    if (merged.support.empty()) return 0.0;
    std::map<Point, Eigen::Index> where;
    for (std::size_t k = 0; k < merged.support.size(); ++k) where.emplace(merged.support[k], static_cast<Eigen::Index>(k));
    const auto n = static_cast<Eigen::Index>(merged.support.size());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n), y = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < m1.support.size(); ++k) x[where.at(m1.support[k])] += m1.weights[static_cast<Eigen::Index>(k)];
    for (std::size_t k = 0; k < m2.support.size(); ++k) y[where.at(m2.support[k])] += m2.weights[static_cast<Eigen::Index>(k)];
    const Eigen::MatrixXd g = detail::assemble_entries(spec, merged.support);
    return detail::bilinear(g, x, y);
}

inline double scalar_energy(const KernelSpec& spec, const ScalarSignedMeasure& m) {
    return scalar_mutual_energy(spec, m, m);
}

/// kappa(mu, nu) = sum_{i,j} alpha_i alpha_j kappa(mu^i, nu^j).
inline double mutual_energy(const Condenser& c, const GramMatrix& k, const VectorMeasure& mu, const VectorMeasure& nu) {
    check_shape(c, mu);
    check_shape(c, nu);
    check_gram(c, k);
    return detail::bilinear(k.entries, signed_stack(c, mu), signed_stack(c, nu));
}

inline double energy(const Condenser& c, const GramMatrix& k, const VectorMeasure& mu) {
    return mutual_energy(c, k, mu, mu);
}

/// ||mu - nu|| in the energy seminorm; clamps float noise below zero.
inline double semimetric_distance(const Condenser& c, const GramMatrix& k, const VectorMeasure& mu, const VectorMeasure& nu) {
    check_shape(c, mu);
    check_shape(c, nu);
    check_gram(c, k);
    const Eigen::VectorXd d = signed_stack(c, mu) - signed_stack(c, nu);
    return std::sqrt(std::max(0.0, detail::bilinear(k.entries, d, d)));
}

// --- external fields -------------------------------------------------------

enum class FieldCase { case1, case2 };

/// Case I: f_i sampled per node, values in (-inf, +inf].
/// Case II: f_i = alpha_i kappa(., zeta) for a signed measure zeta.
struct FieldSpec {
    FieldCase kind = FieldCase::case1;
    std::vector<Eigen::VectorXd> values;
    ScalarSignedMeasure zeta;

    static FieldSpec zero(const Condenser& c) {
        FieldSpec f;
        for (const auto& p : c.plates()) f.values.push_back(Eigen::VectorXd::Zero(p.size()));
        return f;
    }
    static FieldSpec case1(std::vector<Eigen::VectorXd> values) {
        FieldSpec f;
        f.values = std::move(values);
        return f;
    }
    static FieldSpec case2(ScalarSignedMeasure zeta) {
        FieldSpec f;
        f.kind = FieldCase::case2;
        f.zeta = std::move(zeta);
        return f;
    }
};

/// Per-node field values f_i(x) for every plate node.
inline std::vector<Eigen::VectorXd> resolve_field(const Condenser& c, const KernelSpec& spec, const FieldSpec& f) {
    std::vector<Eigen::VectorXd> out;
    if (f.kind == FieldCase::case1) {
        if (f.values.size() != c.plate_count()) throw ShapeMismatch("case1 field has wrong plate count");
        for (std::size_t i = 0; i < c.plate_count(); ++i) {
            if (f.values[i].size() != c.plate(i).size())
                throw ShapeMismatch("case1 field plate " + std::to_string(i) + " has wrong node count");
            for (Eigen::Index k = 0; k < f.values[i].size(); ++k) {
                const double v = f.values[i][k];
                if (std::isnan(v) || v == -kInf)
                    throw InvalidArgument("case1 field plate " + std::to_string(i) + " has a NaN or -inf value");
            }
        }
        return f.values;
    }
    const auto& z = f.zeta;
    if (z.weights.size() != static_cast<Eigen::Index>(z.support.size())) throw ShapeMismatch("zeta support/weights mismatch");
    {
        std::map<Point, int> seen;
        for (const auto& x : z.support)
            if (!seen.emplace(x, 0).second) throw InvalidArgument("zeta support points must be distinct");
    }
    if (!z.weights.allFinite()) throw InvalidArgument("zeta weights must be finite");
    const double ez = scalar_energy(spec, z);
    if (!std::isfinite(ez)) throw InvalidArgument("zeta must have finite energy");
    for (const auto& p : c.plates()) {
        Eigen::VectorXd v(p.size());
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            long double pot = 0.0L;
            for (std::size_t m = 0; m < z.support.size(); ++m)
                pot += static_cast<long double>(z.weights[static_cast<Eigen::Index>(m)]) *
                       evaluate_kernel(spec, p.nodes[static_cast<std::size_t>(k)], z.support[m]);
            v[k] = static_cast<double>(p.sign) * static_cast<double>(pot);
        }
        out.push_back(std::move(v));
    }
    return out;
}

/// <f, mu> with the convention 0 * inf = 0; +inf if charge sits on an infinite value.
inline double field_pairing(const std::vector<Eigen::VectorXd>& values, const VectorMeasure& mu) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (Eigen::Index k = 0; k < values[i].size(); ++k) {
            const double w = mu.weights[i][k];
            if (w == 0.0) continue;
            if (values[i][k] == kInf) return kInf;
            s += static_cast<long double>(values[i][k]) * w;
        }
    }
    return static_cast<double>(s);
}

/// G_f(mu) = kappa(mu, mu) + 2 <f, mu>.
inline double weighted_energy(const Condenser& c, const GramMatrix& k, const FieldSpec& f, const VectorMeasure& mu) {
    const double e = energy(c, k, mu);
    const double lin = field_pairing(resolve_field(c, k.spec, f), mu);
    if (lin == kInf) return kInf;
    return e + 2.0 * lin;
}

/// ||Rmu + zeta||^2 - ||zeta||^2 computed on the scalar side.
inline double case2_scalar_form(const Condenser& c, const KernelSpec& spec, const FieldSpec& f, const VectorMeasure& mu) {
    if (f.kind != FieldCase::case2) throw InvalidArgument("case2_scalar_form needs a Case II field");
    const auto shifted = combine(r_map(c, mu), f.zeta);
    return scalar_energy(spec, shifted) - scalar_energy(spec, f.zeta);
}

// --- feasibility -------------------------------------------------------------

struct PlateFeasibility {
    bool feasible = false;
    double available = 0.0;  // sum of g*sigma over nodes with finite field
    double slack = 0.0;      // available - a
};

struct FeasibilityReport {
    std::vector<PlateFeasibility> plates;
    bool feasible = false;

    /// Human-readable reason for the first infeasible plate, empty if feasible.
    [[nodiscard]] std::string message() const {
        for (std::size_t i = 0; i < plates.size(); ++i)
            if (!plates[i].feasible) return "plate " + std::to_string(i) + ": a exceeds ⟨g,σ⟩";
        return {};
    }
};

/// Relative slack below which a plate still counts as feasible (rounding in sum g*sigma).
inline constexpr double kFeasibilityRelTol = 1e-12;

inline FeasibilityReport check_feasibility(const Condenser& c, const FieldSpec& f) {
    FeasibilityReport r;
    r.feasible = true;
    const bool case1 = f.kind == FieldCase::case1;
    if (case1 && f.values.size() != c.plate_count()) throw ShapeMismatch("case1 field has wrong plate count");
    for (std::size_t i = 0; i < c.plate_count(); ++i) {
        const auto& p = c.plate(i);
        long double avail = 0.0L;
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            if (case1 && f.values[i][k] == kInf) continue;
            avail += static_cast<long double>(p.g[k]) * p.sigma[k];
        }
        PlateFeasibility pf;
        pf.available = static_cast<double>(avail);
        pf.slack = static_cast<double>(avail - static_cast<long double>(p.mass));
        pf.feasible = pf.slack >= -kFeasibilityRelTol * p.mass;
        r.feasible = r.feasible && pf.feasible;
        r.plates.push_back(pf);
    }
    return r;
}

} // namespace sigcond
