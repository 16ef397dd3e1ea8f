#pragma once

// Kernel catalog, Gram assembly and positive-definiteness diagnosis.
//
// All catalog kernels with a singular diagonal are regularized by replacing
// the distance |x-y| with sqrt(|x-y|^2 + eps^2). For the Riesz family this
// is an inverse multiquadric, hence strictly positive definite on distinct
// nodes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sigcond/errors.hpp"

namespace sigcond {

/// A node in R^n. Comparison is exact and lexicographic on coordinates.
struct Point {
    std::vector<double> coords;

    Point() = default;
    Point(std::initializer_list<double> c) : coords(c) {}
    explicit Point(std::vector<double> c) : coords(std::move(c)) {}

    [[nodiscard]] std::size_t dimension() const noexcept { return coords.size(); }
    double operator[](std::size_t k) const { return coords[k]; }

    auto operator<=>(const Point&) const = default;
    bool operator==(const Point&) const = default;
};

inline double squared_distance(const Point& x, const Point& y) {
    if (x.dimension() != y.dimension()) {
        throw DimensionMismatch("point dimensions differ: " + std::to_string(x.dimension()) +
                                " vs " + std::to_string(y.dimension()));
    }
    double s = 0.0;
    for (std::size_t k = 0; k < x.dimension(); ++k) {
        const double d = x.coords[k] - y.coords[k];
        s += d * d;
    }
    return s;
}

inline double distance(const Point& x, const Point& y) { return std::sqrt(squared_distance(x, y)); }

enum class KernelFamily { riesz, newtonian, log_disk, custom_table };

inline std::string to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::riesz: return "riesz";
        case KernelFamily::newtonian: return "newtonian";
        case KernelFamily::log_disk: return "log_disk";
        case KernelFamily::custom_table: return "custom_table";
    }
    return "unknown";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
    if (s == "riesz") return KernelFamily::riesz;
    if (s == "newtonian") return KernelFamily::newtonian;
    if (s == "log_disk") return KernelFamily::log_disk;
    if (s == "custom_table") return KernelFamily::custom_table;
    throw InvalidArgument("unknown kernel family '" + s + "'");
}

/// Kernel description.
///
/// For `custom_table` the geometry is bypassed: a node is a 1-D point whose
/// single coordinate is an integer row index into `table`.
struct KernelSpec {
    KernelFamily family = KernelFamily::newtonian;
    double alpha = 2.0;
    double epsilon = 0.0;
    std::optional<Eigen::MatrixXd> table;

    static KernelSpec riesz(double alpha, double epsilon) {
        return KernelSpec{KernelFamily::riesz, alpha, epsilon, std::nullopt};
    }
    static KernelSpec newtonian(double epsilon) {
        return KernelSpec{KernelFamily::newtonian, 2.0, epsilon, std::nullopt};
    }
    static KernelSpec log_disk(double epsilon) {
        return KernelSpec{KernelFamily::log_disk, 0.0, epsilon, std::nullopt};
    }
    static KernelSpec custom_table(Eigen::MatrixXd table) {
        return KernelSpec{KernelFamily::custom_table, 0.0, 0.0, std::move(table)};
    }

    [[nodiscard]] bool has_singular_diagonal() const noexcept {
        return family != KernelFamily::custom_table;
    }
};

namespace detail {

inline void check_finite(const Point& x) {
    for (double v : x.coords) {
        if (!std::isfinite(v)) throw InvalidArgument("point has a non-finite coordinate");
    }
}

inline Eigen::Index table_index(const KernelSpec& spec, const Point& x) {
    if (x.dimension() != 1) {
        throw DimensionMismatch("custom_table nodes must be 1-D index points");
    }
    const double v = x.coords[0];
    const auto n = spec.table->rows();
    if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(n)) {
        throw InvalidArgument("custom_table node index " + std::to_string(v) + " out of range [0, " +
                              std::to_string(n) + ")");
    }
    return static_cast<Eigen::Index>(v);
}

inline double riesz_value(double alpha, std::size_t n, double d2) {
    if (d2 == 0.0) {
        throw InvalidArgument("Riesz kernel evaluated at coincident points with epsilon = 0");
    }
    const double expo = 0.5 * (alpha - static_cast<double>(n));
    // The Newtonian case in R^3 is common enough to deserve the exact path.
    if (expo == -0.5) return 1.0 / std::sqrt(d2);
    return std::pow(d2, expo);
}

} // namespace detail

/// Validates the parts of `spec` that do not depend on node geometry.
inline void validate(const KernelSpec& spec) {
    if (!(spec.epsilon >= 0.0) || !std::isfinite(spec.epsilon)) {
        throw InvalidArgument("kernel epsilon must be finite and >= 0");
    }
    switch (spec.family) {
        case KernelFamily::riesz:
            if (!(spec.alpha > 0.0)) throw InvalidArgument("Riesz order alpha must be > 0");
            break;
        case KernelFamily::newtonian:
            if (spec.alpha != 2.0) throw InvalidArgument("newtonian kernel has alpha = 2");
            break;
        case KernelFamily::log_disk: break;
        case KernelFamily::custom_table: {
            if (!spec.table) throw InvalidArgument("custom_table kernel requires a table");
            const auto& t = *spec.table;
            if (t.rows() != t.cols() || t.rows() == 0) {
                throw InvalidArgument("custom_table must be a nonempty square matrix");
            }
            if (!t.allFinite()) throw InvalidArgument("custom_table entries must be finite");
            if (!(t.array() == t.transpose().array()).all()) {
                throw InvalidArgument("custom_table must be symmetric");
            }
            break;
        }
    }
}

/// kappa_eps(x, y). Symmetric in (x, y) bit for bit.
inline double evaluate_kernel(const KernelSpec& spec, const Point& x, const Point& y) {
    if (x.dimension() != y.dimension()) {
        throw DimensionMismatch("kernel arguments have dimensions " + std::to_string(x.dimension()) +
                                " and " + std::to_string(y.dimension()));
    }
    if (spec.family == KernelFamily::custom_table) {
        if (!spec.table) throw InvalidArgument("custom_table kernel requires a table");
        return (*spec.table)(detail::table_index(spec, x), detail::table_index(spec, y));
    }
    detail::check_finite(x);
    detail::check_finite(y);
    const std::size_t n = x.dimension();
    const double d2 = squared_distance(x, y) + spec.epsilon * spec.epsilon;
    switch (spec.family) {
        case KernelFamily::riesz:
            if (!(spec.alpha > 0.0 && spec.alpha < static_cast<double>(n))) {
                throw InvalidArgument("Riesz kernel needs 0 < alpha < n (alpha = " + std::to_string(spec.alpha) +
                                      ", n = " + std::to_string(n) + ")");
            }
            return detail::riesz_value(spec.alpha, n, d2);
        case KernelFamily::newtonian:
            if (n < 3) throw InvalidArgument("newtonian kernel needs dimension n >= 3");
            return detail::riesz_value(2.0, n, d2);
        case KernelFamily::log_disk: {
            if (n != 2) throw InvalidArgument("log_disk kernel needs dimension n = 2");
            if (x.coords[0] * x.coords[0] + x.coords[1] * x.coords[1] >= 1.0 ||
                y.coords[0] * y.coords[0] + y.coords[1] * y.coords[1] >= 1.0) {
                throw InvalidArgument("log_disk node outside the open unit disk");
            }
            if (d2 == 0.0) throw InvalidArgument("log kernel evaluated at coincident points with epsilon = 0");
            return -0.5 * std::log(d2);
        }
        case KernelFamily::custom_table: break;
    }
    throw InvalidArgument("unhandled kernel family");
}

/// Half of the smallest positive inter-node distance. Coincident nodes are ignored.
inline double default_epsilon(std::span<const Point> nodes) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < nodes.size(); ++p) {
        for (std::size_t q = p + 1; q < nodes.size(); ++q) {
            const double d2 = squared_distance(nodes[p], nodes[q]);
            if (d2 > 0.0 && d2 < best) best = d2;
        }
    }
    if (!std::isfinite(best)) {
        throw InvalidArgument("default epsilon needs at least two distinct nodes");
    }
    return 0.5 * std::sqrt(best);
}

/// Dense kernel matrix over an ordered node list.
///
/// `node_index[i][k]` is the global row of local node k of plate i. A plain
/// node list is treated as a single plate.
struct GramMatrix {
    Eigen::MatrixXd entries;
    std::vector<std::vector<Eigen::Index>> node_index;
    std::vector<Point> nodes;
    KernelSpec spec;

    [[nodiscard]] Eigen::Index size() const noexcept { return entries.rows(); }
};

namespace detail {

inline Eigen::MatrixXd assemble_entries(const KernelSpec& spec, std::span<const Point> nodes) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index p = 0; p < n; ++p) {
        for (Eigen::Index q = p; q < n; ++q) {
            const double v = evaluate_kernel(spec, nodes[p], nodes[q]);
            if (!std::isfinite(v)) throw InvalidArgument("kernel produced a non-finite entry");
            m(p, q) = v;
            m(q, p) = v;
        }
    }
    return m;
}

} // namespace detail

inline GramMatrix assemble_gram(const KernelSpec& spec, std::span<const Point> nodes) {
    if (nodes.empty()) throw InvalidArgument("cannot assemble a Gram matrix over an empty node set");
    validate(spec);
    const std::size_t dim = nodes.front().dimension();
    for (const auto& x : nodes) {
        if (x.dimension() != dim) throw DimensionMismatch("nodes have inconsistent dimensions");
    }
    GramMatrix g;
    g.entries = detail::assemble_entries(spec, nodes);
    g.node_index.emplace_back(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) g.node_index[0][k] = static_cast<Eigen::Index>(k);
    g.nodes.assign(nodes.begin(), nodes.end());
    g.spec = spec;
    return g;
}

struct PdDiagnosis {
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    double pd_tol = 0.0;
    bool is_pd = false;
    bool is_strictly_pd = false;
};

/// Spectrum-based definiteness check. A negative `pd_tol` selects the
/// default 1e-10 * lambda_max.
inline PdDiagnosis check_positive_definite(const Eigen::MatrixXd& m, double pd_tol = -1.0) {
    if (m.rows() != m.cols() || m.rows() == 0) throw InvalidArgument("matrix must be square and nonempty");
    if (!m.allFinite()) throw InvalidArgument("matrix has non-finite entries");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw EigenSolverFailure("symmetric eigensolver did not converge");
    }
    PdDiagnosis d;
    d.min_eigenvalue = es.eigenvalues().minCoeff();
    d.max_eigenvalue = es.eigenvalues().maxCoeff();
    d.pd_tol = pd_tol >= 0.0 ? pd_tol : 1e-10 * std::max(std::abs(d.max_eigenvalue), std::numeric_limits<double>::min());
    d.is_pd = d.min_eigenvalue >= -d.pd_tol;
    d.is_strictly_pd = d.min_eigenvalue > d.pd_tol;
    return d;
}

inline PdDiagnosis check_positive_definite(const GramMatrix& g, double pd_tol = -1.0) {
    return check_positive_definite(g.entries, pd_tol);
}

} // namespace sigcond
