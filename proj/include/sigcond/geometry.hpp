#pragma once

// Node generators: grids, spheres, rings and rotational bodies.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sigcond/errors.hpp"
#include "sigcond/kernels.hpp"

namespace sigcond::geometry {

/// Tensor-product grid origin + spacing * (i_1, ..., i_n), last axis fastest.
inline std::vector<Point> grid(const std::vector<double>& origin, const std::vector<double>& spacing,
                               const std::vector<int>& counts) {
    const std::size_t dim = origin.size();
    if (dim == 0 || spacing.size() != dim || counts.size() != dim) {
        throw InvalidArgument("grid: origin, spacing and counts need the same nonzero length");
    }
    std::size_t total = 1;
    for (int c : counts) {
        if (c < 1) throw InvalidArgument("grid: counts must be >= 1");
        total *= static_cast<std::size_t>(c);
    }
    std::vector<Point> out;
    out.reserve(total);
    std::vector<int> idx(dim, 0);
    for (std::size_t n = 0; n < total; ++n) {
        std::vector<double> x(dim);
        for (std::size_t k = 0; k < dim; ++k) x[k] = origin[k] + spacing[k] * idx[k];
        out.emplace_back(std::move(x));
        for (std::size_t k = dim; k-- > 0;) {
            if (++idx[k] < counts[k]) break;
            idx[k] = 0;
        }
    }
    return out;
}

/// Fibonacci lattice on the sphere |x - center| = radius in R^3.
inline std::vector<Point> sphere(const Point& center, double radius, std::size_t count) {
    if (center.dimension() != 3) throw InvalidArgument("sphere: center must be 3-D");
    if (!(radius > 0.0)) throw InvalidArgument("sphere: radius must be > 0");
    if (count == 0) throw InvalidArgument("sphere: count must be >= 1");
    std::vector<Point> out;
    out.reserve(count);
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (std::size_t k = 0; k < count; ++k) {
        const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * static_cast<double>(k);
        out.push_back(Point{center[0] + radius * r * std::cos(phi), center[1] + radius * r * std::sin(phi),
                            center[2] + radius * z});
    }
    return out;
}

/// Equispaced circle in the plane of the first two coordinates.
inline std::vector<Point> ring(const Point& center, double radius, std::size_t count) {
    if (center.dimension() < 2) throw InvalidArgument("ring: center must have dimension >= 2");
    if (!(radius > 0.0)) throw InvalidArgument("ring: radius must be > 0");
    if (count == 0) throw InvalidArgument("ring: count must be >= 1");
    std::vector<Point> out;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(count);
        Point x = center;
        x.coords[0] += radius * std::cos(t);
        x.coords[1] += radius * std::sin(t);
        out.push_back(std::move(x));
    }
    return out;
}

enum class Profile { power_s, exp_s_le1, exp_s_gt1 };

inline std::string to_string(Profile p) {
    switch (p) {
        case Profile::power_s: return "power_s";
        case Profile::exp_s_le1: return "exp_s_le1";
        case Profile::exp_s_gt1: return "exp_s_gt1";
    }
    return "unknown";
}

inline Profile profile_from_string(const std::string& s) {
    if (s == "power_s") return Profile::power_s;
    if (s == "exp_s_le1") return Profile::exp_s_le1;
    if (s == "exp_s_gt1") return Profile::exp_s_gt1;
    throw InvalidArgument("unknown profile '" + s + "'");
}

/// Body {q <= x1 <= length, x2^2 + x3^2 <= rho(x1)} with rho(r) = r^-s or exp(-r^s).
struct RotationalBodyOptions {
    Profile profile = Profile::power_s;
    double s = 1.0;
    double q = 1.0;
    double length = 10.0;
    double axial_step_factor = 1.0;  // axial step = factor * local cross-section radius
    double min_ring_radius = 0.02;   // thinner cross-sections are below resolution
    int min_ring_nodes = 8;
    int max_ring_nodes = 32;
};

inline double profile_value(Profile p, double s, double r) {
    switch (p) {
        case Profile::power_s: return std::pow(r, -s);
        case Profile::exp_s_le1:
        case Profile::exp_s_gt1: return std::exp(-std::pow(r, s));
    }
    return 0.0;
}

inline void validate(const RotationalBodyOptions& o) {
    switch (o.profile) {
        case Profile::power_s:
            if (!(o.s >= 0.0)) throw InvalidArgument("power_s profile needs s >= 0");
            if (!(o.q > 0.0)) throw InvalidArgument("power_s profile needs q > 0");
            break;
        case Profile::exp_s_le1:
            if (!(o.s > 0.0 && o.s <= 1.0)) throw InvalidArgument("exp_s_le1 profile needs 0 < s <= 1");
            if (!(o.q >= 0.0)) throw InvalidArgument("exp profiles need q >= 0");
            break;
        case Profile::exp_s_gt1:
            if (!(o.s > 1.0)) throw InvalidArgument("exp_s_gt1 profile needs s > 1");
            if (!(o.q >= 0.0)) throw InvalidArgument("exp profiles need q >= 0");
            break;
    }
    if (!(o.length >= o.q)) throw InvalidArgument("rotational body length must be >= q");
    if (!(o.axial_step_factor > 0.0)) throw InvalidArgument("axial_step_factor must be > 0");
    if (!(o.min_ring_radius > 0.0)) throw InvalidArgument("min_ring_radius must be > 0");
    if (o.min_ring_nodes < 1 || o.max_ring_nodes < o.min_ring_nodes) throw InvalidArgument("invalid ring node bounds");
}

struct RotationalBody {
    std::vector<Point> nodes;      // ordered by increasing x1
    double resolved_length = 0.0;  // last station x1 that carries nodes
    std::size_t stations = 0;
};

/// Surface discretization: one axis node on the start cap, then rings at
/// axial stations x_{k+1} = x_k + factor * r(x_k). Stations depend only on q
/// and the profile, so bodies of growing length are nested node sets.
inline RotationalBody rotational_body(const RotationalBodyOptions& o) {
    validate(o);
    RotationalBody body;
    auto radius_at = [&](double x) { return std::sqrt(profile_value(o.profile, o.s, x)); };
    double x = o.q;
    if (radius_at(x) < o.min_ring_radius) return body;
    body.nodes.push_back(Point{x, 0.0, 0.0});
    std::size_t k = 0;
    while (x <= o.length) {
        const double r = radius_at(x);
        if (!(r >= o.min_ring_radius)) break;
        const int n = std::clamp(static_cast<int>(std::ceil(2.0 * M_PI / o.axial_step_factor)), o.min_ring_nodes,
                                 o.max_ring_nodes);
        const double offset = (k % 2 == 1) ? M_PI / n : 0.0;
        for (int j = 0; j < n; ++j) {
            const double t = offset + 2.0 * M_PI * j / n;
            body.nodes.push_back(Point{x, r * std::cos(t), r * std::sin(t)});
        }
        body.resolved_length = x;
        ++body.stations;
        ++k;
        x += o.axial_step_factor * r;
    }
    return body;
}

} // namespace sigcond::geometry
