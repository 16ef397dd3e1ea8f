#pragma once

// Problem configs: a JSON document describing the kernel, the plates (with
// inline or generated nodes), the external field, solver settings and the
// per-command sections. Parsing is strict: unknown keys and wrongly typed
// values fail with the JSON path of the offending field.

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sigcond/analysis.hpp"
#include "sigcond/condenser.hpp"
#include "sigcond/errors.hpp"
#include "sigcond/geometry.hpp"
#include "sigcond/kernels.hpp"
#include "sigcond/solver.hpp"

namespace sigcond {

class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

using Json = nlohmann::json;

/// Inline points or one of the generators.
struct NodeSpec {
    std::string generator = "inline";  // inline | grid | sphere | ring | rotational_body
    std::vector<Point> points;
    std::vector<double> origin, spacing, center;
    std::vector<int> counts;
    double radius = 0.0;
    std::size_t count = 0;
    geometry::RotationalBodyOptions body;
};

/// Either one constant for every node or one value per node.
struct ValueOrList {
    std::optional<double> constant;
    std::vector<double> list;
};

struct SigmaSpec {
    ValueOrList value;
    std::optional<double> equilibrium_scale;  // sigma = scale * a * nu / <g, nu>
};

struct PlateConfig {
    int sign = 1;
    NodeSpec nodes;
    std::optional<ValueOrList> g;  // absent: g = 1
    double a = 1.0;
    SigmaSpec sigma;
};

struct KernelConfig {
    KernelFamily family = KernelFamily::newtonian;
    std::optional<double> alpha;
    std::optional<double> epsilon;  // absent or "auto": half the minimum spacing
    bool epsilon_auto = false;      // "auto" was written explicitly
    std::optional<Eigen::MatrixXd> table;
};

struct FieldConfig {
    FieldCase kind = FieldCase::case1;
    std::vector<std::vector<double>> values;  // may hold +inf
    std::vector<Point> zeta_support;
    std::vector<double> zeta_weights;
};

struct SolverSection {
    std::optional<Algorithm> algorithm;
    std::optional<int> max_iters;
    std::optional<double> grad_tol;
    std::optional<StepRule> step_rule;
    std::optional<FrankWolfeStep> fw_step;
    std::optional<double> projection_tol;
    std::optional<std::uint64_t> seed;
};

struct CapacitySection {
    std::optional<NodeSpec> nodes;  // absent: one record per plate
    std::optional<double> frostman_tol;
    std::optional<double> grad_tol;
};

struct BalayageSection {
    std::vector<Point> source_support;
    std::vector<double> source_weights;
    NodeSpec target;
    std::optional<double> tol;
};

struct ExhaustSection {
    std::vector<double> fractions;
    std::vector<double> betas;
};

struct ThinnessSection {
    geometry::Profile profile = geometry::Profile::power_s;
    std::optional<double> s, q, axial_step_factor, min_ring_radius, grad_tol;
    std::vector<double> radii;
    std::optional<int> slices;
};

struct CheckPdSection {
    std::optional<double> pd_tol;
};

struct ProblemConfig {
    std::optional<KernelConfig> kernel;  // absent: regularized Newtonian, epsilon auto
    std::vector<PlateConfig> plates;
    std::optional<FieldConfig> field;
    std::optional<SolverSection> solver;
    std::optional<CapacitySection> capacity;
    std::optional<BalayageSection> balayage;
    std::optional<ExhaustSection> exhaust;
    std::optional<ThinnessSection> thinness;
    std::optional<CheckPdSection> check_pd;
};

namespace config_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
    throw ConfigError((path.empty() ? std::string("config") : path) + ": " + msg);
}

inline std::string at(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
inline std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline void require_object(const Json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

inline void allow_keys(const Json& j, const std::string& path, std::initializer_list<const char*> keys) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok = ok || it.key() == k;
        if (!ok) fail(at(path, it.key()), "unknown field");
    }
}

inline const Json& need(const Json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) fail(at(path, key), "missing required field");
    return j.at(key);
}

/// Numbers, plus the strings "inf"/"-inf" where `allow_inf`.
inline double number(const Json& j, const std::string& path, bool allow_inf = false) {
    if (j.is_number()) return j.get<double>();
    if (allow_inf && j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    fail(path, allow_inf ? "expected a number or \"inf\"" : "expected a number");
}

inline int integer(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

inline std::string string(const Json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

inline std::vector<double> numbers(const Json& j, const std::string& path, bool allow_inf = false) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], at(path, i), allow_inf));
    return out;
}

inline Json number_json(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
}

inline Json numbers_json(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(number_json(x));
    return a;
}

inline Point point(const Json& j, const std::string& path) {
    auto c = numbers(j, path);
    if (c.empty()) fail(path, "a point needs at least one coordinate");
    return Point(std::move(c));
}

inline std::vector<Point> points(const Json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of points");
    std::vector<Point> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(point(j[i], at(path, i)));
    return out;
}

inline Json points_json(const std::vector<Point>& pts) {
    Json a = Json::array();
    for (const auto& p : pts) a.push_back(p.coords);
    return a;
}

template <class E, class F>
E enum_value(const Json& j, const std::string& path, F&& from_string) {
    const auto s = string(j, path);
    try {
        return from_string(s);
    } catch (const InvalidArgument& e) {
        fail(path, e.what());
    }
}

inline Algorithm algorithm_from_string(const std::string& s) {
    if (s == "projected_gradient") return Algorithm::projected_gradient;
    if (s == "frank_wolfe") return Algorithm::frank_wolfe;
    throw InvalidArgument("unknown algorithm '" + s + "'");
}
inline StepRule step_rule_from_string(const std::string& s) {
    if (s == "fixed_lipschitz") return StepRule::fixed_lipschitz;
    if (s == "backtracking") return StepRule::backtracking;
    throw InvalidArgument("unknown step_rule '" + s + "'");
}
inline FrankWolfeStep fw_step_from_string(const std::string& s) {
    if (s == "open_loop") return FrankWolfeStep::open_loop;
    if (s == "line_search") return FrankWolfeStep::line_search;
    if (s == "pairwise") return FrankWolfeStep::pairwise;
    throw InvalidArgument("unknown fw_step '" + s + "'");
}

inline NodeSpec node_spec(const Json& j, const std::string& path) {
    NodeSpec n;
    if (j.is_array()) {
        n.points = points(j, path);
        if (n.points.empty()) fail(path, "node list is empty");
        return n;
    }
    require_object(j, path);
    n.generator = string(need(j, path, "generator"), at(path, "generator"));
    if (n.generator == "grid") {
        allow_keys(j, path, {"generator", "origin", "spacing", "counts"});
        n.origin = numbers(need(j, path, "origin"), at(path, "origin"));
        n.spacing = numbers(need(j, path, "spacing"), at(path, "spacing"));
        const auto& c = need(j, path, "counts");
        if (!c.is_array()) fail(at(path, "counts"), "expected an array of integers");
        for (std::size_t i = 0; i < c.size(); ++i) n.counts.push_back(integer(c[i], at(at(path, "counts"), i)));
    } else if (n.generator == "sphere" || n.generator == "ring") {
        allow_keys(j, path, {"generator", "center", "radius", "count"});
        n.center = numbers(need(j, path, "center"), at(path, "center"));
        n.radius = number(need(j, path, "radius"), at(path, "radius"));
        const int c = integer(need(j, path, "count"), at(path, "count"));
        if (c < 1) fail(at(path, "count"), "must be >= 1");
        n.count = static_cast<std::size_t>(c);
    } else if (n.generator == "rotational_body") {
        allow_keys(j, path, {"generator", "profile", "s", "q", "length", "axial_step_factor", "min_ring_radius",
                             "min_ring_nodes", "max_ring_nodes"});
        auto& b = n.body;
        b.profile = enum_value<geometry::Profile>(need(j, path, "profile"), at(path, "profile"), geometry::profile_from_string);
        if (j.contains("s")) b.s = number(j["s"], at(path, "s"));
        if (j.contains("q")) b.q = number(j["q"], at(path, "q"));
        if (j.contains("length")) b.length = number(j["length"], at(path, "length"));
        if (j.contains("axial_step_factor")) b.axial_step_factor = number(j["axial_step_factor"], at(path, "axial_step_factor"));
        if (j.contains("min_ring_radius")) b.min_ring_radius = number(j["min_ring_radius"], at(path, "min_ring_radius"));
        if (j.contains("min_ring_nodes")) b.min_ring_nodes = integer(j["min_ring_nodes"], at(path, "min_ring_nodes"));
        if (j.contains("max_ring_nodes")) b.max_ring_nodes = integer(j["max_ring_nodes"], at(path, "max_ring_nodes"));
    } else {
        fail(at(path, "generator"), "unknown generator '" + n.generator + "' (grid, sphere, ring, rotational_body)");
    }
    return n;
}

inline Json node_spec_json(const NodeSpec& n) {
    if (n.generator == "inline") return points_json(n.points);
    Json j;
    j["generator"] = n.generator;
    if (n.generator == "grid") {
        j["origin"] = n.origin;
        j["spacing"] = n.spacing;
        j["counts"] = n.counts;
    } else if (n.generator == "sphere" || n.generator == "ring") {
        j["center"] = n.center;
        j["radius"] = n.radius;
        j["count"] = n.count;
    } else {
        const geometry::RotationalBodyOptions d;
        const auto& b = n.body;
        j["profile"] = geometry::to_string(b.profile);
        // Only non-default options are written, so round trips are stable.
        if (b.s != d.s) j["s"] = b.s;
        if (b.q != d.q) j["q"] = b.q;
        if (b.length != d.length) j["length"] = b.length;
        if (b.axial_step_factor != d.axial_step_factor) j["axial_step_factor"] = b.axial_step_factor;
        if (b.min_ring_radius != d.min_ring_radius) j["min_ring_radius"] = b.min_ring_radius;
        if (b.min_ring_nodes != d.min_ring_nodes) j["min_ring_nodes"] = b.min_ring_nodes;
        if (b.max_ring_nodes != d.max_ring_nodes) j["max_ring_nodes"] = b.max_ring_nodes;
    }
    return j;
}

inline ValueOrList value_or_list(const Json& j, const std::string& path) {
    ValueOrList v;
    if (j.is_number()) v.constant = j.get<double>();
    else if (j.is_array()) v.list = numbers(j, path);
    else fail(path, "expected a number or an array of numbers");
    return v;
}

inline Json value_or_list_json(const ValueOrList& v) { return v.constant ? Json(*v.constant) : Json(v.list); }

} // namespace config_detail

inline ProblemConfig parse_config(const Json& root) {
    using namespace config_detail;
    require_object(root, "");
    allow_keys(root, "", {"kernel", "plates", "field", "solver", "capacity", "balayage", "exhaust", "thinness", "check_pd"});
    ProblemConfig cfg;

    if (root.contains("kernel")) {
        const auto& k = root["kernel"];
        require_object(k, "kernel");
        allow_keys(k, "kernel", {"family", "alpha", "epsilon", "table"});
        KernelConfig kc;
        kc.family = enum_value<KernelFamily>(need(k, "kernel", "family"), "kernel.family", kernel_family_from_string);
        if (k.contains("alpha")) kc.alpha = number(k["alpha"], "kernel.alpha");
        if (k.contains("epsilon")) {
            if (k["epsilon"].is_string()) {
                if (k["epsilon"].get<std::string>() != "auto") fail("kernel.epsilon", "expected a number or \"auto\"");
                kc.epsilon_auto = true;
            } else {
                kc.epsilon = number(k["epsilon"], "kernel.epsilon");
            }
        }
        if (k.contains("table")) {
            const auto& t = k["table"];
            if (!t.is_array() || t.empty()) fail("kernel.table", "expected a nonempty square array of rows");
            const auto n = static_cast<Eigen::Index>(t.size());
            Eigen::MatrixXd m(n, n);
            for (Eigen::Index r = 0; r < n; ++r) {
                const auto row = numbers(t[static_cast<std::size_t>(r)], at("kernel.table", static_cast<std::size_t>(r)));
                if (static_cast<Eigen::Index>(row.size()) != n) fail(at("kernel.table", static_cast<std::size_t>(r)), "row length differs from the row count");
                for (Eigen::Index c = 0; c < n; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
            }
            kc.table = m;
        }
        if (kc.family == KernelFamily::custom_table && !kc.table) fail("kernel.table", "custom_table kernels need a table");
        cfg.kernel = std::move(kc);
    }

    if (root.contains("plates")) {
        const auto& ps = root["plates"];
        if (!ps.is_array() || ps.empty()) fail("plates", "expected a nonempty array");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const auto path = at("plates", i);
            const auto& p = ps[i];
            require_object(p, path);
            allow_keys(p, path, {"sign", "nodes", "g", "a", "sigma"});
            PlateConfig pc;
            pc.sign = integer(need(p, path, "sign"), at(path, "sign"));
            if (pc.sign != 1 && pc.sign != -1) fail(at(path, "sign"), "must be +1 or -1");
            pc.nodes = node_spec(need(p, path, "nodes"), at(path, "nodes"));
            if (p.contains("g")) pc.g = value_or_list(p["g"], at(path, "g"));
            pc.a = number(need(p, path, "a"), at(path, "a"));
            const auto& s = need(p, path, "sigma");
            if (s.is_object()) {
                allow_keys(s, at(path, "sigma"), {"equilibrium_scale"});
                pc.sigma.equilibrium_scale = number(need(s, at(path, "sigma"), "equilibrium_scale"),
                                                    at(at(path, "sigma"), "equilibrium_scale"));
            } else {
                pc.sigma.value = value_or_list(s, at(path, "sigma"));
            }
            cfg.plates.push_back(std::move(pc));
        }
    }

    if (root.contains("field")) {
        const auto& f = root["field"];
        require_object(f, "field");
        allow_keys(f, "field", {"case", "values", "zeta"});
        FieldConfig fc;
        const auto kind = string(need(f, "field", "case"), "field.case");
        if (kind == "case1") {
            const auto& v = need(f, "field", "values");
            if (!v.is_array()) fail("field.values", "expected one array per plate");
            for (std::size_t i = 0; i < v.size(); ++i) fc.values.push_back(numbers(v[i], at("field.values", i), true));
        } else if (kind == "case2") {
            fc.kind = FieldCase::case2;
            const auto& z = need(f, "field", "zeta");
            require_object(z, "field.zeta");
            allow_keys(z, "field.zeta", {"support", "weights"});
            fc.zeta_support = points(need(z, "field.zeta", "support"), "field.zeta.support");
            fc.zeta_weights = numbers(need(z, "field.zeta", "weights"), "field.zeta.weights");
            if (fc.zeta_support.size() != fc.zeta_weights.size())
                fail("field.zeta.weights", "length differs from field.zeta.support");
        } else {
            fail("field.case", "expected \"case1\" or \"case2\"");
        }
        cfg.field = std::move(fc);
    }

    if (root.contains("solver")) {
        const auto& s = root["solver"];
        require_object(s, "solver");
        allow_keys(s, "solver", {"algorithm", "max_iters", "grad_tol", "step_rule", "fw_step", "projection_tol", "seed"});
        SolverSection sc;
        if (s.contains("algorithm")) sc.algorithm = enum_value<Algorithm>(s["algorithm"], "solver.algorithm", algorithm_from_string);
        if (s.contains("max_iters")) sc.max_iters = integer(s["max_iters"], "solver.max_iters");
        if (s.contains("grad_tol")) sc.grad_tol = number(s["grad_tol"], "solver.grad_tol");
        if (s.contains("step_rule")) sc.step_rule = enum_value<StepRule>(s["step_rule"], "solver.step_rule", step_rule_from_string);
        if (s.contains("fw_step")) sc.fw_step = enum_value<FrankWolfeStep>(s["fw_step"], "solver.fw_step", fw_step_from_string);
        if (s.contains("projection_tol")) sc.projection_tol = number(s["projection_tol"], "solver.projection_tol");
        if (s.contains("seed")) {
            if (!s["seed"].is_number_unsigned()) fail("solver.seed", "expected a nonnegative integer");
            sc.seed = s["seed"].get<std::uint64_t>();
        }
        cfg.solver = sc;
    }

    if (root.contains("capacity")) {
        const auto& c = root["capacity"];
        require_object(c, "capacity");
        allow_keys(c, "capacity", {"nodes", "frostman_tol", "grad_tol"});
        CapacitySection cs;
        if (c.contains("nodes")) cs.nodes = node_spec(c["nodes"], "capacity.nodes");
        if (c.contains("frostman_tol")) cs.frostman_tol = number(c["frostman_tol"], "capacity.frostman_tol");
        if (c.contains("grad_tol")) cs.grad_tol = number(c["grad_tol"], "capacity.grad_tol");
        cfg.capacity = std::move(cs);
    }

    if (root.contains("balayage")) {
        const auto& b = root["balayage"];
        require_object(b, "balayage");
        allow_keys(b, "balayage", {"source", "target", "tol"});
        BalayageSection bs;
        const auto& src = need(b, "balayage", "source");
        require_object(src, "balayage.source");
        allow_keys(src, "balayage.source", {"support", "weights"});
        bs.source_support = points(need(src, "balayage.source", "support"), "balayage.source.support");
        bs.source_weights = numbers(need(src, "balayage.source", "weights"), "balayage.source.weights");
        if (bs.source_support.size() != bs.source_weights.size())
            fail("balayage.source.weights", "length differs from balayage.source.support");
        bs.target = node_spec(need(b, "balayage", "target"), "balayage.target");
        if (b.contains("tol")) bs.tol = number(b["tol"], "balayage.tol");
        cfg.balayage = std::move(bs);
    }

    if (root.contains("exhaust")) {
        const auto& e = root["exhaust"];
        require_object(e, "exhaust");
        allow_keys(e, "exhaust", {"fractions", "betas"});
        ExhaustSection es;
        es.fractions = numbers(need(e, "exhaust", "fractions"), "exhaust.fractions");
        es.betas = numbers(need(e, "exhaust", "betas"), "exhaust.betas");
        if (es.fractions.size() != es.betas.size()) fail("exhaust.betas", "length differs from exhaust.fractions");
        cfg.exhaust = std::move(es);
    }

    if (root.contains("thinness")) {
        const auto& t = root["thinness"];
        require_object(t, "thinness");
        allow_keys(t, "thinness", {"profile", "s", "radii", "q", "axial_step_factor", "min_ring_radius", "slices", "grad_tol"});
        ThinnessSection ts;
        ts.profile = enum_value<geometry::Profile>(need(t, "thinness", "profile"), "thinness.profile", geometry::profile_from_string);
        ts.radii = numbers(need(t, "thinness", "radii"), "thinness.radii");
        if (t.contains("s")) ts.s = number(t["s"], "thinness.s");
        if (t.contains("q")) ts.q = number(t["q"], "thinness.q");
        if (t.contains("axial_step_factor")) ts.axial_step_factor = number(t["axial_step_factor"], "thinness.axial_step_factor");
        if (t.contains("min_ring_radius")) ts.min_ring_radius = number(t["min_ring_radius"], "thinness.min_ring_radius");
        if (t.contains("slices")) ts.slices = integer(t["slices"], "thinness.slices");
        if (t.contains("grad_tol")) ts.grad_tol = number(t["grad_tol"], "thinness.grad_tol");
        cfg.thinness = std::move(ts);
    }

    if (root.contains("check_pd")) {
        const auto& c = root["check_pd"];
        require_object(c, "check_pd");
        allow_keys(c, "check_pd", {"pd_tol"});
        CheckPdSection cs;
        if (c.contains("pd_tol")) cs.pd_tol = number(c["pd_tol"], "check_pd.pd_tol");
        cfg.check_pd = cs;
    }
    return cfg;
}

/// Parses JSON text; syntax errors carry the byte position reported by the parser.
inline ProblemConfig parse_config_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config: JSON syntax error: ") + e.what());
    }
    return parse_config(j);
}

inline ProblemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Canonical JSON of a config: only fields that were given, keys sorted.
inline Json serialize_config(const ProblemConfig& cfg) {
    using namespace config_detail;
    Json root = Json::object();
    if (cfg.kernel) {
        const auto& kc = *cfg.kernel;
        Json k;
        k["family"] = to_string(kc.family);
        if (kc.alpha) k["alpha"] = *kc.alpha;
        if (kc.epsilon) k["epsilon"] = *kc.epsilon;
        else if (kc.epsilon_auto) k["epsilon"] = "auto";
        if (kc.table) {
            Json t = Json::array();
            for (Eigen::Index r = 0; r < kc.table->rows(); ++r) {
                Json row = Json::array();
                for (Eigen::Index c = 0; c < kc.table->cols(); ++c) row.push_back((*kc.table)(r, c));
                t.push_back(row);
            }
            k["table"] = t;
        }
        root["kernel"] = k;
    }
    Json ps = Json::array();
    for (const auto& p : cfg.plates) {
        Json j;
        j["sign"] = p.sign;
        j["nodes"] = node_spec_json(p.nodes);
        if (p.g) j["g"] = value_or_list_json(*p.g);
        j["a"] = p.a;
        if (p.sigma.equilibrium_scale) j["sigma"] = Json{{"equilibrium_scale", *p.sigma.equilibrium_scale}};
        else j["sigma"] = value_or_list_json(p.sigma.value);
        ps.push_back(j);
    }
    if (!ps.empty()) root["plates"] = ps;
    if (cfg.field) {
        Json f;
        if (cfg.field->kind == FieldCase::case1) {
            f["case"] = "case1";
            Json v = Json::array();
            for (const auto& row : cfg.field->values) v.push_back(numbers_json(row));
            f["values"] = v;
        } else {
            f["case"] = "case2";
            f["zeta"] = Json{{"support", points_json(cfg.field->zeta_support)}, {"weights", cfg.field->zeta_weights}};
        }
        root["field"] = f;
    }
    if (cfg.solver) {
        const auto& s = *cfg.solver;
        Json j = Json::object();
        if (s.algorithm) j["algorithm"] = to_string(*s.algorithm);
        if (s.max_iters) j["max_iters"] = *s.max_iters;
        if (s.grad_tol) j["grad_tol"] = *s.grad_tol;
        if (s.step_rule) j["step_rule"] = to_string(*s.step_rule);
        if (s.fw_step) j["fw_step"] = to_string(*s.fw_step);
        if (s.projection_tol) j["projection_tol"] = *s.projection_tol;
        if (s.seed) j["seed"] = *s.seed;
        root["solver"] = j;
    }
    if (cfg.capacity) {
        Json j = Json::object();
        if (cfg.capacity->nodes) j["nodes"] = node_spec_json(*cfg.capacity->nodes);
        if (cfg.capacity->frostman_tol) j["frostman_tol"] = *cfg.capacity->frostman_tol;
        if (cfg.capacity->grad_tol) j["grad_tol"] = *cfg.capacity->grad_tol;
        root["capacity"] = j;
    }
    if (cfg.balayage) {
        const auto& b = *cfg.balayage;
        Json j;
        j["source"] = Json{{"support", points_json(b.source_support)}, {"weights", b.source_weights}};
        j["target"] = node_spec_json(b.target);
        if (b.tol) j["tol"] = *b.tol;
        root["balayage"] = j;
    }
    if (cfg.exhaust) root["exhaust"] = Json{{"fractions", cfg.exhaust->fractions}, {"betas", cfg.exhaust->betas}};
    if (cfg.thinness) {
        const auto& t = *cfg.thinness;
        Json j;
        j["profile"] = geometry::to_string(t.profile);
        j["radii"] = t.radii;
        if (t.s) j["s"] = *t.s;
        if (t.q) j["q"] = *t.q;
        if (t.axial_step_factor) j["axial_step_factor"] = *t.axial_step_factor;
        if (t.min_ring_radius) j["min_ring_radius"] = *t.min_ring_radius;
        if (t.slices) j["slices"] = *t.slices;
        if (t.grad_tol) j["grad_tol"] = *t.grad_tol;
        root["thinness"] = j;
    }
    if (cfg.check_pd) {
        Json j = Json::object();
        if (cfg.check_pd->pd_tol) j["pd_tol"] = *cfg.check_pd->pd_tol;
        root["check_pd"] = j;
    }
    return root;
}

/// The parse-then-serialize form of a config document.
inline Json canonicalize(const Json& j) { return serialize_config(parse_config(j)); }

// --- building library objects ---------------------------------------------------

inline std::vector<Point> generate_nodes(const NodeSpec& n) {
    if (n.generator == "inline") return n.points;
    if (n.generator == "grid") return geometry::grid(n.origin, n.spacing, n.counts);
    if (n.generator == "sphere") return geometry::sphere(Point(n.center), n.radius, n.count);
    if (n.generator == "ring") return geometry::ring(Point(n.center), n.radius, n.count);
    if (n.generator == "rotational_body") return geometry::rotational_body(n.body).nodes;
    throw ConfigError("unknown generator '" + n.generator + "'");
}

/// Kernel spec with epsilon resolved against `nodes` when set to auto.
inline KernelSpec build_kernel(const std::optional<KernelConfig>& kc, const std::vector<Point>& nodes) {
    const KernelConfig k = kc.value_or(KernelConfig{});
    KernelSpec spec;
    spec.family = k.family;
    if (k.family == KernelFamily::newtonian) spec.alpha = 2.0;
    if (k.alpha) {
        if (k.family != KernelFamily::riesz) throw ConfigError("kernel.alpha: only riesz kernels take alpha");
        spec.alpha = *k.alpha;
    }
    spec.table = k.table;
    if (k.family == KernelFamily::custom_table) spec.epsilon = 0.0;
    else if (k.epsilon) spec.epsilon = *k.epsilon;
    else spec.epsilon = nodes.size() > 1 ? default_epsilon(nodes) : 0.0;
    try {
        validate(spec);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("kernel: ") + e.what());
    }
    return spec;
}

inline SolverConfig build_solver(const ProblemConfig& cfg) {
    SolverConfig s;
    if (!cfg.solver) return s;
    const auto& c = *cfg.solver;
    if (c.algorithm) s.algorithm = *c.algorithm;
    if (c.max_iters) s.max_iters = *c.max_iters;
    if (c.grad_tol) s.grad_tol = *c.grad_tol;
    if (c.step_rule) s.step_rule = *c.step_rule;
    if (c.fw_step) s.fw_step = *c.fw_step;
    if (c.projection_tol) s.projection_tol = *c.projection_tol;
    if (c.seed) s.seed = *c.seed;
    return s;
}

/// Everything needed to call solve().
struct Problem {
    Condenser condenser;
    GramMatrix gram;
    FieldSpec field;
    SolverConfig solver;
};

inline Eigen::VectorXd expand(const ValueOrList& v, Eigen::Index n, const std::string& path) {
    if (v.constant) return Eigen::VectorXd::Constant(n, *v.constant);
    if (static_cast<Eigen::Index>(v.list.size()) != n)
        throw ConfigError(path + ": has " + std::to_string(v.list.size()) + " entries, plate has " + std::to_string(n) +
                          " nodes");
    return Eigen::Map<const Eigen::VectorXd>(v.list.data(), n);
}

inline Problem build_problem(const ProblemConfig& cfg) {
    using config_detail::at;
    if (cfg.plates.empty()) throw ConfigError("plates: at least one plate is required");
    std::vector<std::vector<Point>> node_sets;
    std::vector<Point> all;
    for (std::size_t i = 0; i < cfg.plates.size(); ++i) {
        try {
            node_sets.push_back(generate_nodes(cfg.plates[i].nodes));
        } catch (const InvalidArgument& e) {
            throw ConfigError(at(at("plates", i), "nodes") + ": " + e.what());
        }
        all.insert(all.end(), node_sets.back().begin(), node_sets.back().end());
    }
    const auto spec = build_kernel(cfg.kernel, all);
    std::vector<Plate> plates;
    for (std::size_t i = 0; i < cfg.plates.size(); ++i) {
        const auto& pc = cfg.plates[i];
        const auto path = at("plates", i);
        Plate p;
        p.id = static_cast<int>(i);
        p.sign = pc.sign;
        p.nodes = node_sets[i];
        const auto n = p.size();
        p.g = pc.g ? expand(*pc.g, n, at(path, "g")) : Eigen::VectorXd::Ones(n);
        p.mass = pc.a;
        if (pc.sigma.equilibrium_scale) {
            const auto eq = equilibrium(spec, p.nodes);
            p.sigma = *pc.sigma.equilibrium_scale * pc.a / p.g.dot(eq.unit_minimizer) * eq.unit_minimizer;
        } else {
            p.sigma = expand(pc.sigma.value, n, at(path, "sigma"));
        }
        plates.push_back(std::move(p));
    }
    Problem prob;
    try {
        prob.condenser = Condenser(std::move(plates));
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    prob.gram = assemble_gram(spec, prob.condenser);
    if (!cfg.field) {
        prob.field = FieldSpec::zero(prob.condenser);
    } else if (cfg.field->kind == FieldCase::case1) {
        const auto& v = cfg.field->values;
        if (v.size() != prob.condenser.plate_count()) throw ConfigError("field.values: need one array per plate");
        std::vector<Eigen::VectorXd> vals;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (static_cast<Eigen::Index>(v[i].size()) != prob.condenser.plate(i).size())
                throw ConfigError(at("field.values", i) + ": length differs from the plate's node count");
            vals.emplace_back(Eigen::Map<const Eigen::VectorXd>(v[i].data(), static_cast<Eigen::Index>(v[i].size())));
        }
        prob.field = FieldSpec::case1(std::move(vals));
    } else {
        ScalarSignedMeasure z;
        z.support = cfg.field->zeta_support;
        z.weights = Eigen::Map<const Eigen::VectorXd>(cfg.field->zeta_weights.data(),
                                                      static_cast<Eigen::Index>(cfg.field->zeta_weights.size()));
        prob.field = FieldSpec::case2(std::move(z));
    }
    prob.solver = build_solver(cfg);
    return prob;
}

} // namespace sigcond
