// sigcond: command-line front end.
//
//   sigcond solve|capacity|balayage|exhaust|thinness|check-pd <config>
//           [--out FILE] [--seed N] [--format json|csv]
//
// Records go to stdout (or FILE), one JSON object per line, or a CSV table.
// Exit status: 0 success, 1 infeasible / invalid input / failure,
// 2 solve finished without meeting grad_tol.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sigcond/analysis.hpp"
#include "sigcond/config.hpp"

using namespace sigcond;

namespace {

Json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string csv_cell(const Json& v) {
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }
    return v.dump();
}

/// Scalar fields of every record as CSV columns, in key order.
void write_csv(std::ostream& out, const std::vector<Json>& records) {
    std::vector<std::string> cols;
    std::set<std::string> seen;
    for (const auto& r : records)
        for (auto it = r.begin(); it != r.end(); ++it)
            if (!it->is_structured() && seen.insert(it.key()).second) cols.push_back(it.key());
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
    out << '\n';
    for (const auto& r : records) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (c) out << ',';
            if (r.contains(cols[c])) out << csv_cell(r[cols[c]]);
        }
        out << '\n';
    }
}

struct Output {
    std::vector<Json> records;
    std::vector<Json> csv_rows;  // optional per-command table, else records
    int exit_code = 0;
};

Output cmd_solve(const ProblemConfig& cfg, std::optional<std::uint64_t> seed) {
    auto prob = build_problem(cfg);
    if (seed) prob.solver.seed = *seed;
    const auto r = solve(prob.condenser, prob.gram, prob.field, prob.solver);
    Json rec;
    rec["command"] = "solve";
    rec["value"] = r.value;
    rec["kkt_residual"] = r.kkt_residual;
    rec["iterations"] = r.iterations;
    rec["converged"] = r.converged;
    rec["algorithm"] = to_string(prob.solver.algorithm);
    rec["epsilon"] = prob.gram.spec.epsilon;
    rec["multipliers"] = r.multipliers;
    Json w = Json::array();
    for (const auto& x : r.minimizer.weights) w.push_back(vec_json(x));
    rec["weights"] = w;
    Output out;
    for (std::size_t i = 0; i < prob.condenser.plate_count(); ++i) {
        const auto& p = prob.condenser.plate(i);
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            Json row;
            row["plate"] = i;
            row["node"] = k;
            const auto& x = p.nodes[static_cast<std::size_t>(k)];
            for (std::size_t d = 0; d < x.dimension(); ++d) row["x" + std::to_string(d)] = x[d];
            row["weight"] = r.minimizer.weights[i][k];
            out.csv_rows.push_back(row);
        }
    }
    out.records.push_back(rec);
    out.exit_code = r.converged ? 0 : 2;
    return out;
}

Json equilibrium_json(const std::string& set, const EquilibriumReport& e) {
    Json rec;
    rec["command"] = "capacity";
    rec["set"] = set;
    rec["node_count"] = e.unit_minimizer.size();
    rec["robin_constant"] = e.robin_constant;
    rec["capacity"] = e.capacity;
    rec["frostman_violation"] = e.frostman_violation;
    rec["frostman_tol"] = e.frostman_tol;
    rec["frostman_ok"] = e.frostman_ok;
    rec["kkt_residual"] = e.kkt_residual;
    rec["iterations"] = e.iterations;
    rec["converged"] = e.converged;
    rec["unit_minimizer"] = vec_json(e.unit_minimizer);
    return rec;
}

Output cmd_capacity(const ProblemConfig& cfg) {
    const CapacitySection sec = cfg.capacity.value_or(CapacitySection{});
    std::vector<std::pair<std::string, std::vector<Point>>> sets;
    if (sec.nodes) {
        sets.emplace_back("nodes", generate_nodes(*sec.nodes));
    } else {
        if (cfg.plates.empty()) throw ConfigError("capacity: give capacity.nodes or at least one plate");
        for (std::size_t i = 0; i < cfg.plates.size(); ++i)
            sets.emplace_back("plate " + std::to_string(i), generate_nodes(cfg.plates[i].nodes));
    }
    std::vector<Point> all;
    for (const auto& s : sets) all.insert(all.end(), s.second.begin(), s.second.end());
    const auto spec = build_kernel(cfg.kernel, all);
    Output out;
    for (const auto& [name, nodes] : sets) {
        const auto e = equilibrium(spec, nodes, sec.frostman_tol.value_or(-1.0), sec.grad_tol.value_or(1e-10));
        auto rec = equilibrium_json(name, e);
        rec["epsilon"] = spec.epsilon;
        out.records.push_back(rec);
    }
    return out;
}

Output cmd_balayage(const ProblemConfig& cfg) {
    if (!cfg.balayage) throw ConfigError("balayage: missing section");
    const auto& b = *cfg.balayage;
    ScalarSignedMeasure src;
    src.support = b.source_support;
    src.weights = Eigen::Map<const Eigen::VectorXd>(b.source_weights.data(), static_cast<Eigen::Index>(b.source_weights.size()));
    const auto target = generate_nodes(b.target);
    const auto joint = joint_nodes(src, target);
    const auto spec = build_kernel(cfg.kernel, joint.nodes);
    const auto r = balayage(spec, src, target, b.tol.value_or(1e-10));
    Json rec;
    rec["command"] = "balayage";
    rec["target_count"] = target.size();
    rec["potential_residual"] = r.potential_residual;
    rec["mass_ratio"] = r.mass_ratio;
    rec["source_mass"] = r.source_mass;
    rec["swept_mass"] = r.swept_mass;
    rec["source_norm"] = r.source_norm;
    rec["swept_norm"] = r.swept_norm;
    rec["kkt_residual"] = r.kkt_residual;
    rec["iterations"] = r.iterations;
    rec["converged"] = r.converged;
    rec["epsilon"] = spec.epsilon;
    rec["swept"] = vec_json(r.swept);
    Output out;
    out.records.push_back(rec);
    return out;
}

Output cmd_exhaust(const ProblemConfig& cfg, std::optional<std::uint64_t> seed) {
    if (!cfg.exhaust) throw ConfigError("exhaust: missing section");
    auto prob = build_problem(cfg);
    if (seed) prob.solver.seed = *seed;
    const auto t = exhaustion_experiment(prob.condenser, prob.gram, prob.field, cfg.exhaust->fractions,
                                         cfg.exhaust->betas, prob.solver);
    Output out;
    for (std::size_t s = 0; s < t.stages.size(); ++s) {
        const auto& st = t.stages[s];
        Json rec;
        rec["command"] = "exhaust";
        rec["stage"] = s;
        rec["node_fraction"] = st.node_fraction;
        rec["sigma_scale"] = st.sigma_scale;
        rec["node_counts"] = st.node_counts;
        rec["feasible"] = st.feasible;
        rec["full_value"] = t.full_value;
        if (st.feasible) {
            rec["value"] = st.value;
            rec["semimetric_gap"] = st.semimetric_gap;
            rec["kkt_residual"] = st.kkt_residual;
            rec["iterations"] = st.iterations;
            rec["converged"] = st.converged;
        } else {
            rec["message"] = st.message;
        }
        rec["trace_monotone"] = t.monotone;
        out.records.push_back(rec);
    }
    return out;
}

Output cmd_thinness(const ProblemConfig& cfg) {
    if (!cfg.thinness) throw ConfigError("thinness: missing section");
    if (cfg.kernel && cfg.kernel->family != KernelFamily::newtonian)
        throw ConfigError("kernel.family: the thinness demo uses the Newtonian kernel");
    const auto& t = *cfg.thinness;
    ThinnessOptions o;
    o.profile = t.profile;
    o.radii = t.radii;
    if (t.s) o.s = *t.s;
    if (t.q) o.q = *t.q;
    if (t.axial_step_factor) o.axial_step_factor = *t.axial_step_factor;
    if (t.min_ring_radius) o.min_ring_radius = *t.min_ring_radius;
    if (t.slices) o.slices = *t.slices;
    if (t.grad_tol) o.grad_tol = *t.grad_tol;
    const auto rep = thinness_demo(o);
    Output out;
    for (const auto& r : rep.records) {
        Json rec;
        rec["command"] = "thinness";
        rec["profile"] = geometry::to_string(o.profile);
        rec["s"] = o.s;
        rec["radius"] = r.radius;
        rec["resolved_length"] = r.resolved_length;
        rec["node_count"] = r.node_count;
        rec["capacity"] = r.capacity;
        rec["green_energy"] = r.green_energy;
        rec["balayage_mass"] = r.balayage_mass;
        rec["deficit"] = r.deficit;
        rec["slices_used"] = r.slices_used;
        rec["value"] = r.value;
        rec["lower_bound"] = r.lower_bound;
        rec["minimizer_mass_center"] = r.minimizer_mass_center;
        rec["gap_to_balayage_candidate"] = r.gap_to_balayage_candidate;
        rec["converged"] = r.converged;
        rec["epsilon"] = rep.epsilon;
        rec["capacity_nondecreasing"] = rep.capacity_nondecreasing;
        rec["note"] = rep.note;
        out.records.push_back(rec);
    }
    return out;
}

Output cmd_check_pd(const ProblemConfig& cfg) {
    const double pd_tol = cfg.check_pd && cfg.check_pd->pd_tol ? *cfg.check_pd->pd_tol : -1.0;
    Json rec;
    rec["command"] = "check-pd";
    PdDiagnosis d;
    if (cfg.plates.empty()) {
        if (!cfg.kernel || !cfg.kernel->table) throw ConfigError("plates: required unless the kernel is a custom_table");
        const auto spec = build_kernel(cfg.kernel, {});
        d = check_positive_definite(*spec.table, pd_tol);
        rec["size"] = spec.table->rows();
        rec["epsilon"] = spec.epsilon;
    } else {
        std::vector<Point> all;
        for (const auto& p : cfg.plates) {
            const auto n = generate_nodes(p.nodes);
            all.insert(all.end(), n.begin(), n.end());
        }
        const auto spec = build_kernel(cfg.kernel, all);
        const auto g = assemble_gram(spec, std::span<const Point>(all));
        d = check_positive_definite(g, pd_tol);
        rec["size"] = g.size();
        rec["epsilon"] = spec.epsilon;
    }
    rec["min_eigenvalue"] = d.min_eigenvalue;
    rec["max_eigenvalue"] = d.max_eigenvalue;
    rec["pd_tol"] = d.pd_tol;
    rec["is_pd"] = d.is_pd;
    rec["is_strictly_pd"] = d.is_strictly_pd;
    Output out;
    out.records.push_back(rec);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained f-weighted energy minimization on signed condensers"};
    std::string command, config_path, out_path, format = "json";
    std::optional<std::uint64_t> seed;
    app.add_option("command", command, "solve | capacity | balayage | exhaust | thinness | check-pd")
        ->required()
        ->check(CLI::IsMember({"solve", "capacity", "balayage", "exhaust", "thinness", "check-pd"}));
    app.add_option("config", config_path, "problem config (JSON)")->required();
    app.add_option("--out", out_path, "write records to FILE instead of stdout");
    app.add_option("--seed", seed, "override solver.seed");
    app.add_option("--format", format, "json (one record per line) or csv")->check(CLI::IsMember({"json", "csv"}));
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    Output out;
    try {
        const auto cfg = load_config(config_path);
        if (command == "solve") out = cmd_solve(cfg, seed);
        else if (command == "capacity") out = cmd_capacity(cfg);
        else if (command == "balayage") out = cmd_balayage(cfg);
        else if (command == "exhaust") out = cmd_exhaust(cfg, seed);
        else if (command == "thinness") out = cmd_thinness(cfg);
        else out = cmd_check_pd(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    std::ostringstream buf;
    if (format == "csv") {
        write_csv(buf, out.csv_rows.empty() ? out.records : out.csv_rows);
    } else {
        for (const auto& r : out.records) buf << r.dump() << '\n';
    }
    if (out_path.empty()) {
        std::cout << buf.str();
    } else {
        std::ofstream f(out_path);
        if (!f) {
            std::cerr << "error: cannot write '" << out_path << "'\n";
            return 1;
        }
        f << buf.str();
    }
    return out.exit_code;
}
