#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "io.hpp"

namespace shield {

struct ExperimentConfig {
    std::vector<double> deltas{2, 4, 6, 8, 10, 14};
    int runs_per_delta = 5;
    std::vector<double> sample_times{8, 16, 30};
    std::uint64_t base_seed = 1;
};

struct RunConfig {
    QuadricSurface surface;
    int n = 0;
    DesignOptions design;
    ControlGains gains;
    double delta = 2;
    std::vector<std::uint64_t> seeds{1};
    SimOptions sim;
    ICOptions ic;
    ExperimentConfig experiment;
    std::string out = "out";
};

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    if (!j.contains("surface")) throw InvalidInput("config needs a 'surface' object");
    c.surface = surface_from_json(j["surface"]);
    c.n = j.value("n", 0);
    c.gains = default_gains(c.surface);
    if (j.contains("gains")) c.gains = gains_from_json(j["gains"], c.gains);
    if (j.contains("design")) {
        const auto& d = j["design"];
        if (d.contains("edge_slack") && !d["edge_slack"].is_null()) c.design.edge_slack = d["edge_slack"].get<double>();
        c.design.base_height = d.value("base_height", 0.0);
    }
    c.delta = j.value("delta", c.delta);
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.sim.dt = j.value("dt", c.sim.dt);
    c.sim.t_end = j.value("t_end", c.sim.t_end);
    c.sim.method = method_from_string(j.value("method", std::string("rk4")));
    c.sim.sample_interval = j.value("sample_interval", c.sim.sample_interval);
    if (j.contains("ic")) c.ic.z_floor = j["ic"].value("z_floor", 0.0);
    c.ic.z_upper = c.gains.z_upper;
    if (j.contains("experiment")) {
        const auto& e = j["experiment"];
        if (e.contains("deltas")) c.experiment.deltas = e["deltas"].get<std::vector<double>>();
        c.experiment.runs_per_delta = e.value("runs_per_delta", c.experiment.runs_per_delta);
        if (e.contains("sample_times")) c.experiment.sample_times = e["sample_times"].get<std::vector<double>>();
        c.experiment.base_seed = e.value("base_seed", c.experiment.base_seed);
    }
    c.out = j.value("out", c.out);
    return c;
}

namespace detail {

struct StageError : Error {
    std::string stage;
    StageError(std::string st, const std::string& msg) : Error(msg), stage(std::move(st)) {}
};

template <class F>
auto stage(const std::string& name, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

inline void prepare_out(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InvalidInput("cannot create output directory " + dir + ": " + ec.message());
    auto probe = std::filesystem::path(dir) / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw InvalidInput("output directory " + dir + " is not writable");
    }
    std::filesystem::remove(probe, ec);
}

inline json check_report(const FormationSpec& spec, const std::optional<QuadricSurface>& s) {
    auto rep = check_delaunay(spec.positions, spec.edge_pairs());
    const int n = spec.size(), ne = static_cast<int>(spec.edges.size());
    json j;
    j["N"] = n;
    j["N_e"] = ne;
    j["triangles"] = rep.triangles.size();
    j["delaunay_violations"] = rep.violations.size();
    j["violations"] = json::array();
    for (const auto& v : rep.violations)
        j["violations"].push_back({{"triangle", v.triangle}, {"node", v.node}});
    j["bounds_ok"] = ne >= 2 * n - 2 && ne <= 3 * n - 6;
    j["connected"] = connected(n, spec.edge_pairs());
    if (s) {
        auto r = verify_rank_prediction(make_framework(spec, *s));
        j["s"] = r.s;
        j["predicted_rank"] = r.predicted ? json(*r.predicted) : json(nullptr);
        j["measured_rank"] = r.measured;
    } else {
        j["s"] = j["predicted_rank"] = j["measured_rank"] = nullptr;
    }
    return j;
}

inline std::vector<Vec3> positions_from_file(const std::string& path) {
    json j = load_json(path);
    const json& arr = j.is_object() && j.contains("positions") ? j["positions"] : j;
    std::vector<Vec3> p;
    for (const auto& x : arr) p.push_back(vec_from_json(x));
    return p;
}

}  // namespace detail

// Returns the process exit code; all output goes to the given streams.
inline int run_app(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Design, verify and simulate multi-agent shield formations on quadric surfaces"};
    app.require_subcommand(1);

    std::string config_path, spec_path, out_dir, initial_path;
    std::optional<int> n_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<double> dt_override, t_end_override;

    auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--n", n_override, "number of agents");
        sub->add_option("--seed", seed_override, "random seed");
        sub->add_option("--dt", dt_override, "integration step");
        sub->add_option("--t-end", t_end_override, "simulated duration");
        sub->add_option("--out", out_dir, "output directory");
    };

    auto* design = app.add_subcommand("design", "run the shield-building algorithm and emit a formation");
    design->add_option("config", config_path, "run config JSON")->required();
    add_overrides(design);

    auto* check = app.add_subcommand("check-delaunay", "Delaunay, edge-count and rank report for a formation");
    check->alias("check");
    check->add_option("spec", spec_path, "formation JSON")->required();
    check->add_option("--config", config_path, "run config providing the surface");
    check->add_option("--out", out_dir, "output directory");

    auto* rank = app.add_subcommand("rank", "rank of the augmented Jacobian at the target positions");
    rank->add_option("spec", spec_path, "formation JSON")->required();
    rank->add_option("--config", config_path, "run config providing the surface");

    auto* sim = app.add_subcommand("simulate", "integrate the closed loop from random or given initial conditions");
    sim->add_option("config", config_path, "run config JSON")->required();
    sim->add_option("--spec", spec_path, "formation JSON (designed from the config if omitted)");
    sim->add_option("--initial", initial_path, "initial positions JSON");
    add_overrides(sim);

    auto* exp = app.add_subcommand("experiment", "statistical study over deltas and seeds");
    exp->add_option("config", config_path, "run config JSON")->required();
    add_overrides(exp);

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e2;
        int code = app.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return code;
    }

    auto load_config = [&]() {
        RunConfig c = detail::stage("config", [&] { return config_from_json(load_json(config_path)); });
        if (n_override) c.n = *n_override;
        if (dt_override) c.sim.dt = *dt_override;
        if (t_end_override) c.sim.t_end = *t_end_override;
        if (seed_override) {
            c.seeds = {*seed_override};
            c.experiment.base_seed = *seed_override;
        }
        if (!out_dir.empty()) c.out = out_dir;
        detail::stage("config", [&] {
            if (c.n < 4) throw InvalidInput("N must be at least 4 (got " + std::to_string(c.n) + ")");
            validate(c.gains);
            if (!(c.sim.dt > 0) || !(c.sim.t_end > 0)) throw InvalidInput("dt and t_end must be positive");
            return 0;
        });
        return c;
    };
    auto load_spec = [&]() {
        return detail::stage("load", [&] { return formation_from_json(load_json(spec_path)); });
    };
    auto surface_for_spec = [&]() -> std::optional<QuadricSurface> {
        if (!config_path.empty())
            return detail::stage("config", [&] { return surface_from_json(load_json(config_path).at("surface")); });
        json j = detail::stage("load", [&] { return load_json(spec_path); });
        if (j.contains("surface")) return detail::stage("load", [&] { return surface_from_json(j["surface"]); });
        return std::nullopt;
    };

    try {
        if (*design) {
            RunConfig c = load_config();
            detail::stage("output", [&] { detail::prepare_out(c.out); return 0; });
            FormationSpec spec = detail::stage("design", [&] { return design_formation(c.surface, c.n, c.design); });
            json j = formation_to_json(spec);
            j["surface"] = surface_to_json(c.surface);
            std::string table = ring_table(spec);
            detail::stage("output", [&] {
                write_text((std::filesystem::path(c.out) / "formation.json").string(), j.dump(2) + "\n");
                write_text((std::filesystem::path(c.out) / "rings.txt").string(), table);
                return 0;
            });
            out << table << "N_e = " << spec.edges.size() << '\n';
        } else if (*check) {
            FormationSpec spec = load_spec();
            auto s = surface_for_spec();
            json rep = detail::stage("check", [&] { return detail::check_report(spec, s); });
            if (!out_dir.empty())
                detail::stage("output", [&] {
                    detail::prepare_out(out_dir);
                    write_text((std::filesystem::path(out_dir) / "check.json").string(), rep.dump(2) + "\n");
                    return 0;
                });
            out << rep.dump(2) << '\n';
        } else if (*rank) {
            FormationSpec spec = load_spec();
            auto s = surface_for_spec();
            if (!s) throw detail::StageError("rank", "no surface available: pass --config or embed it in the spec");
            json rep = detail::stage("rank", [&] {
                auto r = verify_rank_prediction(make_framework(spec, *s));
                json j{{"N", r.n}, {"N_e", r.edges}, {"s", r.s}, {"measured_rank", r.measured}};
                j["predicted_rank"] = r.predicted ? json(*r.predicted) : json(nullptr);
                if (r.agrees) j["agrees"] = *r.agrees;
                return j;
            });
            out << rep.dump(2) << '\n';
        } else if (*sim) {
            RunConfig c = load_config();
            detail::stage("output", [&] { detail::prepare_out(c.out); return 0; });
            FormationSpec spec = spec_path.empty()
                                     ? detail::stage("design", [&] { return design_formation(c.surface, c.n, c.design); })
                                     : load_spec();
            std::uint64_t seed = c.seeds.empty() ? 1 : c.seeds.front();
            auto p0 = detail::stage("initial-conditions", [&] {
                if (!initial_path.empty()) return detail::positions_from_file(initial_path);
                return random_initial_conditions(spec, c.surface, c.delta, seed, c.ic);
            });
            Trajectory tr = detail::stage("simulate", [&] { return integrate(spec, c.surface, c.gains, p0, c.sim); });
            tr.seed = seed;
            detail::stage("output", [&] {
                write_text((std::filesystem::path(c.out) / "trajectory.csv").string(), trajectory_csv(tr));
                write_text((std::filesystem::path(c.out) / "metrics.csv").string(), metrics_csv(tr));
                return 0;
            });
            auto m = convergence_metrics(tr);
            double t_red = std::min(8.0, tr.times.back());
            auto r = m.reduction_at(t_red);
            out << "seed=" << seed << " e0=" << fmt_num(m.initial_e) << " fs0=" << fmt_num(m.initial_fs)
                << " reduction_e(" << fmt_num(t_red) << ")=" << fmt_num(r.e) << " reduction_fs(" << fmt_num(t_red)
                << ")=" << fmt_num(r.fs) << " final_e=" << fmt_num(m.final_e) << " final_fs=" << fmt_num(m.final_fs)
                << '\n';
        } else if (*exp) {
            RunConfig c = load_config();
            detail::stage("config", [&] {
                if (c.experiment.runs_per_delta < 2)
                    throw InvalidInput("runs_per_delta must be at least 2 (sd is undefined otherwise)");
                return 0;
            });
            detail::stage("output", [&] { detail::prepare_out(c.out); return 0; });
            FormationSpec spec = detail::stage("design", [&] { return design_formation(c.surface, c.n, c.design); });
            StudyConfig sc;
            sc.deltas = c.experiment.deltas;
            sc.runs_per_delta = c.experiment.runs_per_delta;
            sc.sample_times = c.experiment.sample_times;
            sc.base_seed = c.experiment.base_seed;
            sc.sim = c.sim;
            sc.ic = c.ic;
            StudyResult res = detail::stage("experiment", [&] { return statistical_study(spec, c.surface, c.gains, sc); });
            std::string csv = stats_csv(res.rows);
            detail::stage("output", [&] {
                write_text((std::filesystem::path(c.out) / "stats.csv").string(), csv);
                return 0;
            });
            out << csv;
            if (!res.errors.empty()) {
                for (const auto& e : res.errors) err << "error [experiment]: " << e << '\n';
                return 1;
            }
        }
    } catch (const detail::StageError& e) {
        err << "error [" << e.stage << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace shield
