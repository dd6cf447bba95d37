#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "controller.hpp"
#include "errors.hpp"
#include "quadric.hpp"
#include "shield_builder.hpp"

namespace shield {

enum class Method { Euler, RK4 };

inline Method method_from_string(const std::string& m) {
    if (m == "rk4") return Method::RK4;
    if (m == "euler") return Method::Euler;
    throw InvalidInput("unknown integration method '" + m + "'");
}

inline std::string to_string(Method m) { return m == Method::RK4 ? "rk4" : "euler"; }

struct SimOptions {
    double dt = 0.005;
    double t_end = 30.0;
    Method method = Method::RK4;
    double sample_interval = 0.1;
    bool record_states = true;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<Vec3>> states;
    std::vector<std::vector<Vec3>> controls;
    std::vector<double> edge_error_norm;
    std::vector<double> surface_residual_norm;
    std::vector<std::vector<double>> control_norms;
    std::vector<double> potential;  // W + barrier energy
    std::uint64_t seed = 0;
    double min_z = 0;
    // largest single-step increase of W + barrier energy over the run
    double max_potential_increase = 0;
};

namespace detail {

inline std::vector<Vec3> axpy(const std::vector<Vec3>& p, double h, const std::vector<Vec3>& k) {
    std::vector<Vec3> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] + h * k[i];
    return out;
}

inline bool finite(const std::vector<Vec3>& p) {
    for (const auto& x : p)
        if (!x.allFinite()) return false;
    return true;
}

}  // namespace detail

inline Trajectory integrate(const FormationSpec& spec, const QuadricSurface& s, const ControlGains& g,
                            const std::vector<Vec3>& p0, const SimOptions& opt = {}) {
    validate(g);
    if (!(opt.dt > 0)) throw InvalidInput("dt must be positive");
    if (p0.size() != spec.positions.size()) throw InvalidInput("initial state has the wrong number of agents");
    const long steps = std::lround(opt.t_end / opt.dt);
    const long every = std::max(1L, std::lround(opt.sample_interval / opt.dt));

    Trajectory tr;
    std::vector<Vec3> p = p0;
    double t = 0;
    auto field = [&](const std::vector<Vec3>& x) {
        try {
            return control_all(x, spec, s, g);
        } catch (const BarrierDomainError& e) {
            throw BarrierDomainError(std::string(e.what()) + " at t = " + std::to_string(t), t);
        }
    };
    auto total_potential = [&](const std::vector<Vec3>& x) { return potential(spec, s, x, g).total(); };
    auto record = [&](const std::vector<Vec3>& u) {
        tr.times.push_back(t);
        if (opt.record_states) {
            tr.states.push_back(p);
            tr.controls.push_back(u);
        }
        tr.edge_error_norm.push_back(edge_errors(spec, p).norm());
        tr.surface_residual_norm.push_back(surface_residuals(s, p).norm());
        std::vector<double> un(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) un[i] = u[i].norm();
        tr.control_norms.push_back(std::move(un));
        tr.potential.push_back(total_potential(p));
    };

    tr.min_z = std::numeric_limits<double>::infinity();
    for (const auto& x : p) tr.min_z = std::min(tr.min_z, x.z());
    double w_prev = total_potential(p);
    for (long k = 0;; ++k) {
        std::vector<Vec3> k1 = field(p);
        if (k % every == 0 || k == steps) record(k1);
        if (k == steps) break;
        const double h = opt.dt;
        if (opt.method == Method::Euler) {
            p = detail::axpy(p, h, k1);
        } else {
            std::vector<Vec3> k2 = field(detail::axpy(p, h / 2, k1));
            std::vector<Vec3> k3 = field(detail::axpy(p, h / 2, k2));
            std::vector<Vec3> k4 = field(detail::axpy(p, h, k3));
            for (std::size_t i = 0; i < p.size(); ++i) p[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        }
        t = (k + 1) * h;
        if (!detail::finite(p)) throw DivergenceError("state became non-finite at t = " + std::to_string(t), t);
        for (const auto& x : p) tr.min_z = std::min(tr.min_z, x.z());
        double w;
        try {
            w = total_potential(p);
        } catch (const BarrierDomainError& e) {
            throw BarrierDomainError(std::string(e.what()) + " at t = " + std::to_string(t), t);
        }
        tr.max_potential_increase = std::max(tr.max_potential_increase, w - w_prev);
        w_prev = w;
    }
    return tr;
}

inline std::size_t sample_index(const Trajectory& tr, double t) {
    if (tr.times.empty()) throw RangeError("empty trajectory");
    if (t > tr.times.back() + 1e-9 || t < 0) throw RangeError("time " + std::to_string(t) + " outside trajectory");
    auto it = std::lower_bound(tr.times.begin(), tr.times.end(), t - 1e-9);
    return static_cast<std::size_t>(it - tr.times.begin());
}

struct Reduction {
    double e = 1.0, fs = 1.0;
    bool zero_initial = false;
};

struct ConvergenceMetrics {
    double initial_e = 0, initial_fs = 0;
    double final_e = 0, final_fs = 0;
    const Trajectory* traj = nullptr;

    // 1 - |e(t)| / |e(0)|; an exactly converged start reports 1 with zero_initial set.
    Reduction reduction_at(double t) const {
        std::size_t k = sample_index(*traj, t);
        Reduction r;
        r.zero_initial = initial_e == 0 || initial_fs == 0;
        r.e = initial_e == 0 ? 1.0 : 1 - traj->edge_error_norm[k] / initial_e;
        r.fs = initial_fs == 0 ? 1.0 : 1 - traj->surface_residual_norm[k] / initial_fs;
        return r;
    }
    double e_at(double t) const { return traj->edge_error_norm[sample_index(*traj, t)]; }
    double fs_at(double t) const { return traj->surface_residual_norm[sample_index(*traj, t)]; }
};

inline ConvergenceMetrics convergence_metrics(const Trajectory& tr) {
    if (tr.times.empty()) throw RangeError("empty trajectory");
    return {tr.edge_error_norm.front(), tr.surface_residual_norm.front(), tr.edge_error_norm.back(),
            tr.surface_residual_norm.back(), &tr};
}

struct ICOptions {
    std::optional<double> z_upper;
    double z_floor = 0.0;  // initial heights must exceed this
    int max_attempts = 10000;
};

namespace detail {

struct Perturber {
    const FormationSpec& spec;
    const QuadricSurface& s;
    double delta;
    const ICOptions& opt;

    double residual_bound() const { return s.q1_norm() * delta; }

    std::vector<Vec3> draw(std::mt19937_64& rng, double rho) const {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const double bound = residual_bound();
        std::vector<Vec3> p(spec.positions.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            Vec3 v;
            do v = Vec3(u(rng), u(rng), u(rng));
            while (v.squaredNorm() > 1);
            Vec3 x = spec.positions[i] + rho * v;
            // move along the gradient until the residual hits a random target in [-bound, bound]
            double target = u(rng) * bound;
            for (int it = 0; it < 30; ++it) {
                Vec3 gr = surface_gradient(s, x);
                double g2 = gr.squaredNorm();
                if (g2 == 0) break;
                double f = surface_residual(s, x) - target;
                x -= f / g2 * gr;
                if (std::abs(f) < 1e-14) break;
            }
            if (x.z() <= opt.z_floor) x.z() = 2 * opt.z_floor - x.z();
            if (opt.z_upper && x.z() >= *opt.z_upper) x.z() = 2 * *opt.z_upper - x.z();
            p[i] = x;
        }
        return p;
    }

    bool feasible(const std::vector<Vec3>& p) const {
        for (const auto& e : spec.edges)
            if (std::abs((p[e.i] - p[e.j]).norm() - e.target) > delta) return false;
        const double bound = residual_bound() * (1 + 1e-12);
        for (const auto& x : p) {
            if (std::abs(surface_residual(s, x)) > bound) return false;
            if (!(x.z() > opt.z_floor) || !(x.z() > 0)) return false;
            if (opt.z_upper && !(x.z() < *opt.z_upper)) return false;
        }
        return true;
    }
};

}  // namespace detail

// Bisects the perturbation radius for the largest value at which a quarter of
// probe draws are feasible, then rejection-samples at that radius.
inline std::vector<Vec3> random_initial_conditions(const FormationSpec& spec, const QuadricSurface& s, double delta,
                                                   std::uint64_t seed, const ICOptions& opt = {}) {
    if (!(delta > 0)) throw InvalidInput("delta must be positive");
    detail::Perturber pert{spec, s, delta, opt};
    std::mt19937_64 probe_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    constexpr int probes = 16;
    auto rate = [&](double rho) {
        int ok = 0;
        for (int k = 0; k < probes; ++k) ok += pert.feasible(pert.draw(probe_rng, rho));
        return ok;
    };
    double lo = 0, hi = delta;
    for (int it = 0; it < 12; ++it) {
        double mid = 0.5 * (lo + hi);
        if (rate(mid) >= probes / 4) lo = mid;
        else hi = mid;
    }
    std::mt19937_64 rng(seed);
    for (int a = 0; a < opt.max_attempts; ++a) {
        auto p = pert.draw(rng, lo);
        if (pert.feasible(p)) return p;
    }
    throw SamplingError("no feasible initial condition for delta = " + std::to_string(delta));
}

struct StatRow {
    double delta = 0, t = 0;
    double mean_e = 0, sd_e = 0, mean_fs = 0, sd_fs = 0;
    int runs = 0;
};

struct StudyResult {
    std::vector<StatRow> rows;
    std::vector<std::string> errors;
    std::vector<double> max_potential_increase;  // per successful run, relative to W(0)
};

struct StudyConfig {
    std::vector<double> deltas;
    int runs_per_delta = 5;
    std::vector<double> sample_times;
    std::uint64_t base_seed = 1;
    SimOptions sim;
    ICOptions ic;
    int threads = 1;
};

inline std::uint64_t run_seed(std::uint64_t base, std::size_t delta_index, int run) {
    return base + 1000 * static_cast<std::uint64_t>(delta_index) + static_cast<std::uint64_t>(run);
}

inline StudyResult statistical_study(const FormationSpec& spec, const QuadricSurface& s, const ControlGains& g,
                                     const StudyConfig& cfg) {
    if (cfg.runs_per_delta < 2) throw InvalidInput("runs_per_delta must be at least 2 (sd is undefined otherwise)");
    std::vector<double> times{0.0};
    for (double t : cfg.sample_times)
        if (t > 0) times.push_back(t);
    double t_end = *std::max_element(times.begin(), times.end());

    struct RunOut {
        std::vector<double> e, fs;
        double rel_increase = 0;
        std::string error;
    };
    auto one = [&](std::size_t di, int r) {
        RunOut out;
        try {
            auto p0 = random_initial_conditions(spec, s, cfg.deltas[di], run_seed(cfg.base_seed, di, r), cfg.ic);
            SimOptions so = cfg.sim;
            so.t_end = t_end;
            so.record_states = false;
            auto tr = integrate(spec, s, g, p0, so);
            auto m = convergence_metrics(tr);
            for (double t : times) {
                out.e.push_back(m.e_at(t));
                out.fs.push_back(m.fs_at(t));
            }
            out.rel_increase = tr.potential.front() > 0 ? tr.max_potential_increase / tr.potential.front() : 0;
        } catch (const Error& e) {
            out.error = "delta=" + std::to_string(cfg.deltas[di]) + " run=" + std::to_string(r) + ": " + e.what();
        }
        return out;
    };

    std::vector<RunOut> outs;
    if (cfg.threads > 1) {
        std::vector<std::future<RunOut>> fut;
        for (std::size_t di = 0; di < cfg.deltas.size(); ++di)
            for (int r = 0; r < cfg.runs_per_delta; ++r) fut.push_back(std::async(std::launch::async, one, di, r));
        for (auto& f : fut) outs.push_back(f.get());
    } else {
        for (std::size_t di = 0; di < cfg.deltas.size(); ++di)
            for (int r = 0; r < cfg.runs_per_delta; ++r) outs.push_back(one(di, r));
    }

    StudyResult res;
    auto mean_sd = [](const std::vector<double>& v) {
        double m = 0;
        for (double x : v) m += x;
        m /= v.size();
        double ss = 0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0};
    };
    for (std::size_t di = 0; di < cfg.deltas.size(); ++di) {
        std::vector<const RunOut*> good;
        for (int r = 0; r < cfg.runs_per_delta; ++r) {
            const auto& o = outs[di * cfg.runs_per_delta + r];
            if (o.error.empty()) {
                good.push_back(&o);
                res.max_potential_increase.push_back(o.rel_increase);
            } else {
                res.errors.push_back(o.error);
            }
        }
        if (good.size() < 2) continue;
        for (std::size_t k = 0; k < times.size(); ++k) {
            std::vector<double> e, fs;
            for (auto* o : good) {
                e.push_back(o->e[k]);
                fs.push_back(o->fs[k]);
            }
            auto [me, se] = mean_sd(e);
            auto [mf, sf] = mean_sd(fs);
            res.rows.push_back({cfg.deltas[di], times[k], me, se, mf, sf, static_cast<int>(good.size())});
        }
    }
    return res;
}

}  // namespace shield
