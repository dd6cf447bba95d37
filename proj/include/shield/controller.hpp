#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "quadric.hpp"
#include "shield_builder.hpp"

namespace shield {

struct ControlGains {
    double kappa1 = 0.1;
    double kappa2 = 1e3;
    double kappa3 = 1e-3;
    double barrier_eps = 0.05;
    std::optional<double> z_upper;
};

inline void validate(const ControlGains& g) {
    if (!(g.kappa1 > 0 && g.kappa2 > 0)) throw InvalidInput("kappa1 and kappa2 must be positive");
    if (!(g.kappa3 >= 0)) throw InvalidInput("kappa3 must be non-negative");
    if (!(g.barrier_eps > 0)) throw InvalidInput("barrier_eps must be positive");
}

inline ControlGains default_gains(const QuadricSurface& s) {
    ControlGains g;
    g.barrier_eps = 0.05 * h_max(s);
    return g;
}

// e_k = |p_i - p_j|^2 - d*_k^2
inline Eigen::VectorXd edge_errors(const FormationSpec& spec, const std::vector<Vec3>& p) {
    Eigen::VectorXd e(spec.edges.size());
    for (std::size_t k = 0; k < spec.edges.size(); ++k) {
        const auto& ed = spec.edges[k];
        e(k) = (p[ed.i] - p[ed.j]).squaredNorm() - ed.target * ed.target;
    }
    return e;
}

inline Eigen::VectorXd surface_residuals(const QuadricSurface& s, const std::vector<Vec3>& p) {
    Eigen::VectorXd f(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) f(i) = surface_residual(s, p[i]);
    return f;
}

namespace detail {

inline void check_barrier_domain(double z, const ControlGains& g) {
    if (g.kappa3 <= 0) return;
    if (!(z > 0)) throw BarrierDomainError("agent left the half-space z > 0 (z = " + std::to_string(z) + ")", 0);
    if (g.z_upper && !(z < *g.z_upper))
        throw BarrierDomainError("agent crossed the upper cap (z = " + std::to_string(z) + ")", 0);
}

inline double barrier_energy(double dist, const ControlGains& g) {
    if (dist > g.barrier_eps) return 0;
    double t = 1 / dist - 1 / g.barrier_eps;
    return 0.5 * g.kappa3 * t * t;
}

inline double barrier_force(double dist, const ControlGains& g) {
    if (dist > g.barrier_eps) return 0;
    return g.kappa3 * (1 / dist - 1 / g.barrier_eps) / (dist * dist);
}

}  // namespace detail

inline double barrier_potential(double p_z, const ControlGains& g) {
    if (g.kappa3 <= 0) return 0;
    detail::check_barrier_domain(p_z, g);
    double u = detail::barrier_energy(p_z, g);
    if (g.z_upper) u += detail::barrier_energy(*g.z_upper - p_z, g);
    return u;
}

// z-component of the barrier control; pushes up near z = 0 and down near z_upper.
inline double repulsive_term(double p_z, const ControlGains& g) {
    if (g.kappa3 <= 0) return 0;
    detail::check_barrier_domain(p_z, g);
    double u = detail::barrier_force(p_z, g);
    if (g.z_upper) u -= detail::barrier_force(*g.z_upper - p_z, g);
    return u;
}

struct Potential {
    double W = 0, W1 = 0, W2 = 0, Ur_total = 0;
    double total() const { return W + Ur_total; }
};

inline Potential potential(const FormationSpec& spec, const QuadricSurface& s, const std::vector<Vec3>& p,
                           const ControlGains& g) {
    Potential out;
    Eigen::VectorXd e = edge_errors(spec, p), f = surface_residuals(s, p);
    out.W1 = 0.25 * g.kappa1 * e.squaredNorm();
    out.W2 = 0.25 * g.kappa2 * f.squaredNorm();
    out.W = out.W1 + out.W2;
    for (const auto& x : p) out.Ur_total += barrier_potential(x.z(), g);
    return out;
}

// Uses only p_i, its neighbours' relative positions, their targets and f_S(p_i).
inline Vec3 control_input(int i, const std::vector<Vec3>& p, const FormationSpec& spec, const QuadricSurface& s,
                          const ControlGains& g) {
    Vec3 u = Vec3::Zero();
    for (const auto& ed : spec.edges) {
        if (ed.i != i && ed.j != i) continue;
        int j = ed.i == i ? ed.j : ed.i;
        Vec3 z = p[i] - p[j];
        u -= g.kappa1 * (z.squaredNorm() - ed.target * ed.target) * z;
    }
    u -= 0.5 * g.kappa2 * surface_residual(s, p[i]) * surface_gradient(s, p[i]);
    u.z() += repulsive_term(p[i].z(), g);
    return u;
}

inline std::vector<Vec3> control_all(const std::vector<Vec3>& p, const FormationSpec& spec, const QuadricSurface& s,
                                     const ControlGains& g) {
    std::vector<Vec3> u(p.size(), Vec3::Zero());
    for (const auto& ed : spec.edges) {
        Vec3 z = p[ed.i] - p[ed.j];
        Vec3 f = g.kappa1 * (z.squaredNorm() - ed.target * ed.target) * z;
        u[ed.i] -= f;
        u[ed.j] += f;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        u[i] -= 0.5 * g.kappa2 * surface_residual(s, p[i]) * surface_gradient(s, p[i]);
        u[i].z() += repulsive_term(p[i].z(), g);
    }
    return u;
}

inline double average_degree(const FormationSpec& spec) {
    return spec.positions.empty() ? 0.0 : 2.0 * spec.edges.size() / spec.positions.size();
}

inline double suggest_kappa2(const FormationSpec& spec, const QuadricSurface& s, const ControlGains& g) {
    return average_degree(spec) * spec.d_global * spec.d_global / s.q1_norm() * g.kappa1;
}

}  // namespace shield
