#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/trapezoidal.hpp>

#include "errors.hpp"

namespace shield {

using Vec3 = Eigen::Vector3d;

enum class SurfaceKind { SemiEllipsoid, SemiSphere, Cylinder, Cone };

inline std::string to_string(SurfaceKind k) {
    switch (k) {
        case SurfaceKind::SemiEllipsoid: return "semi_ellipsoid";
        case SurfaceKind::SemiSphere: return "semi_sphere";
        case SurfaceKind::Cylinder: return "cylinder";
        case SurfaceKind::Cone: return "cone";
    }
    return "unknown";
}

inline SurfaceKind surface_kind_from_string(const std::string& s) {
    if (s == "semi_ellipsoid") return SurfaceKind::SemiEllipsoid;
    if (s == "semi_sphere") return SurfaceKind::SemiSphere;
    if (s == "cylinder") return SurfaceKind::Cylinder;
    if (s == "cone") return SurfaceKind::Cone;
    throw InvalidInput("unknown surface kind '" + s + "'");
}

// f(p) = (p - center)^T Q1 (p - center) + Q2 with Q1 = diag(q1, q2, q3).
// Heights z_min/z_max are measured in the surface frame (relative to center).
struct QuadricSurface {
    SurfaceKind kind = SurfaceKind::SemiSphere;
    double q1 = 1.0, q2 = 1.0, q3 = 1.0;
    double Q2 = -1.0;
    double z_min = 0.0, z_max = 1.0;
    Vec3 center = Vec3::Zero();

    Eigen::Matrix3d Q1() const { return Eigen::Vector3d(q1, q2, q3).asDiagonal(); }
    double q1_norm() const { return std::max({std::abs(q1), std::abs(q2), std::abs(q3)}); }
    bool closed_top() const {
        return kind == SurfaceKind::SemiEllipsoid || kind == SurfaceKind::SemiSphere;
    }
};

inline void validate(const QuadricSurface& s) {
    if (!(s.z_min < s.z_max)) throw InvalidInput("surface requires z_min < z_max");
    if (s.q1 <= 0 || s.q2 <= 0) throw InvalidInput("surface requires q1, q2 > 0");
    if (s.kind == SurfaceKind::Cone) {
        if (s.q3 >= 0) throw InvalidInput("cone requires q3 < 0");
    } else if (s.kind == SurfaceKind::Cylinder) {
        if (s.q3 != 0) throw InvalidInput("cylinder requires q3 = 0");
    } else if (s.q3 <= 0) {
        throw InvalidInput("ellipsoidal surfaces require q3 > 0");
    }
    if (s.Q2 != -1.0) throw InvalidInput("surface must be in normal form (Q2 = -1)");
}

inline QuadricSurface semi_ellipsoid(double a, double b, double c, Vec3 center = Vec3::Zero()) {
    if (a <= 0 || b <= 0 || c <= 0) throw InvalidInput("ellipsoid semi-axes must be positive");
    return {SurfaceKind::SemiEllipsoid, 1 / (a * a), 1 / (b * b), 1 / (c * c), -1.0, 0.0, c, center};
}

inline QuadricSurface semi_sphere(double r, Vec3 center = Vec3::Zero()) {
    if (r <= 0) throw InvalidInput("sphere radius must be positive");
    double q = 1 / (r * r);
    return {SurfaceKind::SemiSphere, q, q, q, -1.0, 0.0, r, center};
}

inline QuadricSurface cylinder(double a, double height, Vec3 center = Vec3::Zero()) {
    if (a <= 0 || height <= 0) throw InvalidInput("cylinder radius and height must be positive");
    double q = 1 / (a * a);
    return {SurfaceKind::Cylinder, q, q, 0.0, -1.0, 0.0, height, center};
}

inline QuadricSurface cone(double a, double c, Vec3 center = Vec3::Zero()) {
    if (a <= 0 || c <= 0) throw InvalidInput("cone parameters must be positive");
    double q = 1 / (a * a);
    return {SurfaceKind::Cone, q, q, -1 / (c * c), -1.0, 0.0, c, center};
}

inline double surface_residual(const QuadricSurface& s, const Vec3& p) {
    Vec3 x = p - s.center;
    return s.q1 * x.x() * x.x() + s.q2 * x.y() * x.y() + s.q3 * x.z() * x.z() + s.Q2;
}

inline Vec3 surface_gradient(const QuadricSurface& s, const Vec3& p) {
    Vec3 x = p - s.center;
    return {2 * s.q1 * x.x(), 2 * s.q2 * x.y(), 2 * s.q3 * x.z()};
}

// Ramanujan's second approximation.
inline double ellipse_perimeter(double a, double b) {
    if (a <= 0 && b <= 0) return 0.0;
    double h = (a - b) / (a + b);
    h *= h;
    return std::numbers::pi * (a + b) * (1 + 3 * h / (10 + std::sqrt(4 - 3 * h)));
}

// Semi-axes of the section curve at local height h.
inline std::pair<double, double> section_axes(const QuadricSurface& s, double h) {
    double r2 = std::max(0.0, 1 - s.q3 * h * h);
    return {std::sqrt(r2 / s.q1), std::sqrt(r2 / s.q2)};
}

inline double h_max(const QuadricSurface& s) { return s.z_max; }

inline void check_height(const QuadricSurface& s, double h) {
    double tol = 1e-12 * std::max(1.0, std::abs(s.z_max));
    if (!(h >= s.z_min - tol && h <= s.z_max + tol))
        throw RangeError("height " + std::to_string(h) + " outside surface range");
}

inline double section_perimeter(const QuadricSurface& s, double h) {
    check_height(s, h);
    auto [a, b] = section_axes(s, h);
    return ellipse_perimeter(a, b);
}

inline double boundary_length(const QuadricSurface& s) { return section_perimeter(s, s.z_min); }

namespace detail {

// Lateral area between local heights h0 < h1 from the parametrisation
// x = A(z) cos t, y = B(z) sin t, z.
inline double lateral_area(const QuadricSurface& s, double h0, double h1) {
    if (h1 <= h0) return 0.0;
    const double alpha = 1 / std::sqrt(s.q1), beta = 1 / std::sqrt(s.q2);
    const double k = alpha * beta * s.q3;
    auto ring = [&](double z) {
        double r2 = std::max(0.0, 1 - s.q3 * z * z);
        double kz2 = k * k * z * z;
        auto f = [&](double t) {
            double c = std::cos(t), sn = std::sin(t);
            return std::sqrt(r2 * (beta * beta * c * c + alpha * alpha * sn * sn) + kz2);
        };
        return boost::math::quadrature::trapezoidal(f, 0.0, 2 * std::numbers::pi, 1e-12);
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(ring, h0, h1, 15, 1e-10);
}

}  // namespace detail

inline double area_above(const QuadricSurface& s, double h) {
    check_height(s, h);
    h = std::clamp(h, s.z_min, s.z_max);
    const double pi = std::numbers::pi;
    switch (s.kind) {
        case SurfaceKind::SemiSphere: {
            double r = 1 / std::sqrt(s.q1);
            return 2 * pi * r * (s.z_max - h);
        }
        case SurfaceKind::Cylinder: {
            auto [a, b] = section_axes(s, h);
            return ellipse_perimeter(a, b) * (s.z_max - h);
        }
        default:
            return detail::lateral_area(s, h, s.z_max);
    }
}

inline double total_area(const QuadricSurface& s) { return area_above(s, s.z_min); }

// Point on the section at local height h, parameter angle t, in world coordinates.
inline Vec3 section_point(const QuadricSurface& s, double h, double t) {
    auto [a, b] = section_axes(s, h);
    return s.center + Vec3(a * std::cos(t), b * std::sin(t), h);
}

}  // namespace shield
