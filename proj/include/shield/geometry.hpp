#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "quadric.hpp"

namespace shield {

struct TrianglePlane {
    double a = 0, b = 0, c = 0, d = 0;
    double o_det = 0;
    Vec3 normal() const { return {a, b, c}; }
};

struct Circumcircle {
    Vec3 m = Vec3::Zero();
    double gamma = 0;
    double r = 0;
};

enum class CapSide { Inside, OnBoundary, Outside };

inline const char* to_string(CapSide s) {
    switch (s) {
        case CapSide::Inside: return "inside";
        case CapSide::OnBoundary: return "on_boundary";
        case CapSide::Outside: return "outside";
    }
    return "?";
}

// Determinant of the matrix with columns pA, pB, pC.
inline double orientation_det(const Vec3& pA, const Vec3& pB, const Vec3& pC) {
    Eigen::Matrix3d O;
    O << pA, pB, pC;
    return O.determinant();
}

inline TrianglePlane triangle_plane(const Vec3& pA, const Vec3& pB, const Vec3& pC) {
    Vec3 v = (pB - pA).cross(pC - pA);
    TrianglePlane pl;
    pl.a = v.x();
    pl.b = v.y();
    pl.c = v.z();
    pl.o_det = orientation_det(pA, pB, pC);
    pl.d = -pl.o_det;
    return pl;
}

namespace detail {

inline void require_nondegenerate(const Vec3& pA, const Vec3& pB, const Vec3& pC, const Vec3& v) {
    double scale = (pB - pA).norm() * (pC - pA).norm();
    if (!(v.norm() > 1e-12 * scale))
        throw DegeneracyError("degenerate triangle: vertices are (nearly) collinear");
}

// Rows are pA, pB, pC (with a trailing 1) followed by the plane normal.
inline Eigen::Matrix4d lambda_matrix(const Vec3& pA, const Vec3& pB, const Vec3& pC, const Vec3& v) {
    Eigen::Matrix4d L;
    L << pA.transpose(), 1.0,
         pB.transpose(), 1.0,
         pC.transpose(), 1.0,
         v.transpose(), 0.0;
    return L;
}

}  // namespace detail

inline double lambda_det(const Vec3& pA, const Vec3& pB, const Vec3& pC) {
    Vec3 v = (pB - pA).cross(pC - pA);
    return detail::lambda_matrix(pA, pB, pC, v).determinant();
}

inline Circumcircle circumcenter(const Vec3& pA, const Vec3& pB, const Vec3& pC) {
    TrianglePlane pl = triangle_plane(pA, pB, pC);
    Vec3 v = pl.normal();
    detail::require_nondegenerate(pA, pB, pC, v);
    Eigen::Matrix4d L = detail::lambda_matrix(pA, pB, pC, v);
    Eigen::Vector4d rhs(pA.squaredNorm(), pB.squaredNorm(), pC.squaredNorm(), 2 * pl.o_det);
    Eigen::Vector4d x = L.partialPivLu().solve(0.5 * rhs);
    Circumcircle cc;
    cc.m = x.head<3>();
    cc.gamma = x(3);
    cc.r = std::sqrt(std::max(0.0, 2 * cc.gamma + cc.m.squaredNorm()));
    return cc;
}

inline double cap_determinant(const Vec3& pA, const Vec3& pB, const Vec3& pC, const Vec3& pD) {
    TrianglePlane pl = triangle_plane(pA, pB, pC);
    Vec3 v = pl.normal();
    detail::require_nondegenerate(pA, pB, pC, v);
    Eigen::Matrix<double, 5, 5> M;
    M << pA.transpose(), 1.0, pA.squaredNorm(),
         pB.transpose(), 1.0, pB.squaredNorm(),
         pC.transpose(), 1.0, pC.squaredNorm(),
         v.transpose(), 0.0, 2 * pl.o_det,
         pD.transpose(), 1.0, pD.squaredNorm();
    return M.partialPivLu().determinant();
}

inline CapSide in_cap_test(const Vec3& pA, const Vec3& pB, const Vec3& pC, const Vec3& pD) {
    double det = cap_determinant(pA, pB, pC, pD);
    double scale = std::max({pA.cwiseAbs().maxCoeff(), pB.cwiseAbs().maxCoeff(),
                             pC.cwiseAbs().maxCoeff(), pD.cwiseAbs().maxCoeff()});
    double tol = 1e-9 * std::pow(scale, 6);
    if (det > tol) return CapSide::Inside;
    if (det < -tol) return CapSide::Outside;
    return CapSide::OnBoundary;
}

// Same test in a frame whose origin sits one triangle-size off the plane,
// which keeps |O_ABC| well away from zero.
inline CapSide in_cap_test_local(const Vec3& pA, const Vec3& pB, const Vec3& pC, const Vec3& pD) {
    Vec3 v = (pB - pA).cross(pC - pA);
    detail::require_nondegenerate(pA, pB, pC, v);
    double size = std::max({(pB - pA).norm(), (pC - pA).norm(), (pC - pB).norm()});
    Vec3 origin = (pA + pB + pC) / 3.0 - v.normalized() * size;
    return in_cap_test(pA - origin, pB - origin, pC - origin, pD - origin);
}

using Triangle = std::array<int, 3>;

struct DelaunayViolation {
    Triangle triangle;
    int node;
};

struct DelaunayReport {
    std::vector<Triangle> triangles;
    std::vector<DelaunayViolation> violations;
};

inline std::vector<std::vector<int>> adjacency_lists(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> adj(n);
    for (auto [i, j] : edges) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    for (auto& a : adj) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    return adj;
}

// All 3-cliques (i < j < k) of the graph.
inline std::vector<Triangle> enumerate_faces(int n, const std::vector<std::pair<int, int>>& edges) {
    auto adj = adjacency_lists(n, edges);
    std::vector<Triangle> tris;
    for (int i = 0; i < n; ++i)
        for (int j : adj[i]) {
            if (j <= i) continue;
            for (int k : adj[j]) {
                if (k <= j) continue;
                if (std::binary_search(adj[i].begin(), adj[i].end(), k)) tris.push_back({i, j, k});
            }
        }
    return tris;
}

enum class CheckScope { Global, Local };

// Local scope only tests nodes within graph distance 2 of a face vertex.
inline DelaunayReport check_delaunay(const std::vector<Vec3>& pos,
                                     const std::vector<std::pair<int, int>>& edges,
                                     CheckScope scope = CheckScope::Global) {
    const int n = static_cast<int>(pos.size());
    DelaunayReport rep;
    rep.triangles = enumerate_faces(n, edges);
    auto adj = adjacency_lists(n, edges);
    for (const auto& t : rep.triangles) {
        std::vector<int> cand;
        if (scope == CheckScope::Global) {
            cand.resize(n);
            for (int i = 0; i < n; ++i) cand[i] = i;
        } else {
            std::set<int> near;
            for (int v : t)
                for (int u : adj[v]) {
                    near.insert(u);
                    for (int w : adj[u]) near.insert(w);
                }
            cand.assign(near.begin(), near.end());
        }
        for (int x : cand) {
            if (x == t[0] || x == t[1] || x == t[2]) continue;
            if (in_cap_test_local(pos[t[0]], pos[t[1]], pos[t[2]], pos[x]) == CapSide::Inside)
                rep.violations.push_back({t, x});
        }
    }
    return rep;
}

}  // namespace shield
