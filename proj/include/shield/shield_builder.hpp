#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "errors.hpp"
#include "geometry.hpp"
#include "quadric.hpp"

namespace shield {

inline constexpr double kTriangleFactor = 0.4330127018922193;  // sqrt(3)/4

struct RingSpec {
    double h = 0;
    int n = 0;
    double d = 0;
};

struct Edge {
    int i = 0, j = 0;
    double target = 0;
};

struct FormationSpec {
    std::vector<Vec3> positions;
    std::vector<Edge> edges;
    std::vector<RingSpec> rings;
    double d_global = 0;

    int size() const { return static_cast<int>(positions.size()); }
    std::vector<std::pair<int, int>> edge_pairs() const {
        std::vector<std::pair<int, int>> out;
        out.reserve(edges.size());
        for (const auto& e : edges) out.emplace_back(e.i, e.j);
        return out;
    }
};

inline double max_interdistance(int n, double area, double boundary) {
    if (n < 4) throw InvalidInput("at least 4 agents are required, got " + std::to_string(n));
    double m = n - 1;
    return (boundary + std::sqrt(boundary * boundary + 32 / std::sqrt(3.0) * area * m)) / (4 * m);
}

inline int boundary_count(double boundary, double d) {
    if (!(boundary > 0 && d > 0)) throw InvalidInput("boundary length and spacing must be positive");
    return static_cast<int>(std::ceil(boundary / d * (1 - 1e-12)));
}

inline int triangle_count_estimate(int n, int eb) { return 2 * n - 2 - eb; }

inline double area_estimate(int f, double d) { return f * kTriangleFactor * d * d; }

// Thomsen's approximation of half the surface of an ellipsoid with semi-axes a, b, c.
inline double half_ellipsoid_area(double a, double b, double c) {
    constexpr double p = 1.6075;
    double s = (std::pow(a * b, p) + std::pow(a * c, p) + std::pow(b * c, p)) / 3;
    return 2 * std::numbers::pi * std::pow(s, 1 / p);
}

// Area still to be covered above height h. Closed-top surfaces use the
// half-ellipsoid fitted to the section at h and the apex; open surfaces use
// the exact lateral area.
inline double remaining_area(const QuadricSurface& s, double h) {
    check_height(s, h);
    if (!s.closed_top()) return area_above(s, h);
    auto [a, b] = section_axes(s, h);
    return half_ellipsoid_area(a, b, std::max(0.0, s.z_max - h));
}

inline double shield_area(const QuadricSurface& s) { return remaining_area(s, s.z_min); }

inline double solve_ring_height(const QuadricSurface& s, int nk, double d, double h_lower) {
    if (nk < 1) throw InvalidInput("ring solve requires at least one remaining agent");
    auto g = [&](double h) {
        double l = section_perimeter(s, h);
        return remaining_area(s, h) - (2.0 * nk - 2 - l / d) * kTriangleFactor * d * d;
    };
    double lo = h_lower + 1e-9, hi = s.z_max;
    if (lo >= hi) return std::numeric_limits<double>::infinity();
    double glo = g(lo), ghi = g(hi);
    if (ghi > 0) return std::numeric_limits<double>::infinity();
    if (glo <= 0) return lo;
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-10; };
    auto [a, b] = boost::math::tools::bisect(g, lo, hi, tol, iters);
    if (!tol(a, b)) throw NumericError("ring height bisection did not converge");
    return 0.5 * (a + b);
}

inline std::vector<RingSpec> build_shield(const QuadricSurface& s, int n) {
    validate(s);
    const double lb = boundary_length(s);
    const double d = max_interdistance(n, shield_area(s), lb);
    std::vector<RingSpec> rings;
    int nb = std::min(boundary_count(lb, d), n);
    rings.push_back({s.z_min, nb, lb / nb});
    int nk = n - nb;
    double h = s.z_min;
    while (nk > 0) {
        double hk = solve_ring_height(s, nk, d, h);
        if (!(hk <= s.z_max)) {
            // no admissible height left: the last ring absorbs the remaining agents
            RingSpec& last = rings.back();
            last.n += nk;
            last.d = section_perimeter(s, last.h) / last.n;
            break;
        }
        double l = section_perimeter(s, hk);
        int cnt = std::min(std::max(1, static_cast<int>(std::ceil(l / d * (1 - 1e-12)))), nk);
        rings.push_back({hk, cnt, l / cnt});
        nk -= cnt;
        h = hk;
    }
    return rings;
}

namespace detail {

// Parameter angles of n points spaced equally in arc length on the ellipse
// (a cos t, b sin t), the first at arc fraction phase / n.
inline std::vector<double> arc_angles(double a, double b, int n, double phase) {
    const double two_pi = 2 * std::numbers::pi;
    std::vector<double> out(n);
    if (std::abs(a - b) <= 1e-14 * std::max(a, b)) {
        for (int j = 0; j < n; ++j) out[j] = two_pi * std::fmod(j + phase, n) / n;
        return out;
    }
    auto speed = [&](double t) { return std::hypot(a * std::sin(t), b * std::cos(t)); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    auto arc = [&](double t) { return t <= 0 ? 0.0 : GK::integrate(speed, 0.0, t, 10, 1e-13); };
    const double total = arc(two_pi);
    for (int j = 0; j < n; ++j) {
        double target = total * std::fmod(j + phase, n) / n;
        double t = two_pi * target / total;
        for (int it = 0; it < 50; ++it) {
            double step = (arc(t) - target) / speed(t);
            t -= step;
            if (std::abs(step) < 1e-14) break;
        }
        out[j] = t;
    }
    return out;
}

}  // namespace detail

// Ring k is staggered by k half-steps. base_height raises the lowest ring
// (kept on the surface) so it can clear the ground barrier.
inline std::vector<Vec3> place_nodes(const QuadricSurface& s, const std::vector<RingSpec>& rings,
                                     double base_height = 0.0) {
    std::vector<Vec3> pos;
    for (std::size_t k = 0; k < rings.size(); ++k) {
        double h = rings[k].h;
        if (k == 0) h = std::max(h, base_height);
        auto [a, b] = section_axes(s, h);
        int n = rings[k].n;
        if (a <= 1e-12 * s.z_max && b <= 1e-12 * s.z_max) {
            for (int j = 0; j < n; ++j) pos.push_back(s.center + Vec3(0, 0, h));
            continue;
        }
        for (double t : detail::arc_angles(a, b, n, 0.5 * static_cast<double>(k)))
            pos.push_back(section_point(s, h, t));
    }
    return pos;
}

namespace detail {

inline double orient2d(const Vec3& a, const Vec3& b, const Vec3& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// Strict crossing of the z = 0 projections; a shared endpoint never counts.
inline bool crosses(const std::vector<Vec3>& p, int i, int j, int k, int l) {
    if (i == k || i == l || j == k || j == l) return false;
    double o1 = orient2d(p[i], p[j], p[k]), o2 = orient2d(p[i], p[j], p[l]);
    double o3 = orient2d(p[k], p[l], p[i]), o4 = orient2d(p[k], p[l], p[j]);
    return o1 * o2 < 0 && o3 * o4 < 0;
}

inline std::pair<int, int> key(int i, int j) { return {std::min(i, j), std::max(i, j)}; }

inline bool connected(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n == 0) return true;
    auto adj = adjacency_lists(n, edges);
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        int x = stack.back();
        stack.pop_back();
        for (int y : adj[x])
            if (!seen[y]) {
                seen[y] = 1;
                ++count;
                stack.push_back(y);
            }
    }
    return count == n;
}

// Lawson flips on the non-fixed edges until every quad passes the cap test.
inline void flip_edges(const std::vector<Vec3>& p, std::set<std::pair<int, int>>& edges,
                       const std::set<std::pair<int, int>>& fixed) {
    const int n = static_cast<int>(p.size());
    for (int round = 0; round < 100000; ++round) {
        std::vector<std::set<int>> adj(n);
        for (auto [i, j] : edges) {
            adj[i].insert(j);
            adj[j].insert(i);
        }
        bool changed = false;
        for (auto [i, j] : edges) {
            if (fixed.count({i, j})) continue;
            Vec3 mid = 0.5 * (p[i] + p[j]);
            int left = -1, right = -1;
            double dl = 0, dr = 0;
            for (int k : adj[i]) {
                if (!adj[j].count(k)) continue;
                double o = orient2d(p[i], p[j], p[k]);
                double dist = (p[k] - mid).norm();
                if (o > 0 && (left < 0 || dist < dl)) left = k, dl = dist;
                if (o < 0 && (right < 0 || dist < dr)) right = k, dr = dist;
            }
            if (left < 0 || right < 0) continue;
            if (edges.count(key(left, right))) continue;
            if (!crosses(p, left, right, i, j)) continue;
            if (in_cap_test_local(p[i], p[j], p[left], p[right]) == CapSide::Inside ||
                in_cap_test_local(p[i], p[j], p[right], p[left]) == CapSide::Inside) {
                edges.erase({i, j});
                edges.insert(key(left, right));
                changed = true;
                break;
            }
        }
        if (!changed) return;
    }
    throw ConstructionError("edge flipping did not terminate");
}

}  // namespace detail

struct EdgeOptions {
    bool cap_top = true;            // triangulate the top ring polygon
    bool flip = true;               // restore the empty-circle property after greedy linking
    bool reverse_candidates = false;
};

inline std::vector<Edge> generate_edges(const std::vector<Vec3>& pos, const std::vector<RingSpec>& rings,
                                        double d, std::optional<double> edge_slack = std::nullopt,
                                        const EdgeOptions& opt = {}) {
    using detail::key;
    const double slack = edge_slack.value_or((std::sqrt(2.0) - 1) * d);
    std::vector<std::vector<int>> ring_idx;
    int next = 0;
    for (const auto& r : rings) {
        std::vector<int> idx(r.n);
        for (int j = 0; j < r.n; ++j) idx[j] = next++;
        ring_idx.push_back(std::move(idx));
    }
    if (next != static_cast<int>(pos.size()))
        throw InvalidInput("ring counts do not match the number of positions");

    std::vector<std::vector<std::pair<int, int>>> ring_edges(ring_idx.size());
    std::set<std::pair<int, int>> edges, fixed;
    for (std::size_t k = 0; k < ring_idx.size(); ++k) {
        const auto& idx = ring_idx[k];
        int n = static_cast<int>(idx.size());
        if (n < 2) continue;
        for (int j = 0; j < (n == 2 ? 1 : n); ++j) {
            auto e = key(idx[j], idx[(j + 1) % n]);
            ring_edges[k].push_back(e);
            edges.insert(e);
            fixed.insert(e);
        }
    }

    auto greedy = [&](std::vector<std::tuple<double, int, int>>& cand, std::vector<std::pair<int, int>> accepted) {
        // near-equal lengths ordered by index
        const double q = 1e-9 * d;
        std::sort(cand.begin(), cand.end(), [q](const auto& x, const auto& y) {
            auto kx = std::llround(std::get<0>(x) / q), ky = std::llround(std::get<0>(y) / q);
            return std::tie(kx, std::get<1>(x), std::get<2>(x)) < std::tie(ky, std::get<1>(y), std::get<2>(y));
        });
        for (auto [dij, i, j] : cand) {
            bool blocked = false;
            for (auto [x, y] : accepted)
                if (detail::crosses(pos, i, j, x, y)) {
                    blocked = true;
                    break;
                }
            if (blocked) continue;
            accepted.emplace_back(i, j);
            edges.insert(key(i, j));
        }
    };

    for (std::size_t k = 0; k + 1 < ring_idx.size(); ++k) {
        std::vector<std::tuple<double, int, int>> cand;
        for (int i : ring_idx[k])
            for (int j : ring_idx[k + 1]) {
                double dij = (pos[i] - pos[j]).norm();
                if (dij <= d + slack) cand.emplace_back(dij, i, j);
            }
        if (opt.reverse_candidates) std::reverse(cand.begin(), cand.end());
        std::vector<std::pair<int, int>> accepted = ring_edges[k];
        accepted.insert(accepted.end(), ring_edges[k + 1].begin(), ring_edges[k + 1].end());
        greedy(cand, accepted);
    }

    if (opt.cap_top && !ring_idx.empty() && ring_idx.back().size() >= 4) {
        const auto& top = ring_idx.back();
        std::vector<std::tuple<double, int, int>> cand;
        for (std::size_t a = 0; a < top.size(); ++a)
            for (std::size_t b = a + 1; b < top.size(); ++b)
                if (!edges.count(key(top[a], top[b])))
                    cand.emplace_back((pos[top[a]] - pos[top[b]]).norm(), top[a], top[b]);
        if (opt.reverse_candidates) std::reverse(cand.begin(), cand.end());
        greedy(cand, ring_edges.back());
    }

    if (opt.flip) detail::flip_edges(pos, edges, fixed);

    std::vector<Edge> out;
    std::vector<std::pair<int, int>> pairs(edges.begin(), edges.end());
    if (!detail::connected(static_cast<int>(pos.size()), pairs))
        throw ConstructionError("edge set is disconnected; increase the edge slack");
    for (auto [i, j] : pairs) out.push_back({i, j, (pos[i] - pos[j]).norm()});
    return out;
}

struct DesignOptions {
    std::optional<double> edge_slack;
    double base_height = 0.0;
    bool flip = true;
};

inline FormationSpec design_formation(const QuadricSurface& s, int n, const DesignOptions& opt = {}) {
    validate(s);
    FormationSpec spec;
    spec.d_global = max_interdistance(n, shield_area(s), boundary_length(s));
    spec.rings = build_shield(s, n);
    spec.positions = place_nodes(s, spec.rings, opt.base_height);
    EdgeOptions eo;
    eo.cap_top = s.closed_top();
    eo.flip = opt.flip;
    spec.edges = generate_edges(spec.positions, spec.rings, spec.d_global, opt.edge_slack, eo);
    for (const auto& p : spec.positions)
        if (std::abs(surface_residual(s, p)) > 1e-9)
            throw ConstructionError("placed node is off the surface");
    return spec;
}

}  // namespace shield
