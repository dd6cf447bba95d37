#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "controller.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "quadric.hpp"
#include "rigidity.hpp"
#include "shield_builder.hpp"
#include "simulator.hpp"

namespace shield {

using json = nlohmann::json;

struct ParseError : Error {
    using Error::Error;
};

inline json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
            if (text[k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
    }
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_json(text, path);
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path);
    out << text;
}

inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw InvalidInput("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

namespace detail {

inline double need(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number())
        throw InvalidInput(std::string("surface field '") + key + "' is missing or not a number");
    return j[key].get<double>();
}

}  // namespace detail

inline QuadricSurface surface_from_json(const json& j) {
    SurfaceKind kind = surface_kind_from_string(j.value("kind", std::string()));
    Vec3 c = j.contains("center") ? vec_from_json(j["center"]) : Vec3::Zero();
    switch (kind) {
        case SurfaceKind::SemiEllipsoid:
            return semi_ellipsoid(detail::need(j, "a"), detail::need(j, "b"), detail::need(j, "c"), c);
        case SurfaceKind::SemiSphere:
            return semi_sphere(j.contains("r") ? detail::need(j, "r") : detail::need(j, "a"), c);
        case SurfaceKind::Cylinder:
            return cylinder(detail::need(j, "a"), detail::need(j, "c"), c);
        case SurfaceKind::Cone:
            return cone(detail::need(j, "a"), detail::need(j, "c"), c);
    }
    throw InvalidInput("unsupported surface");
}

inline json surface_to_json(const QuadricSurface& s) {
    json j;
    j["kind"] = to_string(s.kind);
    double a = 1 / std::sqrt(s.q1), b = 1 / std::sqrt(s.q2);
    switch (s.kind) {
        case SurfaceKind::SemiEllipsoid:
            j["a"] = a;
            j["b"] = b;
            j["c"] = 1 / std::sqrt(s.q3);
            break;
        case SurfaceKind::SemiSphere: j["r"] = a; break;
        case SurfaceKind::Cylinder:
            j["a"] = a;
            j["c"] = s.z_max;
            break;
        case SurfaceKind::Cone:
            j["a"] = a;
            j["c"] = 1 / std::sqrt(-s.q3);
            break;
    }
    j["center"] = vec_json(s.center);
    return j;
}

inline json formation_to_json(const FormationSpec& spec) {
    json j;
    j["positions"] = json::array();
    for (const auto& p : spec.positions) j["positions"].push_back(vec_json(p));
    j["edges"] = json::array();
    for (const auto& e : spec.edges) j["edges"].push_back(json::array({e.i, e.j, e.target}));
    j["rings"] = json::array();
    for (const auto& r : spec.rings) j["rings"].push_back({{"h", r.h}, {"n", r.n}, {"d", r.d}});
    j["d_global"] = spec.d_global;
    return j;
}

inline FormationSpec formation_from_json(const json& j) {
    FormationSpec spec;
    if (!j.contains("positions") || !j.contains("edges")) throw InvalidInput("formation needs positions and edges");
    for (const auto& p : j["positions"]) spec.positions.push_back(vec_from_json(p));
    const int n = spec.size();
    for (const auto& e : j["edges"]) {
        if (!e.is_array() || e.size() < 2) throw InvalidInput("edge entries must be [i, j, dstar]");
        Edge ed{e[0].get<int>(), e[1].get<int>(), 0};
        if (ed.i < 0 || ed.j < 0 || ed.i >= n || ed.j >= n || ed.i == ed.j)
            throw InvalidInput("edge index out of range");
        if (ed.i > ed.j) std::swap(ed.i, ed.j);
        ed.target = e.size() > 2 ? e[2].get<double>() : (spec.positions[ed.i] - spec.positions[ed.j]).norm();
        spec.edges.push_back(ed);
    }
    if (j.contains("rings"))
        for (const auto& r : j["rings"]) spec.rings.push_back({r.at("h").get<double>(), r.at("n").get<int>(), r.at("d").get<double>()});
    spec.d_global = j.value("d_global", 0.0);
    return spec;
}

inline ControlGains gains_from_json(const json& j, const ControlGains& base) {
    ControlGains g = base;
    g.kappa1 = j.value("kappa1", g.kappa1);
    g.kappa2 = j.value("kappa2", g.kappa2);
    g.kappa3 = j.value("kappa3", g.kappa3);
    if (j.contains("barrier_eps") && !j["barrier_eps"].is_null()) g.barrier_eps = j["barrier_eps"].get<double>();
    if (j.contains("z_upper") && !j["z_upper"].is_null()) g.z_upper = j["z_upper"].get<double>();
    return g;
}

inline json gains_to_json(const ControlGains& g) {
    json j{{"kappa1", g.kappa1}, {"kappa2", g.kappa2}, {"kappa3", g.kappa3}, {"barrier_eps", g.barrier_eps}};
    j["z_upper"] = g.z_upper ? json(*g.z_upper) : json(nullptr);
    return j;
}

inline std::string fmt_num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline std::string trajectory_csv(const Trajectory& tr) {
    std::ostringstream os;
    os << "t,agent,x,y,z,ux,uy,uz\n";
    for (std::size_t k = 0; k < tr.states.size(); ++k)
        for (std::size_t i = 0; i < tr.states[k].size(); ++i) {
            const auto& p = tr.states[k][i];
            const auto& u = tr.controls[k][i];
            os << fmt_num(tr.times[k]) << ',' << i << ',' << fmt_num(p.x()) << ',' << fmt_num(p.y()) << ','
               << fmt_num(p.z()) << ',' << fmt_num(u.x()) << ',' << fmt_num(u.y()) << ',' << fmt_num(u.z()) << '\n';
        }
    return os.str();
}

inline std::string metrics_csv(const Trajectory& tr) {
    std::ostringstream os;
    os << "t,e_norm,fs_norm,W\n";
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        os << fmt_num(tr.times[k]) << ',' << fmt_num(tr.edge_error_norm[k]) << ','
           << fmt_num(tr.surface_residual_norm[k]) << ',' << fmt_num(tr.potential[k]) << '\n';
    return os.str();
}

inline std::string stats_csv(const std::vector<StatRow>& rows) {
    std::ostringstream os;
    os << "delta,t,mean_e,sd_e,mean_fs,sd_fs\n";
    for (const auto& r : rows)
        os << fmt_num(r.delta) << ',' << fmt_num(r.t) << ',' << fmt_num(r.mean_e) << ',' << fmt_num(r.sd_e) << ','
           << fmt_num(r.mean_fs) << ',' << fmt_num(r.sd_fs) << '\n';
    return os.str();
}

// One column per ring.
inline std::string ring_table(const FormationSpec& spec) {
    std::ostringstream os;
    char buf[64];
    os << "d = " << fmt_num(spec.d_global) << '\n';
    auto row = [&](const char* label, auto value) {
        std::snprintf(buf, sizeof buf, "%-4s", label);
        os << buf;
        for (std::size_t k = 0; k < spec.rings.size(); ++k) os << value(k);
        os << '\n';
    };
    row("k", [&](std::size_t k) { std::snprintf(buf, sizeof buf, "%10zu", k); return std::string(buf); });
    row("n_k", [&](std::size_t k) { std::snprintf(buf, sizeof buf, "%10d", spec.rings[k].n); return std::string(buf); });
    row("d_k", [&](std::size_t k) { std::snprintf(buf, sizeof buf, "%10.3f", spec.rings[k].d); return std::string(buf); });
    row("h_k", [&](std::size_t k) { std::snprintf(buf, sizeof buf, "%10.3f", spec.rings[k].h); return std::string(buf); });
    return os.str();
}

}  // namespace shield
