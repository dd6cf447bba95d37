// Acceptance report: one verdict line per criterion, sub-checks indented below it.
// Exit status is non-zero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shield/app.hpp"

using namespace shield;

namespace {

const std::string cfg_dir = SHIELD_CONFIG_DIR;

struct Report {
    std::vector<std::pair<bool, std::string>> items;

    bool check(bool ok, const std::string& what) {
        items.emplace_back(ok, what);
        return ok;
    }
    bool near(double got, double want, double tol, const std::string& what) {
        return check(std::abs(got - want) <= tol, what + " = " + fmt(got) + " (want " + fmt(want) + " +-" + fmt(tol) + ")");
    }
    bool rel(double got, double want, double frac, const std::string& what) {
        return check(std::abs(got - want) <= frac * std::abs(want),
                     what + " = " + fmt(got) + " (want " + fmt(want) + " +-" + fmt(100 * frac) + "%)");
    }
    bool equal(long got, long want, const std::string& what) {
        return check(got == want, what + " = " + std::to_string(got) + " (want " + std::to_string(want) + ")");
    }
    bool at_most(double got, double limit, const std::string& what) {
        return check(got <= limit, what + " = " + fmt(got) + " (limit " + fmt(limit) + ")");
    }
    bool at_least(double got, double limit, const std::string& what) {
        return check(got >= limit, what + " = " + fmt(got) + " (min " + fmt(limit) + ")");
    }
    bool passed() const {
        for (const auto& [ok, _] : items)
            if (!ok) return false;
        return true;
    }
    static std::string fmt(double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", x);
        return buf;
    }
};

class Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

RunConfig load(const std::string& name) { return config_from_json(load_json(cfg_dir + "/" + name)); }

double area_error(int n) {
    auto s = semi_sphere(15);
    double a = total_area(s), l = boundary_length(s);
    double d = max_interdistance(n, a, l);
    int f = triangle_count_estimate(n, boundary_count(l, d));
    return (a - area_estimate(f, d)) / a;
}

void table2(Report& r) {
    Timer t;
    auto s = semi_sphere(15);
    double a = total_area(s), l = boundary_length(s);
    const int ns[] = {20, 50, 100};
    const double d_want[] = {10.59, 6.27, 4.31}, err_want[] = {0.29, 0.01, 6.28e-4};
    const int eb_want[] = {9, 16, 22}, f_want[] = {29, 82, 176};
    for (int k = 0; k < 3; ++k) {
        std::string tag = "N=" + std::to_string(ns[k]) + " ";
        double d = max_interdistance(ns[k], a, l);
        int eb = boundary_count(l, d);
        r.near(d, d_want[k], 0.01, tag + "d");
        r.equal(eb, eb_want[k], tag + "e_b");
        r.equal(triangle_count_estimate(ns[k], eb), f_want[k], tag + "f");
        r.rel(area_error(ns[k]), err_want[k], 0.05, tag + "relative area error");
    }
    r.at_most(t.seconds(), 1.0, "runtime [s]");
}

void table3(Report& r) {
    Timer t;
    auto rings = build_shield(semi_ellipsoid(10, 15, 12), 50);
    const int n[] = {16, 14, 11, 7, 2};
    const double h[] = {0, 5.078, 8.422, 10.750, 11.938};
    const double dk[] = {4.958, 5.134, 5.137, 5.042, 4.039};
    if (r.equal(static_cast<long>(rings.size()), 5, "ring count"))
        for (int k = 0; k < 5; ++k) {
            std::string tag = "ring " + std::to_string(k) + " ";
            r.equal(rings[k].n, n[k], tag + "n_k");
            r.near(rings[k].h, h[k], 0.01, tag + "h_k");
            r.near(rings[k].d, dk[k], 0.01, tag + "d_k");
        }
    r.at_most(t.seconds(), 1.0, "runtime [s]");
}

void small_spheres(Report& r) {
    auto big = build_shield(semi_sphere(15), 12);
    if (r.equal(static_cast<long>(big.size()), 2, "R=15 N=12 ring count")) {
        r.equal(big[0].n, 7, "R=15 N=12 n_0");
        r.equal(big[1].n, 5, "R=15 N=12 n_1");
        r.near(big[1].h, 3.421, 0.01, "R=15 N=12 h_1");
    }
    auto s = semi_sphere(1, Vec3(0, 0, 0.8));
    auto spec = design_formation(s, 12);
    r.near(spec.d_global, 0.97, 0.01, "R=1 N=12 d");
    if (r.equal(static_cast<long>(spec.rings.size()), 2, "R=1 N=12 ring count")) {
        r.equal(spec.rings[0].n, 7, "R=1 N=12 n_b");
        r.equal(spec.rings[1].n, 5, "R=1 N=12 n_1");
        r.near(spec.rings[0].d, 0.90, 0.01, "R=1 N=12 d_0");
        r.near(spec.rings[1].d, 0.80, 0.01, "R=1 N=12 d_1");
    }
    r.equal(static_cast<long>(spec.edges.size()), 26, "R=1 N=12 N_e");
}

void predicate_oracle(Report& r) {
    Timer t;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1, 1), logscale(-3, 3);
    int samples = 0, decided = 0, agree = 0, lemma_ok = 0;
    double worst_lemma = 0;
    while (samples < 5000) {
        double sc = std::pow(10.0, logscale(rng));
        Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng)), c(u(rng), u(rng), u(rng)), d(u(rng), u(rng), u(rng));
        a *= sc, b *= sc, c *= sc, d *= sc;
        if ((b - a).cross(c - a).norm() < 1e-3 * sc * sc || std::abs(orientation_det(a, b, c)) < 1e-3 * sc * sc * sc)
            continue;
        ++samples;
        auto pl = triangle_plane(a, b, c);
        double n2 = pl.normal().squaredNorm(), lam = lambda_det(a, b, c);
        double err = std::abs(lam + n2) / n2;
        worst_lemma = std::max(worst_lemma, err);
        lemma_ok += err <= 1e-9;
        auto side = in_cap_test(a, b, c, d);
        if (side == CapSide::OnBoundary) continue;
        ++decided;
        auto cc = circumcenter(a, b, c);
        bool inside = (d - cc.m).norm() < cc.r;
        agree += inside == (side == CapSide::Inside);
    }
    r.at_least(samples, 1000, "valid quadruples");
    r.equal(agree, decided, "in-cap agreements with the distance oracle (of " + std::to_string(decided) + ")");
    r.equal(lemma_ok, samples, "Lambda identity within 1e-9 (worst " + Report::fmt(worst_lemma) + ")");
    r.at_most(t.seconds(), 5.0, "runtime [s]");
}

void ranks(Report& r) {
    Timer t;
    auto report = [&](const QuadricSurface& s, int n, int want, const std::string& tag) {
        auto spec = design_formation(s, n);
        auto rr = verify_rank_prediction(make_framework(spec, s));
        r.equal(rr.measured, want, tag + " N=" + std::to_string(n) + " (N_e=" + std::to_string(rr.edges) + ") rank");
    };
    report(semi_sphere(15), 12, 33, "semi-sphere R=15");
    report(semi_sphere(15), 50, 147, "semi-sphere R=15");
    report(semi_ellipsoid(10, 15, 12), 50, 150, "ellipsoid");
    auto cyl = cylinder(5, 10);
    auto spec = design_formation(cyl, 30);
    r.check(static_cast<int>(spec.edges.size()) >= 60, "cylinder a=5 c=10 N=30 has N_e >= 2N");
    report(cyl, 30, 89, "cylinder a=5 c=10");
    r.at_most(t.seconds(), 10.0, "runtime [s]");
}

void gradient(Report& r) {
    RunConfig c = load("example1_ellipsoid.json");
    auto spec = design_formation(c.surface, c.n, c.design);
    const ControlGains& g = c.gains;
    const double eps = g.barrier_eps;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1, 1), low(0.2, 1.0);
    double worst = 0;
    int barrier_states = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto p = spec.positions;
        for (auto& x : p) x += Vec3(u(rng), u(rng), u(rng));
        bool active = false;
        for (int i = 0; i < spec.rings[0].n; ++i) {
            p[i].z() = low(rng) * eps;
            active = true;
        }
        for (auto& x : p)
            if (x.z() <= 0) x.z() = low(rng) * eps;
        barrier_states += active;
        Eigen::VectorXd uvec(3 * p.size()), fd(3 * p.size());
        for (std::size_t i = 0; i < p.size(); ++i) uvec.segment<3>(3 * i) = control_input(static_cast<int>(i), p, spec, c.surface, g);
        const double h = 1e-6;
        for (std::size_t i = 0; i < p.size(); ++i)
            for (int k = 0; k < 3; ++k) {
                auto plus = p, minus = p;
                plus[i](k) += h;
                minus[i](k) -= h;
                fd(3 * i + k) = -(potential(spec, c.surface, plus, g).total() - potential(spec, c.surface, minus, g).total()) / (2 * h);
            }
        worst = std::max(worst, (uvec - fd).norm() / fd.norm());
    }
    r.equal(barrier_states, 100, "states with agents below the barrier threshold");
    r.at_most(worst, 1e-5, "worst relative error over 100 states");
}

struct RunStats {
    double worst_increase = 0;  // max over runs of the largest step increase / W(0)
    int runs = 0;
    void add(const Trajectory& tr) {
        ++runs;
        if (tr.potential.front() > 0) worst_increase = std::max(worst_increase, tr.max_potential_increase / tr.potential.front());
    }
};

RunStats& lyapunov_runs() {
    static RunStats s;
    return s;
}

void convergence(Report& r) {
    Timer t;
    RunConfig c1 = load("example1_ellipsoid.json");
    auto spec1 = design_formation(c1.surface, c1.n, c1.design);
    const std::vector<double> deltas{2, 4, 6, 8, 10};
    int ok_e = 0, ok_f = 0, ok_final = 0, total = 0, failed = 0;
    double min_e = 1, min_f = 1, max_final = 0;
    for (std::size_t di = 0; di < deltas.size(); ++di)
        for (int run = 0; run < 5; ++run) {
            std::uint64_t seed = run_seed(c1.experiment.base_seed, di, run);
            try {
                auto p0 = random_initial_conditions(spec1, c1.surface, deltas[di], seed, c1.ic);
                SimOptions so = c1.sim;
                so.t_end = 30;
                so.record_states = false;
                auto tr = integrate(spec1, c1.surface, c1.gains, p0, so);
                lyapunov_runs().add(tr);
                auto m = convergence_metrics(tr);
                auto red = m.reduction_at(8);
                ++total;
                ok_e += red.e >= 0.997;
                ok_f += red.fs >= 0.983;
                ok_final += m.e_at(30) <= 0.1;
                min_e = std::min(min_e, red.e);
                min_f = std::min(min_f, red.fs);
                max_final = std::max(max_final, m.e_at(30));
                if (red.e < 0.997 || red.fs < 0.983 || m.e_at(30) > 0.1)
                    r.items.emplace_back(false, "example 1 delta=" + Report::fmt(deltas[di]) + " seed=" + std::to_string(seed) +
                                                    ": reduction_e(8)=" + Report::fmt(red.e) + " reduction_fs(8)=" +
                                                    Report::fmt(red.fs) + " |e(30)|=" + Report::fmt(m.e_at(30)));
            } catch (const Error& e) {
                ++failed;
                r.check(false, "example 1 delta=" + Report::fmt(deltas[di]) + " seed=" + std::to_string(seed) + ": " + e.what());
            }
        }
    r.equal(total, 25, "example 1 runs completed");
    r.equal(ok_e, total, "example 1 runs with |e| reduction at t=8 >= 99.7% (worst " + Report::fmt(min_e) + ")");
    r.equal(ok_f, total, "example 1 runs with |f_S| reduction at t=8 >= 98.3% (worst " + Report::fmt(min_f) + ")");
    r.equal(ok_final, total, "example 1 runs with |e(30)| <= 0.1 (worst " + Report::fmt(max_final) + ")");

    RunConfig c2 = load("example2_sphere.json");
    auto spec2 = design_formation(c2.surface, c2.n, c2.design);
    for (auto seed : c2.seeds) {
        std::string tag = "example 2 seed=" + std::to_string(seed);
        try {
            auto p0 = random_initial_conditions(spec2, c2.surface, c2.delta, seed, c2.ic);
            SimOptions so = c2.sim;
            so.record_states = false;
            auto tr = integrate(spec2, c2.surface, c2.gains, p0, so);
            lyapunov_runs().add(tr);
            auto m = convergence_metrics(tr);
            r.items.emplace_back(true, tag + " |e(0)| = " + Report::fmt(m.initial_e) + ", |f_S(0)| = " + Report::fmt(m.initial_fs));
            r.at_most(m.e_at(15), 0.01, tag + " |e(15)|");
            r.at_most(m.fs_at(15), 1e-3, tag + " |f_S(15)|");
        } catch (const Error& e) {
            r.check(false, tag + ": " + e.what());
        }
    }
    r.at_most(t.seconds(), 60.0, "runtime [s]");
}

void statistics(Report& r) {
    RunConfig c = load("example1_ellipsoid.json");
    auto spec = design_formation(c.surface, c.n, c.design);
    StudyConfig sc;
    sc.deltas = {2, 4, 6, 8, 10};
    sc.runs_per_delta = 5;
    sc.sample_times = {8, 16, 30};
    sc.base_seed = c.experiment.base_seed;
    sc.sim = c.sim;
    sc.ic = c.ic;
    auto res = statistical_study(spec, c.surface, c.gains, sc);
    for (double inc : res.max_potential_increase) {
        Trajectory fake;
        fake.potential = {1.0};
        fake.max_potential_increase = inc;
        lyapunov_runs().add(fake);
    }
    r.equal(static_cast<long>(res.errors.size()), 0, "failed runs");
    const double e_mean[] = {94.3, 205.8, 372.8, 510.5, 817.6};
    const double f_mean[] = {0.712, 1.446, 2.291, 2.942, 3.865};
    double prev = -1;
    bool monotone = true, sd_ok = true;
    int k = 0;
    for (const auto& row : res.rows) {
        sd_ok = sd_ok && row.sd_e >= 0 && row.sd_fs >= 0;
        if (row.t != 0) continue;
        std::string tag = "delta=" + Report::fmt(row.delta) + " t=0 ";
        r.rel(row.mean_e, e_mean[k], 0.35, tag + "mean |e|");
        r.rel(row.mean_fs, f_mean[k], 0.35, tag + "mean |f_S|");
        monotone = monotone && row.mean_e > prev;
        prev = row.mean_e;
        ++k;
    }
    r.check(sd_ok, "all standard deviations >= 0");
    r.check(monotone, "mean |e(0)| increases with delta");
}

void lyapunov(Report& r) {
    if (lyapunov_runs().runs == 0) {
        Report scratch;
        convergence(scratch);
        statistics(scratch);
    }
    r.at_least(lyapunov_runs().runs, 52, "trajectories checked");
    r.at_most(lyapunov_runs().worst_increase, 1e-9, "largest single-step rise of W relative to W(0)");
}

void pipeline(Report& r) {
    const std::vector<std::pair<QuadricSurface, int>> cases{
        {semi_ellipsoid(10, 15, 12), 20}, {semi_ellipsoid(10, 15, 12), 50}, {semi_ellipsoid(10, 15, 12), 80},
        {semi_ellipsoid(20, 15, 10), 30}, {semi_ellipsoid(20, 15, 10), 70}, {semi_ellipsoid(3, 4, 5), 25},
        {semi_sphere(15), 12},            {semi_sphere(15), 20},            {semi_sphere(15), 50},
        {semi_sphere(15), 100},           {semi_sphere(1, Vec3(0, 0, 0.8)), 12}, {semi_sphere(1), 30},
        {cylinder(5, 10), 20},            {cylinder(5, 10), 30},            {cylinder(5, 10), 60},
        {cylinder(2, 5), 16},             {cone(5, 10), 20},                {cone(5, 10), 30},
        {cone(5, 10), 50},                {cone(3, 4), 15}};
    int good = 0;
    for (const auto& [s, n] : cases) {
        std::string tag = to_string(s.kind) + " N=" + std::to_string(n);
        try {
            auto spec = design_formation(s, n);
            int ne = static_cast<int>(spec.edges.size());
            auto rep = check_delaunay(spec.positions, spec.edge_pairs());
            double worst_f = 0;
            for (const auto& p : spec.positions) worst_f = std::max(worst_f, std::abs(surface_residual(s, p)));
            bool bounds = ne >= 2 * n - 2 && ne <= 3 * n - 6;
            bool conn = detail::connected(n, spec.edge_pairs());
            bool ok = bounds && conn && rep.violations.empty() && worst_f <= 1e-9;
            good += ok;
            if (!ok)
                r.check(false, tag + ": N_e=" + std::to_string(ne) + " connected=" + std::to_string(conn) +
                                   " violations=" + std::to_string(rep.violations.size()) + " max|f_S|=" + Report::fmt(worst_f));
        } catch (const Error& e) {
            r.check(false, tag + ": " + e.what());
        }
    }
    r.equal(good, static_cast<long>(cases.size()), "cases passing bounds, connectivity, empty caps and |f_S| <= 1e-9");
}

struct Criterion {
    int id;
    const char* title;
    std::function<void(Report&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance report"};
    int only = 0;
    bool verbose = true;
    app.add_option("--criterion", only, "run a single criterion (1-10); 0 runs all");
    app.add_flag("!--quiet", verbose, "print only verdict lines");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "hemisphere level table (d, e_b, f, area error)", table2},
        {2, "ellipsoid ring table", table3},
        {3, "12-agent sphere configurations", small_spheres},
        {4, "empty-cap predicate vs distance oracle", predicate_oracle},
        {5, "rank of the augmented Jacobian", ranks},
        {6, "control input is the negative potential gradient", gradient},
        {7, "convergence of both examples", convergence},
        {8, "initial-error statistics", statistics},
        {9, "potential is nonincreasing", lyapunov},
        {10, "pipeline property sweep (20 cases)", pipeline},
    };

    bool all_ok = true;
    for (const auto& c : all) {
        if (only != 0 && c.id != only) continue;
        Report r;
        try {
            c.run(r);
        } catch (const std::exception& e) {
            r.check(false, std::string("unexpected error: ") + e.what());
        }
        bool ok = r.passed();
        all_ok = all_ok && ok;
        std::cout << "criterion " << c.id << ": " << (ok ? "PASS" : "FAIL") << "  " << c.title << '\n';
        if (verbose)
            for (const auto& [pass, what] : r.items) std::cout << "    " << (pass ? "ok   " : "MISS ") << what << '\n';
    }
    return all_ok ? 0 : 1;
}
