#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "quadric.hpp"
#include "shield_builder.hpp"

namespace shield {

struct Framework {
    std::vector<Vec3> positions;
    std::vector<std::pair<int, int>> edges;
    QuadricSurface surface;

    int size() const { return static_cast<int>(positions.size()); }
    int edge_count() const { return static_cast<int>(edges.size()); }
};

inline void validate(const Framework& fw) {
    const int n = fw.size();
    std::set<std::pair<int, int>> seen;
    for (auto [i, j] : fw.edges) {
        if (i < 0 || j < 0 || i >= n || j >= n || i == j)
            throw InvalidInput("edge (" + std::to_string(i) + "," + std::to_string(j) + ") is invalid");
        if (!seen.insert({std::min(i, j), std::max(i, j)}).second)
            throw InvalidInput("duplicate edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
}

inline Framework make_framework(const FormationSpec& spec, const QuadricSurface& s) {
    return {spec.positions, spec.edge_pairs(), s};
}

inline Eigen::VectorXd stack(const std::vector<Vec3>& p) {
    Eigen::VectorXd x(3 * p.size());
    for (std::size_t i = 0; i < p.size(); ++i) x.segment<3>(3 * i) = p[i];
    return x;
}

inline std::vector<Vec3> unstack(const Eigen::VectorXd& x) {
    std::vector<Vec3> p(x.size() / 3);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = x.segment<3>(3 * i);
    return p;
}

// Tail of edge k is its lower index: h_ik = +1, h_jk = -1.
inline Eigen::MatrixXd incidence_matrix(const Framework& fw) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(fw.size(), fw.edge_count());
    for (int k = 0; k < fw.edge_count(); ++k) {
        auto [i, j] = fw.edges[k];
        H(std::min(i, j), k) = 1;
        H(std::max(i, j), k) = -1;
    }
    return H;
}

inline Eigen::MatrixXd laplacian(const Framework& fw) {
    Eigen::MatrixXd H = incidence_matrix(fw);
    return H * H.transpose();
}

inline Eigen::MatrixXd adjacency(const Framework& fw) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(fw.size(), fw.size());
    for (auto [i, j] : fw.edges) A(i, j) = A(j, i) = 1;
    return A;
}

inline Eigen::MatrixXd rigidity_matrix(const Framework& fw) {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(fw.edge_count(), 3 * fw.size());
    for (int k = 0; k < fw.edge_count(); ++k) {
        auto [i, j] = fw.edges[k];
        Vec3 z = fw.positions[i] - fw.positions[j];
        R.block<1, 3>(k, 3 * i) = z.transpose();
        R.block<1, 3>(k, 3 * j) = -z.transpose();
    }
    return R;
}

// Row i holds (p_i - center)^T Q1 in block i.
inline Eigen::MatrixXd surface_jacobian(const Framework& fw) {
    const auto& s = fw.surface;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(fw.size(), 3 * fw.size());
    for (int i = 0; i < fw.size(); ++i)
        J.block<1, 3>(i, 3 * i) = (s.Q1() * (fw.positions[i] - s.center)).transpose();
    return J;
}

struct AugmentedJacobian {
    Eigen::MatrixXd matrix;
    double kappa1 = 1, kappa2 = 1;
};

inline AugmentedJacobian augmented_jacobian(const Framework& fw, double kappa1, double kappa2) {
    Eigen::MatrixXd R = rigidity_matrix(fw), J = surface_jacobian(fw);
    AugmentedJacobian out{Eigen::MatrixXd(R.rows() + J.rows(), 3 * fw.size()), kappa1, kappa2};
    out.matrix << kappa1 * R, kappa2 * J;
    return out;
}

inline int symmetry_count(const QuadricSurface& s) {
    auto eq = [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(std::abs(x), std::abs(y)); };
    int pairs = eq(s.q1, s.q2) + eq(s.q1, s.q3) + eq(s.q2, s.q3);
    if (pairs == 3) return 3;
    if (pairs >= 1) return 1;
    return 0;
}

inline int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-8) {
    if (m.size() == 0) return 0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0) return 0;
    int r = 0;
    for (int k = 0; k < sv.size(); ++k)
        if (sv(k) > rel_tol * sv(0)) ++r;
    return r;
}

struct RankReport {
    int n = 0, edges = 0, s = 0;
    std::optional<int> predicted;
    int measured = 0;
    std::optional<bool> agrees;
};

// Only the N_e >= 2N regime has a closed-form prediction.
inline RankReport verify_rank_prediction(const Framework& fw, double kappa1 = 1, double kappa2 = 1) {
    RankReport r;
    r.n = fw.size();
    r.edges = fw.edge_count();
    r.s = symmetry_count(fw.surface);
    r.measured = numerical_rank(augmented_jacobian(fw, kappa1, kappa2).matrix);
    if (r.edges >= 2 * r.n) {
        r.predicted = 3 * r.n - r.s;
        r.agrees = *r.predicted == r.measured;
    }
    return r;
}

}  // namespace shield
