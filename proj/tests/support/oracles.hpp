#pragma once

// Independent numerical oracles used by the tests: Gauss-Hermite moments of
// Gaussian vectors and Nystrom eigenvalues of covariance kernels. Both use
// Eigen's dense symmetric solver and share no code with the library.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace gsurf::testing {

struct GaussRule {
    std::vector<double> nodes;    // for the standard normal weight
    std::vector<double> weights;  // sum to 1
};

// Golub-Welsch for probabilists' Hermite polynomials.
inline GaussRule gauss_hermite(int m) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
    for (int k = 1; k < m; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    GaussRule rule;
    for (int k = 0; k < m; ++k) {
        rule.nodes.push_back(es.eigenvalues()(k));
        const double v = es.eigenvectors()(0, k);
        rule.weights.push_back(v * v);
    }
    return rule;
}

// E[f(Y)] for Y ~ N(0, cov) in dimension 1 or 2, by a tensor rule on the
// Cholesky factor.
inline double gaussian_expectation(const Eigen::MatrixXd& cov, const std::function<double(const Eigen::VectorXd&)>& f,
                                   int m = 60) {
    const auto rule = gauss_hermite(m);
    const Eigen::MatrixXd L = cov.llt().matrixL();
    const int d = static_cast<int>(cov.rows());
    double s = 0.0;
    if (d == 1) {
        for (int i = 0; i < m; ++i) {
            Eigen::VectorXd y(1);
            y(0) = L(0, 0) * rule.nodes[i];
            s += rule.weights[i] * f(y);
        }
        return s;
    }
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            Eigen::VectorXd u(2);
            u << rule.nodes[i], rule.nodes[j];
            s += rule.weights[i] * rule.weights[j] * f(L * u);
        }
    return s;
}

// Largest eigenvalues of the integral operator with kernel k on (0,1),
// midpoint Nystrom discretization on m points.
inline std::vector<double> nystrom_eigenvalues(const std::function<double(double, double)>& k, int m, int count) {
    Eigen::MatrixXd A(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) A(i, j) = k((i + 0.5) / m, (j + 0.5) / m) / m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    std::vector<double> out;
    for (int c = 0; c < count; ++c) out.push_back(es.eigenvalues()(m - 1 - c));
    return out;
}

}  // namespace gsurf::testing
