#pragma once

#include <random>
#include <string>

#include <Eigen/Dense>

#include "cecluster/ce_fit.hpp"
#include "cecluster/divergence.hpp"
#include "cecluster/random.hpp"

namespace fixture {

// A hand-built fit with scalar or constant-vector parameters.
inline cecluster::CeFit make_fit(const std::string& site, double alpha, double beta, double mu, double var,
                                 Eigen::Index dim = 1, double q = 0.9, std::size_t cond_var = 0) {
    cecluster::CeFit f;
    f.site = site;
    f.cond_var = cond_var;
    f.alpha = Eigen::VectorXd::Constant(dim, alpha);
    f.beta = Eigen::VectorXd::Constant(dim, beta);
    f.mu = Eigen::VectorXd::Constant(dim, mu);
    f.sigma = var * Eigen::MatrixXd::Identity(dim, dim);
    f.quantile_q = q;
    f.threshold_u = cecluster::laplace_quantile(q);
    f.n_exceed = 100;
    return f;
}

// Random mean in [-2, 2]^m and covariance A A^T + 0.1 I.
inline cecluster::MvnParams random_mvn(Eigen::Index m, cecluster::Rng& rng) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    cecluster::MvnParams p;
    p.mean = Eigen::VectorXd::NullaryExpr(m, [&] { return 2.0 * unif(rng); });
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(m, m, [&] { return unif(rng); });
    p.cov = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(m, m);
    return p;
}

}  // namespace fixture
