#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "cecluster/error.hpp"
#include "cecluster/margins.hpp"
#include "cecluster/panel.hpp"
#include "cecluster/parallel.hpp"
#include "cecluster/random.hpp"

namespace cecluster {

// Correlation matrix with unit diagonal and a common off-diagonal value.
inline Eigen::MatrixXd equicorrelation(std::size_t dim, double rho) {
    detail::require(dim >= 1, "equicorrelation: dimension must be positive");
    if (dim > 1) {
        detail::require(rho > -1.0 / static_cast<double>(dim - 1) && rho <= 1.0,
                        "equicorrelation: rho = " + std::to_string(rho) + " is not a valid common correlation");
    }
    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(d, d, rho);
    corr.diagonal().setOnes();
    return corr;
}

// Square-root factor F with F F^T = corr. Positive semi-definite matrices
// (e.g. perfect correlation) are accepted through a pivoted LDL^T.
inline Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& corr, const std::string& name = "correlation matrix") {
    detail::require(corr.rows() == corr.cols() && corr.rows() > 0, name + " must be square and non-empty");
    detail::require((corr - corr.transpose()).cwiseAbs().maxCoeff() <= 1e-12, name + " must be symmetric");
    detail::require((corr.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12, name + " must have a unit diagonal");

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(corr);
    if (ldlt.info() != Eigen::Success) {
        throw NumericalError("factorization of " + name + " failed");
    }
    Eigen::VectorXd d = ldlt.vectorD();
    const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
    if (d.minCoeff() < -1e-12 * scale) {
        throw NumericalError(name + " is not positive semi-definite");
    }
    d = d.cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd lower = ldlt.matrixL();
    Eigen::MatrixXd factor = lower * d.asDiagonal();
    return ldlt.transpositionsP().transpose() * factor;
}

// Standard normal draw -> standard Laplace through the exact normal CDF.
// Uses 2 * (1 - Phi(|x|)) = erfc(|x| / sqrt 2) to keep tail precision.
inline double laplace_from_normal(double x) noexcept {
    const double tail = -std::log(std::erfc(std::abs(x) / std::numbers::sqrt2));
    return x < 0.0 ? -tail : tail;
}

inline double laplace_from_student_t(double x, double dof) {
    const boost::math::students_t_distribution<double> dist(dof);
    const double upper_tail = boost::math::cdf(boost::math::complement(dist, std::abs(x)));
    const double tail = -std::log(2.0 * upper_tail);
    return x < 0.0 ? -tail : tail;
}

// n rows of a Gaussian copula with standard Laplace margins.
inline Eigen::MatrixXd sample_gaussian_copula(std::size_t n, const Eigen::MatrixXd& corr, Rng& rng) {
    const Eigen::MatrixXd factor = correlation_factor(corr);
    const Eigen::Index d = corr.rows();
    std::normal_distribution<double> normal;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
    Eigen::VectorXd z(d);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index j = 0; j < d; ++j) {
            z[j] = normal(rng);
        }
        const Eigen::VectorXd x = factor * z;
        for (Eigen::Index j = 0; j < d; ++j) {
            out(r, j) = laplace_from_normal(x[j]);
        }
    }
    return out;
}

// n rows of a Student-t copula: correlated normals scaled by a shared
// sqrt(dof / chi2_dof), mapped through the exact t CDF.
inline Eigen::MatrixXd sample_t_copula(std::size_t n, const Eigen::MatrixXd& corr, double dof, Rng& rng) {
    detail::require(dof > 0.0 && std::isfinite(dof), "sample_t_copula: degrees of freedom must be positive");
    const Eigen::MatrixXd factor = correlation_factor(corr);
    const Eigen::Index d = corr.rows();
    std::normal_distribution<double> normal;
    std::chi_squared_distribution<double> chi2(dof);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
    Eigen::VectorXd z(d);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index j = 0; j < d; ++j) {
            z[j] = normal(rng);
        }
        const double scale = std::sqrt(dof / chi2(rng));
        const Eigen::VectorXd x = scale * (factor * z);
        for (Eigen::Index j = 0; j < d; ++j) {
            out(r, j) = laplace_from_student_t(x[j], dof);
        }
    }
    return out;
}

enum class CopulaKind { gaussian, mixture };

// Simulation design: D sites split into clusters, each site drawing n rows
// from either a pure Gaussian copula or a half Gaussian / half t mixture.
struct MixtureDesign {
    CopulaKind kind = CopulaKind::mixture;
    std::size_t n_sites = 12;
    std::size_t n_obs = 1000;
    std::size_t n_vars = 2;
    std::vector<std::size_t> cluster_sizes{6, 6};
    std::vector<double> rho_gauss{0.5, 0.5};
    std::vector<double> rho_t{0.9, 0.1};
    double t_dof = 3.0;
    double perturb_halfwidth = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require(n_sites >= 1 && n_vars >= 1, "design: need at least one site and one variable");
        detail::require(!cluster_sizes.empty(), "design: cluster_sizes is empty");
        std::size_t total = 0;
        for (const auto size : cluster_sizes) {
            detail::require(size > 0, "design: cluster sizes must be positive");
            total += size;
        }
        detail::require(total == n_sites, "design: cluster sizes sum to " + std::to_string(total) +
                                              " but there are " + std::to_string(n_sites) + " sites");
        detail::require(rho_gauss.size() == cluster_sizes.size(), "design: need one rho_gauss per cluster");
        detail::require(n_obs >= 2, "design: need at least two observations per site");
        if (kind == CopulaKind::mixture) {
            detail::require(rho_t.size() == cluster_sizes.size(), "design: need one rho_t per cluster");
            detail::require(n_obs % 2 == 0, "design: mixture designs need an even n");
            detail::require(t_dof > 0.0, "design: t_dof must be positive");
        }
        detail::require(perturb_halfwidth >= 0.0, "design: perturb_halfwidth must be non-negative");
        for (const double r : rho_gauss) {
            detail::require(r >= 0.0 && r <= 1.0, "design: rho_gauss values must lie in [0, 1]");
        }
        for (const double r : rho_t) {
            detail::require(r >= 0.0 && r <= 1.0, "design: rho_t values must lie in [0, 1]");
        }
    }

    // Cluster label (1-based) of every site, in site order.
    [[nodiscard]] std::vector<int> labels() const {
        std::vector<int> out;
        out.reserve(n_sites);
        for (std::size_t c = 0; c < cluster_sizes.size(); ++c) {
            out.insert(out.end(), cluster_sizes[c], static_cast<int>(c + 1));
        }
        return out;
    }
};

struct SimulatedPanel {
    PanelData panel;
    std::vector<int> labels;
    std::vector<double> site_rho_gauss;
    std::vector<double> site_rho_t;
};

// Draws the design. Per-site t correlations are perturbed before any data
// is sampled; each site then uses its own substream "site/<s>", so the
// output does not depend on the thread count.
inline SimulatedPanel sample_mixture_panel(const MixtureDesign& design, std::size_t threads = 1) {
    design.validate();
    SimulatedPanel sim;
    sim.labels = design.labels();

    Rng perturb_rng = make_rng(design.seed, "perturb");
    sim.site_rho_gauss.resize(design.n_sites);
    sim.site_rho_t.resize(design.n_sites);
    const double rho_t_max = std::nextafter(1.0, 0.0);
    for (std::size_t s = 0; s < design.n_sites; ++s) {
        const auto cluster = static_cast<std::size_t>(sim.labels[s] - 1);
        sim.site_rho_gauss[s] = design.rho_gauss[cluster];
        if (design.kind == CopulaKind::mixture) {
            double rho = design.rho_t[cluster];
            if (design.perturb_halfwidth > 0.0) {
                rho += design.perturb_halfwidth * (2.0 * uniform_open01(perturb_rng) - 1.0);
            }
            sim.site_rho_t[s] = std::clamp(rho, 0.0, rho_t_max);
        } else {
            sim.site_rho_t[s] = std::numeric_limits<double>::quiet_NaN();
        }
    }

    auto& panel = sim.panel;
    panel.margins = Margins::laplace;
    panel.site_ids.resize(design.n_sites);
    for (std::size_t s = 0; s < design.n_sites; ++s) {
        panel.site_ids[s] = "S" + std::to_string(s + 1);
    }
    panel.variable_names.resize(design.n_vars);
    for (std::size_t j = 0; j < design.n_vars; ++j) {
        panel.variable_names[j] = "V" + std::to_string(j + 1);
    }
    panel.sites.resize(design.n_sites);

    parallel_for(design.n_sites, threads, [&](std::size_t s) {
        Rng rng = make_rng(design.seed, "site/" + std::to_string(s));
        const auto gauss_corr = equicorrelation(design.n_vars, sim.site_rho_gauss[s]);
        Eigen::MatrixXd rows(static_cast<Eigen::Index>(design.n_obs), static_cast<Eigen::Index>(design.n_vars));
        if (design.kind == CopulaKind::gaussian) {
            rows = sample_gaussian_copula(design.n_obs, gauss_corr, rng);
        } else {
            const std::size_t half = design.n_obs / 2;
            const auto half_rows = static_cast<Eigen::Index>(half);
            rows.topRows(half_rows) = sample_gaussian_copula(half, gauss_corr, rng);
            rows.bottomRows(half_rows) =
                sample_t_copula(half, equicorrelation(design.n_vars, sim.site_rho_t[s]), design.t_dof, rng);
        }
        panel.sites[s] = to_laplace_rows(rows, "simulated site " + panel.site_ids[s]);
    });
    return sim;
}

}  // namespace cecluster
