#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cecluster/error.hpp"
#include "cecluster/margins.hpp"
#include "cecluster/panel.hpp"
#include "cecluster/parallel.hpp"
#include "cecluster/random.hpp"
#include "cecluster/simplex.hpp"

namespace cecluster {

// Conditional extremes fit for one (site, conditioning variable):
//
//   Y_{-i} | Y_i = y  ~  MVN(alpha y + y^beta mu, diag(y^beta) Sigma diag(y^beta)),  y > u.
//
// alpha, beta, mu have one entry per non-conditioning variable, in
// increasing variable order with the conditioning variable removed.
struct CeFit {
    std::string site;
    std::size_t cond_var = 0;  // 0-based
    Eigen::VectorXd alpha;
    Eigen::VectorXd beta;
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    double threshold_u = 0.0;
    double quantile_q = 0.0;
    std::size_t n_exceed = 0;
    double nll = 0.0;
    // Per-component location and scale at the stage-1 optimum.
    Eigen::VectorXd stage1_mu;
    Eigen::VectorXd stage1_sd;

    [[nodiscard]] Eigen::Index dim() const noexcept { return alpha.size(); }
};

// Parameters of one regression component.
struct ComponentParams {
    double alpha = 0.0;
    double beta = 0.0;
    double mu = 0.0;
    double sd = 1.0;
};

// Exceedance rows for one conditioning variable: the conditioning values
// y > u and the remaining variables on the same rows.
struct ExceedanceRows {
    Eigen::VectorXd cond;
    Eigen::MatrixXd others;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(cond.size()); }
};

class InsufficientExceedances : public DataError {
  public:
    InsufficientExceedances(std::size_t count, std::size_t required, const std::string& where)
        : DataError(where + ": " + std::to_string(count) + " exceedances, at least " + std::to_string(required) +
                    " required"),
          count_(count) {}
    [[nodiscard]] std::size_t count() const noexcept { return count_; }

  private:
    std::size_t count_;
};

class FitNonConvergence : public NumericalError {
  public:
    FitNonConvergence(const std::string& where, std::vector<ComponentParams> best)
        : NumericalError(where + ": optimizer did not converge from any start"), best_(std::move(best)) {}
    [[nodiscard]] const std::vector<ComponentParams>& best_params() const noexcept { return best_; }

  private:
    std::vector<ComponentParams> best_;
};

struct FitOptions {
    std::size_t min_exceedances = 20;
    SimplexOptions simplex{};
    // Multi-start grid for (alpha, beta); mu and sd start at the residual
    // mean and standard deviation implied by each pair.
    std::vector<double> start_alpha{-0.5, 0.0, 0.5};
    std::vector<double> start_beta{0.1, 0.5};
    double beta_lower = -1.0;
};

inline ExceedanceRows extract_exceedances(const Eigen::MatrixXd& rows, std::size_t cond_var, double u) {
    detail::require(cond_var < static_cast<std::size_t>(rows.cols()), "extract_exceedances: conditioning variable out of range");
    const auto i = static_cast<Eigen::Index>(cond_var);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        if (rows(r, i) > u) {
            keep.push_back(r);
        }
    }
    ExceedanceRows out;
    out.cond.resize(static_cast<Eigen::Index>(keep.size()));
    out.others.resize(static_cast<Eigen::Index>(keep.size()), rows.cols() - 1);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        out.cond[row] = rows(keep[k], i);
        Eigen::Index col = 0;
        for (Eigen::Index j = 0; j < rows.cols(); ++j) {
            if (j != i) {
                out.others(row, col++) = rows(keep[k], j);
            }
        }
    }
    return out;
}

// Negative log-likelihood of one component: independent Gaussian terms with
// mean alpha y + y^beta mu and standard deviation y^beta sd.
inline double component_nll(const ComponentParams& p, const Eigen::VectorXd& cond, const Eigen::VectorXd& response) {
    constexpr double half_log_2pi = 0.91893853320467274178;
    double total = 0.0;
    for (Eigen::Index r = 0; r < cond.size(); ++r) {
        const double y = cond[r];
        const double log_y = std::log(y);
        const double scale = std::exp(p.beta * log_y);
        const double z = (response[r] - p.alpha * y - scale * p.mu) / (scale * p.sd);
        total += half_log_2pi + p.beta * log_y + std::log(p.sd) + 0.5 * z * z;
    }
    return total;
}

// Stage-1 objective summed over components.
inline double negative_log_likelihood(const std::vector<ComponentParams>& params, const ExceedanceRows& rows) {
    if (rows.size() == 0) {
        throw DataError("negative_log_likelihood: no exceedance rows");
    }
    detail::require(static_cast<Eigen::Index>(params.size()) == rows.others.cols(),
                    "negative_log_likelihood: one parameter set per component is required");
    if ((rows.cond.array() <= 0.0).any()) {
        throw ContractError("negative_log_likelihood: conditioning values must be positive to raise them to beta");
    }
    for (const auto& p : params) {
        detail::require(p.sd > 0.0, "negative_log_likelihood: standard deviations must be positive");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < params.size(); ++j) {
        total += component_nll(params[j], rows.cond, rows.others.col(static_cast<Eigen::Index>(j)));
    }
    return total;
}

namespace detail {

struct ComponentFit {
    ComponentParams params;
    double nll = 0.0;
    bool converged = false;
};

inline ComponentFit fit_component(const Eigen::VectorXd& cond, const Eigen::VectorXd& response, const FitOptions& options) {
    const Eigen::ArrayXd log_y = cond.array().log();
    const Eigen::ArrayXd y = cond.array();
    const Eigen::ArrayXd r = response.array();
    const double sum_log_y = log_y.sum();
    const auto n = static_cast<double>(cond.size());
    constexpr double half_log_2pi = 0.91893853320467274178;

    // x = (alpha, beta, mu, log sd); same value as component_nll.
    auto objective = [&](const Eigen::VectorXd& x) {
        const double sd = std::exp(x[3]);
        const Eigen::ArrayXd scale = (x[1] * log_y).exp();
        const double ss = ((r - x[0] * y - scale * x[2]) / (scale * sd)).square().sum();
        return n * half_log_2pi + x[1] * sum_log_y + n * x[3] + 0.5 * ss;
    };
    Eigen::VectorXd lower(4);
    Eigen::VectorXd upper(4);
    lower << -1.0, options.beta_lower, -std::numeric_limits<double>::infinity(), -30.0;
    upper << 1.0, 1.0, std::numeric_limits<double>::infinity(), 30.0;

    ComponentFit best;
    best.nll = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (const double a0 : options.start_alpha) {
        for (const double b0 : options.start_beta) {
            const Eigen::ArrayXd z = (response.array() - a0 * cond.array()) / (b0 * log_y).exp();
            const double mean = z.mean();
            const double var = (z - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(1, z.size() - 1));
            const double sd = var > 0.0 ? std::sqrt(var) : 1.0;

            Eigen::VectorXd start(4);
            start << a0, b0, mean, std::log(sd);
            Eigen::VectorXd step(4);
            step << 0.1, 0.1, std::max(0.1, 0.25 * sd), 0.1;

            const auto run = minimize_simplex(objective, start, lower, upper, step, options.simplex);
            any_converged = any_converged || run.converged;
            // Strict improvement only, so ties go to the earlier start.
            if (run.value < best.nll) {
                best.nll = run.value;
                best.params = {run.x[0], run.x[1], run.x[2], std::exp(run.x[3])};
                best.converged = run.converged;
            }
        }
    }
    best.converged = any_converged && std::isfinite(best.nll);
    return best;
}

inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& z, const Eigen::VectorXd& mean) {
    const Eigen::MatrixXd centered = z.rowwise() - mean.transpose();
    const double denom = static_cast<double>(std::max<Eigen::Index>(1, z.rows() - 1));
    return (centered.transpose() * centered) / denom;
}

// Adds a ridge proportional to the mean variance until the matrix is PD.
inline Eigen::MatrixXd ensure_positive_definite(Eigen::MatrixXd sigma, const std::string& where) {
    sigma = 0.5 * (sigma + sigma.transpose());
    const double m = static_cast<double>(sigma.rows());
    double ridge = 1e-8 * sigma.trace() / m;
    if (!(ridge > 0.0) || !std::isfinite(ridge)) {
        throw NumericalError(where + ": residual covariance is degenerate");
    }
    for (int attempt = 0; attempt < 60; ++attempt) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
        if (eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() >= 1e-10) {
            return sigma;
        }
        sigma.diagonal().array() += ridge;
        ridge *= 2.0;
    }
    throw NumericalError(where + ": residual covariance could not be made positive-definite");
}

}  // namespace detail

// Two-stage fit on an n x d block of Laplace-margin rows. Stage 1 maximizes
// each component's likelihood over (alpha, beta, mu, sd) inside
// alpha in [-1, 1], beta in [beta_lower, 1]; stage 2 sets mu and Sigma to the
// sample mean and covariance of the standardized residuals.
inline CeFit fit_ce_rows(const Eigen::MatrixXd& rows, const std::string& site, std::size_t cond_var, double q,
                         const FitOptions& options = {}) {
    detail::require(q > 0.5 && q < 1.0, "fit_ce: quantile level must lie in (0.5, 1)");
    detail::require(rows.cols() >= 2, "fit_ce: at least two variables are required");
    detail::require(cond_var < static_cast<std::size_t>(rows.cols()), "fit_ce: conditioning variable out of range");
    const std::string where = "site '" + site + "', conditioning variable " + std::to_string(cond_var + 1);

    const double u = laplace_quantile(q);
    const auto exceed = extract_exceedances(rows, cond_var, u);
    const std::size_t required = std::max<std::size_t>(options.min_exceedances, 2);
    if (exceed.size() < required) {
        throw InsufficientExceedances(exceed.size(), required, where);
    }

    const Eigen::Index m = exceed.others.cols();
    CeFit fit;
    fit.site = site;
    fit.cond_var = cond_var;
    fit.threshold_u = u;
    fit.quantile_q = q;
    fit.n_exceed = exceed.size();
    fit.alpha.resize(m);
    fit.beta.resize(m);
    fit.stage1_mu.resize(m);
    fit.stage1_sd.resize(m);

    std::vector<ComponentParams> best(static_cast<std::size_t>(m));
    bool converged = true;
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto component = detail::fit_component(exceed.cond, exceed.others.col(j), options);
        best[static_cast<std::size_t>(j)] = component.params;
        converged = converged && component.converged;
        fit.alpha[j] = component.params.alpha;
        fit.beta[j] = component.params.beta;
        fit.stage1_mu[j] = component.params.mu;
        fit.stage1_sd[j] = component.params.sd;
        fit.nll += component.nll;
    }
    if (!converged) {
        throw FitNonConvergence(where, std::move(best));
    }

    Eigen::MatrixXd z(exceed.others.rows(), m);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double y = exceed.cond[r];
        for (Eigen::Index j = 0; j < m; ++j) {
            z(r, j) = (exceed.others(r, j) - fit.alpha[j] * y) / std::pow(y, fit.beta[j]);
        }
    }
    fit.mu = z.colwise().mean().transpose();
    fit.sigma = detail::ensure_positive_definite(detail::sample_covariance(z, fit.mu), where);
    return fit;
}

inline CeFit fit_ce(const PanelData& panel, std::size_t site_index, std::size_t cond_var, double q,
                    const FitOptions& options = {}) {
    detail::require(panel.margins == Margins::laplace, "fit_ce: panel must be on Laplace margins");
    detail::require(site_index < panel.n_sites(), "fit_ce: site index out of range");
    return fit_ce_rows(panel.sites[site_index], panel.site_ids[site_index], cond_var, q, options);
}

// Maps (rng, n) to n row indices in [0, n).
using Resampler = std::function<std::vector<std::size_t>(Rng&, std::size_t)>;

inline std::vector<std::size_t> resample_with_replacement(Rng& rng, std::size_t n) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) {
        i = pick(rng);
    }
    return idx;
}

struct BootstrapFailure {
    std::size_t replicate = 0;
    std::string message;
};

struct BootstrapResult {
    std::vector<CeFit> fits;                 // successful replicates, in replicate order
    std::vector<std::size_t> replicate_ids;  // replicate index of each fit
    std::vector<BootstrapFailure> failures;
};

class BootstrapError : public DataError {
  public:
    using DataError::DataError;
};

// Refits on B resamples of the site's time indices. Whole rows are
// resampled, re-ranked to Laplace margins, then refitted. Replicate b uses
// the substream "bootstrap/<b>" of `seed`.
inline BootstrapResult bootstrap_ce(const Eigen::MatrixXd& rows, const std::string& site, std::size_t cond_var, double q,
                                    std::size_t replicates, std::uint64_t seed, const FitOptions& options = {},
                                    const Resampler& resampler = {}, std::size_t threads = 1) {
    detail::require(replicates >= 1, "bootstrap_ce: at least one replicate is required");
    const auto n = static_cast<std::size_t>(rows.rows());
    detail::require(n >= 2, "bootstrap_ce: at least two rows are required");

    std::vector<std::optional<CeFit>> slots(replicates);
    std::vector<std::string> errors(replicates);
    parallel_for(replicates, threads, [&](std::size_t b) {
        Rng rng(derive_seed(seed, "bootstrap", b));
        const auto idx = resampler ? resampler(rng, n) : resample_with_replacement(rng, n);
        Eigen::MatrixXd sample(static_cast<Eigen::Index>(idx.size()), rows.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            sample.row(static_cast<Eigen::Index>(r)) = rows.row(static_cast<Eigen::Index>(idx[r]));
        }
        try {
            slots[b] = fit_ce_rows(to_laplace_rows(sample, "bootstrap replicate " + std::to_string(b)), site, cond_var,
                                   q, options);
        } catch (const Error& e) {
            errors[b] = e.what();
        }
    });

    BootstrapResult result;
    for (std::size_t b = 0; b < replicates; ++b) {
        if (slots[b]) {
            result.fits.push_back(std::move(*slots[b]));
            result.replicate_ids.push_back(b);
        } else {
            result.failures.push_back({b, errors[b]});
        }
    }
    if (2 * result.failures.size() > replicates) {
        throw BootstrapError("bootstrap for site '" + site + "': " + std::to_string(result.failures.size()) + " of " +
                             std::to_string(replicates) + " replicates failed; first failure: " +
                             result.failures.front().message);
    }
    return result;
}

struct StabilityRow {
    double q = 0.0;
    std::optional<std::size_t> replicate;  // empty for the full-data fit
    Eigen::VectorXd alpha;
    Eigen::VectorXd beta;
};

struct StabilityFailure {
    double q = 0.0;
    std::optional<std::size_t> replicate;
    std::string message;
};

struct StabilityTable {
    std::vector<StabilityRow> rows;
    std::vector<StabilityFailure> failures;
};

// Full-data fit plus B bootstrap fits at each threshold level. Failures are
// recorded per level and do not stop the sweep.
inline StabilityTable threshold_stability(const Eigen::MatrixXd& rows, const std::string& site, std::size_t cond_var,
                                          const std::vector<double>& q_grid, std::size_t replicates, std::uint64_t seed,
                                          const FitOptions& options = {}, std::size_t threads = 1) {
    detail::require(!q_grid.empty(), "threshold_stability: empty quantile grid");
    for (std::size_t k = 0; k < q_grid.size(); ++k) {
        detail::require(q_grid[k] > 0.5 && q_grid[k] < 1.0, "threshold_stability: quantile levels must lie in (0.5, 1)");
        detail::require(k == 0 || q_grid[k - 1] < q_grid[k], "threshold_stability: quantile grid must be ascending");
    }

    StabilityTable table;
    for (std::size_t k = 0; k < q_grid.size(); ++k) {
        const double q = q_grid[k];
        try {
            const auto full = fit_ce_rows(rows, site, cond_var, q, options);
            table.rows.push_back({q, std::nullopt, full.alpha, full.beta});
        } catch (const Error& e) {
            table.failures.push_back({q, std::nullopt, e.what()});
            continue;
        }
        if (replicates == 0) {
            continue;
        }
        try {
            const auto boot = bootstrap_ce(rows, site, cond_var, q, replicates, seed, options, {}, threads);
            for (std::size_t b = 0; b < boot.fits.size(); ++b) {
                table.rows.push_back({q, boot.replicate_ids[b], boot.fits[b].alpha, boot.fits[b].beta});
            }
            for (const auto& f : boot.failures) {
                table.failures.push_back({q, f.replicate, f.message});
            }
        } catch (const Error& e) {
            table.failures.push_back({q, std::nullopt, e.what()});
        }
    }
    return table;
}

}  // namespace cecluster
