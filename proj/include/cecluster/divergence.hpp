#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "cecluster/ce_fit.hpp"
#include "cecluster/error.hpp"
#include "cecluster/random.hpp"

namespace cecluster {

// Multivariate Gaussian N(mean, cov).
struct MvnParams {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    [[nodiscard]] Eigen::Index dim() const noexcept { return mean.size(); }
};

struct DivergenceConfig {
    double lambda = 0.5;
    std::size_t n_mc = 10000;
    double y_cap_quantile = 0.99;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require(lambda >= 0.0 && lambda <= 1.0, "divergence config: lambda must lie in [0, 1]");
        detail::require(n_mc >= 1, "divergence config: n_mc must be positive");
        detail::require(y_cap_quantile > 0.0 && y_cap_quantile < 1.0,
                        "divergence config: y_cap_quantile must lie in (0, 1)");
    }
};

namespace detail {

struct PdFactor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_det = 0.0;
};

inline PdFactor factor_pd(const Eigen::MatrixXd& cov, const char* name) {
    require(cov.rows() == cov.cols() && cov.rows() > 0, std::string(name) + ": covariance must be square and non-empty");
    const double scale = cov.cwiseAbs().maxCoeff();
    if (!std::isfinite(scale) || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw ContractError(std::string(name) + ": covariance is not symmetric");
    }
    PdFactor f;
    f.llt.compute(cov);
    if (f.llt.info() != Eigen::Success) {
        throw NumericalError(std::string(name) + ": covariance is not positive-definite");
    }
    const auto diag = f.llt.matrixLLT().diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (!(diag[i] > 0.0)) {
            throw NumericalError(std::string(name) + ": covariance is not positive-definite");
        }
        f.log_det += 2.0 * std::log(diag[i]);
    }
    return f;
}

inline void require_same_dim(const MvnParams& h, const MvnParams& h_star) {
    require(h.mean.size() == h.cov.rows() && h_star.mean.size() == h_star.cov.rows(),
            "mvn: mean and covariance dimensions differ");
    require(h.dim() == h_star.dim(), "mvn: dimension mismatch between the two distributions");
}

// Values within rounding of zero are clamped; anything more negative
// signals a numerical problem.
inline double clamp_nonnegative(double value, const char* name) {
    if (value < 0.0) {
        if (value < -1e-12) {
            throw NumericalError(std::string(name) + ": negative divergence " + std::to_string(value));
        }
        return 0.0;
    }
    return value;
}

}  // namespace detail

// KL(h || h_star) in closed form.
inline double kl_mvn(const MvnParams& h, const MvnParams& h_star) {
    detail::require_same_dim(h, h_star);
    const auto f = detail::factor_pd(h.cov, "kl_mvn first argument");
    const auto f_star = detail::factor_pd(h_star.cov, "kl_mvn second argument");
    const Eigen::VectorXd delta = h_star.mean - h.mean;
    const double trace_term = f_star.llt.solve(h.cov).trace();
    const double quad = delta.dot(f_star.llt.solve(delta));
    const auto m = static_cast<double>(h.dim());
    return detail::clamp_nonnegative(0.5 * (trace_term + quad - m + f_star.log_det - f.log_det), "kl_mvn");
}

// Normalized weighted geometric mean h^(1-lambda) h_star^lambda, which is
// Gaussian with precision (1-lambda) P + lambda P_star.
inline MvnParams geometric_mean_mvn(const MvnParams& h, const MvnParams& h_star, double lambda) {
    detail::require_same_dim(h, h_star);
    detail::require(lambda >= 0.0 && lambda <= 1.0, "geometric_mean_mvn: lambda must lie in [0, 1]");
    const auto f = detail::factor_pd(h.cov, "geometric_mean_mvn first argument");
    const auto f_star = detail::factor_pd(h_star.cov, "geometric_mean_mvn second argument");
    if (lambda == 0.0) {
        return h;
    }
    if (lambda == 1.0) {
        return h_star;
    }
    const Eigen::Index m = h.dim();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd precision = f.llt.solve(identity);
    const Eigen::MatrixXd precision_star = f_star.llt.solve(identity);
    Eigen::MatrixXd blend = (1.0 - lambda) * precision + lambda * precision_star;
    blend = 0.5 * (blend + blend.transpose());
    const auto f_blend = detail::factor_pd(blend, "geometric_mean_mvn blended precision");

    MvnParams g;
    g.cov = f_blend.llt.solve(identity);
    g.cov = 0.5 * (g.cov + g.cov.transpose());
    g.mean = f_blend.llt.solve((1.0 - lambda) * f.llt.solve(h.mean) + lambda * f_star.llt.solve(h_star.mean));
    return g;
}

// Skew-geometric Jensen-Shannon divergence in closed form, rearranged so
// that only B = (1-lambda) cov_star + lambda cov needs factorizing:
//
//   JSG = 1/2 [ lambda (1-lambda) d^T B^-1 d + log|B| - lambda log|cov| - (1-lambda) log|cov_star| ]
//
// with d = mean - mean_star. At lambda = 1/2 the result is bit-for-bit
// symmetric in its arguments.
inline double jsg_mvn(const MvnParams& h, const MvnParams& h_star, double lambda) {
    detail::require_same_dim(h, h_star);
    detail::require(lambda >= 0.0 && lambda <= 1.0, "jsg_mvn: lambda must lie in [0, 1]");
    const auto f = detail::factor_pd(h.cov, "jsg_mvn first argument");
    const auto f_star = detail::factor_pd(h_star.cov, "jsg_mvn second argument");
    const Eigen::MatrixXd blend = (1.0 - lambda) * h_star.cov + lambda * h.cov;
    const auto f_blend = detail::factor_pd(blend, "jsg_mvn blended covariance");
    const Eigen::VectorXd delta = h.mean - h_star.mean;
    const double quad = delta.dot(f_blend.llt.solve(delta));
    const double log_dets = lambda * f.log_det + (1.0 - lambda) * f_star.log_det;
    return detail::clamp_nonnegative(0.5 * (lambda * (1.0 - lambda) * quad + (f_blend.log_det - log_dets)), "jsg_mvn");
}

// Same divergence through its definition: KL from the geometric mean to
// each argument, weighted (1-lambda) and lambda.
inline double jsg_mvn_via_kl(const MvnParams& h, const MvnParams& h_star, double lambda) {
    const auto g = geometric_mean_mvn(h, h_star, lambda);
    return (1.0 - lambda) * kl_mvn(g, h) + lambda * kl_mvn(g, h_star);
}

// Conditional law of the non-conditioning variables given Y_i = y.
inline MvnParams conditional_mvn(const CeFit& fit, double y) {
    if (!(y > fit.threshold_u)) {
        throw ContractError("conditional_mvn: y = " + std::to_string(y) + " does not exceed the threshold " +
                            std::to_string(fit.threshold_u));
    }
    const Eigen::VectorXd scale = fit.beta.unaryExpr([y](double b) { return std::pow(y, b); });
    MvnParams out;
    out.mean = fit.alpha * y + scale.cwiseProduct(fit.mu);
    out.cov = scale.asDiagonal() * fit.sigma * scale.asDiagonal();
    return out;
}

struct MonteCarloEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t draws = 0;
};

namespace detail {

inline void require_comparable(const CeFit& s, const CeFit& t) {
    require(s.cond_var == t.cond_var, "expected_jsg: fits condition on different variables");
    require(s.quantile_q == t.quantile_q && s.threshold_u == t.threshold_u,
            "expected_jsg: fits use different thresholds");
    require(s.dim() == t.dim() && s.dim() > 0, "expected_jsg: fits have different dimensions");
}

// Draw-stream label shared by (s, t) and (t, s).
inline std::string pair_stream_label(const CeFit& s, const CeFit& t) {
    const auto& a = std::min(s.site, t.site);
    const auto& b = std::max(s.site, t.site);
    return "pair/" + std::to_string(s.cond_var) + "/" + a + "\x1f" + b;
}

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 8, 8>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 8, 1>;

// jsg_mvn(conditional_mvn(s, y), conditional_mvn(t, y), lambda) specialized
// for repeated evaluation over y: log|D Sigma D| = log|Sigma| + 2 sum(beta) log y
// and working storage lives on the stack for dimensions up to 8.
class ConditionalJsgKernel {
  public:
    ConditionalJsgKernel(const CeFit& s, const CeFit& t, double lambda)
        : s_(s), t_(t), lambda_(lambda),
          log_det_s_(factor_pd(s.sigma, "expected_jsg first fit").log_det),
          log_det_t_(factor_pd(t.sigma, "expected_jsg second fit").log_det),
          beta_sum_s_(s.beta.sum()), beta_sum_t_(t.beta.sum()),
          identical_(s.alpha == t.alpha && s.beta == t.beta && s.mu == t.mu && s.sigma == t.sigma) {}

    [[nodiscard]] double operator()(double y) const {
        if (identical_) {
            return 0.0;
        }
        const Eigen::Index m = s_.dim();
        if (m > 8) {
            return jsg_mvn(conditional_mvn(s_, y), conditional_mvn(t_, y), lambda_);
        }
        const double log_y = std::log(y);
        SmallVector scale_s(m), scale_t(m), delta(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            scale_s[j] = std::exp(s_.beta[j] * log_y);
            scale_t[j] = std::exp(t_.beta[j] * log_y);
            delta[j] = (s_.alpha[j] * y + scale_s[j] * s_.mu[j]) - (t_.alpha[j] * y + scale_t[j] * t_.mu[j]);
        }
        SmallMatrix blend(m, m);
        for (Eigen::Index c = 0; c < m; ++c) {
            for (Eigen::Index r = 0; r < m; ++r) {
                const double cov_s = scale_s[r] * s_.sigma(r, c) * scale_s[c];
                const double cov_t = scale_t[r] * t_.sigma(r, c) * scale_t[c];
                blend(r, c) = (1.0 - lambda_) * cov_t + lambda_ * cov_s;
            }
        }
        const Eigen::LLT<SmallMatrix> llt(blend);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("expected_jsg: blended conditional covariance is not positive-definite");
        }
        double log_det_blend = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            log_det_blend += 2.0 * std::log(llt.matrixLLT()(j, j));
        }
        const double quad = delta.dot(llt.solve(delta));
        const double log_det_s = log_det_s_ + 2.0 * beta_sum_s_ * log_y;
        const double log_det_t = log_det_t_ + 2.0 * beta_sum_t_ * log_y;
        const double log_dets = lambda_ * log_det_s + (1.0 - lambda_) * log_det_t;
        return clamp_nonnegative(0.5 * (lambda_ * (1.0 - lambda_) * quad + (log_det_blend - log_dets)), "expected_jsg");
    }

  private:
    const CeFit& s_;
    const CeFit& t_;
    double lambda_;
    double log_det_s_;
    double log_det_t_;
    double beta_sum_s_;
    double beta_sum_t_;
    bool identical_;
};

}  // namespace detail

// Draw from the standard Laplace exceedance law above u truncated to
// (u, y_cap], by inversion: y = u - log(1 - U (1 - exp(-(y_cap - u)))).
inline double sample_truncated_exceedance(double u, double y_cap, Rng& rng) {
    const double mass = -std::expm1(-(y_cap - u));
    return u - std::log1p(-uniform_open01(rng) * mass);
}

// Monte Carlo estimate of the expected conditional divergence between two
// fits, averaging over the truncated exceedance law of the conditioning
// variable. The draw stream is keyed by the unordered site pair.
inline MonteCarloEstimate expected_jsg_estimate(const CeFit& fit_s, const CeFit& fit_t, const DivergenceConfig& cfg,
                                                double y_cap) {
    cfg.validate();
    detail::require_comparable(fit_s, fit_t);
    detail::require(y_cap > fit_s.threshold_u, "expected_jsg: y_cap must exceed the threshold");

    const detail::ConditionalJsgKernel kernel(fit_s, fit_t, cfg.lambda);
    Rng rng = make_rng(cfg.seed, detail::pair_stream_label(fit_s, fit_t));
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < cfg.n_mc; ++k) {
        const double y = sample_truncated_exceedance(fit_s.threshold_u, y_cap, rng);
        const double v = kernel(y);
        sum += v;
        sum_sq += v * v;
    }
    const auto n = static_cast<double>(cfg.n_mc);
    MonteCarloEstimate est;
    est.draws = cfg.n_mc;
    est.value = sum / n;
    if (cfg.n_mc > 1) {
        const double var = std::max(0.0, (sum_sq - n * est.value * est.value) / (n - 1.0));
        est.std_error = std::sqrt(var / n);
    }
    return est;
}

inline double expected_jsg(const CeFit& fit_s, const CeFit& fit_t, const DivergenceConfig& cfg, double y_cap) {
    return expected_jsg_estimate(fit_s, fit_t, cfg, y_cap).value;
}

}  // namespace cecluster
