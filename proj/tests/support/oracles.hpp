#pragma once

// Independent reference computations for the test suites. Nothing here
// calls into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <vector>

#include <boost/math/distributions/laplace.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <Eigen/Dense>

namespace oracle {

// KL(N(m1, v1) || N(m2, v2)) for scalar variances.
inline double kl_1d(double m1, double v1, double m2, double v2) {
    return 0.5 * (std::log(v2 / v1) + (v1 + (m1 - m2) * (m1 - m2)) / v2 - 1.0);
}

inline double normal_logpdf(double x, double m, double v) {
    return -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * (x - m) * (x - m) / v;
}

inline double integrate(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

// JSG from its definition, (1-l) KL(G || H) + l KL(G || H*) with
// G proportional to h^(1-l) h*^l, every integral by quadrature.
inline double jsg_quadrature_1d(double m, double v, double m_star, double v_star, double lambda) {
    const double lo = std::min(m - 14.0 * std::sqrt(v), m_star - 14.0 * std::sqrt(v_star));
    const double hi = std::max(m + 14.0 * std::sqrt(v), m_star + 14.0 * std::sqrt(v_star));
    auto log_unnorm = [&](double x) {
        return (1.0 - lambda) * normal_logpdf(x, m, v) + lambda * normal_logpdf(x, m_star, v_star);
    };
    const double z = integrate([&](double x) { return std::exp(log_unnorm(x)); }, lo, hi);
    return integrate(
        [&](double x) {
            const double log_g = log_unnorm(x) - std::log(z);
            const double g = std::exp(log_g);
            return g * ((1.0 - lambda) * (log_g - normal_logpdf(x, m, v)) +
                        lambda * (log_g - normal_logpdf(x, m_star, v_star)));
        },
        lo, hi);
}

inline double mvn_logpdf(const Eigen::Vector2d& x, const Eigen::Vector2d& m, const Eigen::Matrix2d& c) {
    const Eigen::Vector2d d = x - m;
    return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(c.determinant()) - 0.5 * d.dot(c.inverse() * d);
}

inline double integrate_2d(const std::function<double(double, double)>& f, double ax, double bx, double ay, double by) {
    return integrate([&](double x) { return integrate([&](double y) { return f(x, y); }, ay, by); }, ax, bx);
}

inline double jsg_quadrature_2d(const Eigen::Vector2d& m, const Eigen::Matrix2d& c, const Eigen::Vector2d& m_star,
                                const Eigen::Matrix2d& c_star, double lambda) {
    double box[4];
    for (int axis = 0; axis < 2; ++axis) {
        const double s = std::sqrt(c(axis, axis));
        const double s_star = std::sqrt(c_star(axis, axis));
        box[2 * axis] = std::min(m[axis] - 12.0 * s, m_star[axis] - 12.0 * s_star);
        box[2 * axis + 1] = std::max(m[axis] + 12.0 * s, m_star[axis] + 12.0 * s_star);
    }
    auto log_unnorm = [&](double x, double y) {
        const Eigen::Vector2d p(x, y);
        return (1.0 - lambda) * mvn_logpdf(p, m, c) + lambda * mvn_logpdf(p, m_star, c_star);
    };
    const double z = integrate_2d([&](double x, double y) { return std::exp(log_unnorm(x, y)); }, box[0], box[1], box[2],
                                  box[3]);
    return integrate_2d(
        [&](double x, double y) {
            const Eigen::Vector2d p(x, y);
            const double log_g = log_unnorm(x, y) - std::log(z);
            return std::exp(log_g) * ((1.0 - lambda) * (log_g - mvn_logpdf(p, m, c)) +
                                      lambda * (log_g - mvn_logpdf(p, m_star, c_star)));
        },
        box[0], box[1], box[2], box[3]);
}

// Expected value of f(Y) for Y standard Laplace conditioned on u < Y <= cap.
inline double truncated_exceedance_mean(const std::function<double(double)>& f, double u, double cap) {
    const double mass = 1.0 - std::exp(-(cap - u));
    return integrate([&](double y) { return f(y) * std::exp(-(y - u)); }, u, cap) / mass;
}

// Scalar CE conditional: N(alpha y + y^beta mu, y^(2 beta) var).
inline double ce_jsg_1d(double y, double a, double b, double mu, double var, double a_star, double b_star,
                        double mu_star, double var_star, double lambda) {
    const double m = a * y + std::pow(y, b) * mu;
    const double v = std::pow(y, 2.0 * b) * var;
    const double m_star = a_star * y + std::pow(y, b_star) * mu_star;
    const double v_star = std::pow(y, 2.0 * b_star) * var_star;
    // Closed form for scalar Gaussians, independent of the library's matrix route.
    const double prec = (1.0 - lambda) / v + lambda / v_star;
    const double vg = 1.0 / prec;
    const double mg = vg * ((1.0 - lambda) * m / v + lambda * m_star / v_star);
    return (1.0 - lambda) * kl_1d(mg, vg, m, v) + lambda * kl_1d(mg, vg, m_star, v_star);
}

// Best k-medoid objective over every k-subset of sites.
inline double brute_force_kmedoids(const Eigen::MatrixXd& d, std::size_t k) {
    const auto n = static_cast<std::size_t>(d.rows());
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            double nearest = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < n; ++c) {
                if (pick[c]) {
                    nearest = std::min(nearest, d(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)));
                }
            }
            total += nearest;
        }
        best = std::min(best, total);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

// ARI by counting item pairs: agreements a (together in both), b, c, d.
inline double ari_pair_counting(const std::vector<int>& x, const std::vector<int>& y) {
    double a = 0, b = 0, c = 0, d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const bool sx = x[i] == x[j];
            const bool sy = y[i] == y[j];
            if (sx && sy) {
                a += 1;
            } else if (sx) {
                b += 1;
            } else if (sy) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    const double n = a + b + c + d;
    const double expected = (a + b) * (a + c) / n;
    const double maximum = 0.5 * ((a + b) + (a + c));
    return (a - expected) / (maximum - expected);
}

// Kolmogorov-Smirnov distance of a sample from the standard Laplace law.
inline double ks_laplace(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const boost::math::laplace_distribution<double> lap(0.0, 1.0);
    const auto n = static_cast<double>(x.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = boost::math::cdf(lap, x[i]);
        worst = std::max({worst, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    return worst;
}

inline double ks_normal_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const auto n = static_cast<double>(u.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        worst = std::max({worst, std::abs(u[i] - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - u[i])});
    }
    return worst;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Type-7 quantile.
inline double quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double iqr(const std::vector<double>& v) { return quantile(v, 0.75) - quantile(v, 0.25); }

// Direct transcription of the CE Gaussian negative log-likelihood for one
// component: sum over rows of -log N(x; a y + y^b mu, (y^b sd)^2).
inline double ce_component_nll(const std::vector<double>& y, const std::vector<double>& x, double a, double b,
                               double mu, double sd) {
    double total = 0.0;
    for (std::size_t r = 0; r < y.size(); ++r) {
        const double scale = std::pow(y[r], b) * sd;
        const double z = (x[r] - a * y[r] - std::pow(y[r], b) * mu) / scale;
        total += 0.5 * std::log(2.0 * std::numbers::pi) + std::log(scale) + 0.5 * z * z;
    }
    return total;
}

}  // namespace oracle
