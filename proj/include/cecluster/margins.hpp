#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cecluster/error.hpp"
#include "cecluster/panel.hpp"

namespace cecluster {

// Standard Laplace distribution function.
inline double laplace_cdf(double y) noexcept {
    return y < 0.0 ? 0.5 * std::exp(y) : 1.0 - 0.5 * std::exp(-y);
}

// Inverse of laplace_cdf on (0, 1).
inline double laplace_quantile(double q) {
    if (!(q > 0.0 && q < 1.0)) {
        throw ContractError("laplace_quantile: probability " + std::to_string(q) + " outside (0, 1)");
    }
    return q < 0.5 ? std::log(2.0 * q) : -std::log(2.0 * (1.0 - q));
}

// Maps a probability to the standard Laplace scale. Identical to
// laplace_quantile but without the domain check on hot paths.
inline double laplace_from_probability(double p) noexcept {
    return p < 0.5 ? std::log(2.0 * p) : -std::log(2.0 * (1.0 - p));
}

// Density of Y | Y > u for standard Laplace Y and u >= 0: the unit
// exponential shifted to u.
inline double laplace_exceedance_density(double y, double u) {
    detail::require(u >= 0.0, "laplace_exceedance_density: threshold must be non-negative");
    return y > u ? std::exp(-(y - u)) : 0.0;
}

// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) {
            ++j;
        }
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j;
    }
    return ranks;
}

// Plug-in distribution function rank / (n + 1).
inline std::vector<double> empirical_probabilities(std::span<const double> values) {
    auto ranks = average_ranks(values);
    const double denom = static_cast<double>(values.size()) + 1.0;
    for (auto& r : ranks) {
        r /= denom;
    }
    return ranks;
}

// Rank transform of one series to standard Laplace margins. `where` names
// the series in error messages.
inline Eigen::VectorXd to_laplace_series(std::span<const double> values, const std::string& where = "series") {
    if (values.size() < 2) {
        throw DataError(where + ": at least two observations are required");
    }
    for (std::size_t t = 0; t < values.size(); ++t) {
        if (!std::isfinite(values[t])) {
            throw DataError(where + ": missing or non-finite value at time index " + std::to_string(t));
        }
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) {
        throw DataError(where + ": constant series cannot be rank transformed");
    }
    const auto probs = empirical_probabilities(values);
    Eigen::VectorXd out(static_cast<Eigen::Index>(values.size()));
    for (std::size_t t = 0; t < probs.size(); ++t) {
        out[static_cast<Eigen::Index>(t)] = laplace_from_probability(probs[t]);
    }
    return out;
}

// Column-wise rank transform of an n x d block.
inline Eigen::MatrixXd to_laplace_rows(const Eigen::MatrixXd& rows, const std::string& where = "site") {
    Eigen::MatrixXd out(rows.rows(), rows.cols());
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
        const Eigen::VectorXd column = rows.col(j);
        out.col(j) = to_laplace_series(std::span<const double>(column.data(), static_cast<std::size_t>(column.size())),
                                       where + ", variable " + std::to_string(j));
    }
    return out;
}

inline PanelData to_laplace(const PanelData& panel) {
    panel.validate();
    PanelData out;
    out.site_ids = panel.site_ids;
    out.variable_names = panel.variable_names;
    out.margins = Margins::laplace;
    out.sites.reserve(panel.sites.size());
    for (std::size_t s = 0; s < panel.sites.size(); ++s) {
        const auto& block = panel.sites[s];
        Eigen::MatrixXd transformed(block.rows(), block.cols());
        for (Eigen::Index j = 0; j < block.cols(); ++j) {
            const Eigen::VectorXd column = block.col(j);
            transformed.col(j) = to_laplace_series(
                std::span<const double>(column.data(), static_cast<std::size_t>(column.size())),
                "site '" + panel.site_ids[s] + "', variable '" + panel.variable_names[static_cast<std::size_t>(j)] +
                    "'");
        }
        out.sites.push_back(std::move(transformed));
    }
    return out;
}

// Empirical quantile with linear interpolation between order statistics
// (R type 7).
inline double empirical_quantile(std::vector<double> values, double p) {
    detail::require(!values.empty(), "empirical_quantile: empty sample");
    detail::require(p >= 0.0 && p <= 1.0, "empirical_quantile: probability outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// chi(u) = #{F1 > u and F2 > u} / #{F2 > u} with rank-based plug-in
// distribution functions.
inline double empirical_chi(std::span<const double> x1, std::span<const double> x2, double u) {
    detail::require(x1.size() == x2.size(), "empirical_chi: series lengths differ");
    detail::require(u > 0.0 && u < 1.0, "empirical_chi: level u must lie in (0, 1)");
    const auto f1 = empirical_probabilities(x1);
    const auto f2 = empirical_probabilities(x2);
    std::size_t joint = 0;
    std::size_t conditioning = 0;
    for (std::size_t t = 0; t < f2.size(); ++t) {
        if (f2[t] > u) {
            ++conditioning;
            if (f1[t] > u) {
                ++joint;
            }
        }
    }
    if (conditioning == 0) {
        throw DataError("empirical_chi: no exceedances of level " + std::to_string(u) +
                        " in the conditioning series");
    }
    return static_cast<double>(joint) / static_cast<double>(conditioning);
}

}  // namespace cecluster
