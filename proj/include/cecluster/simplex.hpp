#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "cecluster/error.hpp"

namespace cecluster {

struct SimplexOptions {
    // A run is converged when a fresh simplex cycle, started from the best
    // point of the previous cycle, improves the objective by less than this.
    double f_tolerance = 1e-8;
    // Inner cycle stops once the simplex spread in f and x falls below these.
    double inner_f_tolerance = 1e-12;
    double inner_x_tolerance = 1e-9;
    std::size_t max_evaluations = 20000;
    std::size_t max_cycles = 50;
};

struct SimplexResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    std::size_t cycles = 0;
    bool converged = false;
};

namespace detail {

inline Eigen::VectorXd project_to_box(Eigen::VectorXd x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    return x.cwiseMax(lower).cwiseMin(upper);
}

}  // namespace detail

// Nelder-Mead search inside the box [lower, upper]. Trial points are
// projected onto the box; each cycle restarts from a fresh simplex around
// the incumbent so a collapsed simplex cannot stall the search.
// Non-finite objective values are treated as +infinity.
template <typename Objective>
SimplexResult minimize_simplex(Objective&& objective, const Eigen::VectorXd& start, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper, const Eigen::VectorXd& step,
                               const SimplexOptions& options = {}) {
    const Eigen::Index n = start.size();
    detail::require(n > 0, "minimize_simplex: empty parameter vector");
    detail::require(lower.size() == n && upper.size() == n && step.size() == n,
                    "minimize_simplex: bound and step sizes must match the start point");
    detail::require((lower.array() <= upper.array()).all(), "minimize_simplex: lower bound exceeds upper bound");

    SimplexResult result;
    auto evaluate = [&](const Eigen::VectorXd& x) {
        ++result.evaluations;
        const double v = objective(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    constexpr double reflect = 1.0;
    constexpr double expand = 2.0;
    constexpr double contract = 0.5;
    constexpr double shrink = 0.5;

    Eigen::VectorXd best = detail::project_to_box(start, lower, upper);
    double best_value = evaluate(best);

    std::vector<Eigen::VectorXd> vertices(static_cast<std::size_t>(n + 1));
    std::vector<double> values(static_cast<std::size_t>(n + 1));
    std::vector<std::size_t> order(static_cast<std::size_t>(n + 1));

    for (std::size_t cycle = 0; cycle < options.max_cycles; ++cycle) {
        ++result.cycles;
        const double cycle_start_value = best_value;

        vertices[0] = best;
        values[0] = best_value;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd v = best;
            double h = step[i];
            if (v[i] + h > upper[i]) {
                h = -h;
            }
            v[i] = std::clamp(v[i] + h, lower[i], upper[i]);
            vertices[static_cast<std::size_t>(i + 1)] = v;
            values[static_cast<std::size_t>(i + 1)] = evaluate(v);
        }

        for (;;) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
            const std::size_t lo = order.front();
            const std::size_t hi = order.back();
            const std::size_t second_hi = order[order.size() - 2];

            double diameter = 0.0;
            for (const auto& v : vertices) {
                diameter = std::max(diameter, (v - vertices[lo]).cwiseAbs().maxCoeff());
            }
            const double spread = values[hi] - values[lo];
            if ((spread <= options.inner_f_tolerance && diameter <= options.inner_x_tolerance * 1e3) ||
                diameter <= options.inner_x_tolerance || result.evaluations >= options.max_evaluations) {
                break;
            }

            Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
            for (std::size_t i = 0; i < vertices.size(); ++i) {
                if (i != hi) {
                    centroid += vertices[i];
                }
            }
            centroid /= static_cast<double>(n);

            const Eigen::VectorXd reflected =
                detail::project_to_box(centroid + reflect * (centroid - vertices[hi]), lower, upper);
            const double reflected_value = evaluate(reflected);

            if (reflected_value < values[lo]) {
                const Eigen::VectorXd expanded =
                    detail::project_to_box(centroid + expand * (centroid - vertices[hi]), lower, upper);
                const double expanded_value = evaluate(expanded);
                if (expanded_value < reflected_value) {
                    vertices[hi] = expanded;
                    values[hi] = expanded_value;
                } else {
                    vertices[hi] = reflected;
                    values[hi] = reflected_value;
                }
                continue;
            }
            if (reflected_value < values[second_hi]) {
                vertices[hi] = reflected;
                values[hi] = reflected_value;
                continue;
            }

            const bool outside = reflected_value < values[hi];
            const Eigen::VectorXd contracted =
                outside ? Eigen::VectorXd(centroid + contract * (reflected - centroid))
                        : Eigen::VectorXd(centroid + contract * (vertices[hi] - centroid));
            const double contracted_value = evaluate(contracted);
            if (contracted_value < std::min(reflected_value, values[hi])) {
                vertices[hi] = contracted;
                values[hi] = contracted_value;
                continue;
            }

            for (std::size_t i = 0; i < vertices.size(); ++i) {
                if (i != lo) {
                    vertices[i] = vertices[lo] + shrink * (vertices[i] - vertices[lo]);
                    values[i] = evaluate(vertices[i]);
                }
            }
        }

        for (std::size_t i = 0; i < vertices.size(); ++i) {
            if (values[i] < best_value) {
                best_value = values[i];
                best = vertices[i];
            }
        }
        if (result.evaluations >= options.max_evaluations) {
            break;
        }
        if (std::isfinite(best_value) && cycle_start_value - best_value < options.f_tolerance && cycle > 0) {
            result.converged = true;
            break;
        }
    }

    result.x = best;
    result.value = best_value;
    return result;
}

}  // namespace cecluster
