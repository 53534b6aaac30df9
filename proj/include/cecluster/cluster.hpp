#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cecluster/dissim.hpp"
#include "cecluster/error.hpp"
#include "cecluster/parallel.hpp"
#include "cecluster/random.hpp"

namespace cecluster {

// Result of PAM. Sites and medoids are 0-based indices; labels are 1..k,
// ordered by medoid index.
struct Clustering {
    std::vector<int> assignments;
    std::vector<std::size_t> medoids;
    double twgss = 0.0;
    std::size_t k = 0;
    std::size_t n_restarts = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    std::size_t iterations = 0;
    // TWGSS of the winning restart's initial medoids.
    double initial_twgss = 0.0;
    std::size_t winning_restart = 0;
};

struct PamOptions {
    std::size_t n_restarts = 20;
    std::size_t max_iter = 100;
    std::size_t threads = 1;
};

namespace detail {

inline void check_dissimilarities(const Eigen::MatrixXd& m) {
    require(m.rows() == m.cols() && m.rows() > 0, "pam: dissimilarity matrix must be square and non-empty");
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        require(m(r, r) == 0.0, "pam: dissimilarity matrix must have a zero diagonal");
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            require(std::isfinite(m(r, c)) && m(r, c) >= 0.0, "pam: dissimilarities must be finite and non-negative");
            require(std::abs(m(r, c) - m(c, r)) <= 1e-12, "pam: dissimilarity matrix must be symmetric");
        }
    }
}

// Cluster index (position in `medoids`) for every site. Medoids keep their
// own cluster; other sites go to the nearest medoid, ties to the smallest
// medoid site index.
inline std::vector<std::size_t> assign_to_medoids(const Eigen::MatrixXd& m, const std::vector<std::size_t>& medoids) {
    const auto n = static_cast<std::size_t>(m.rows());
    std::vector<std::size_t> cluster(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::size_t best = 0;
        bool is_medoid = false;
        for (std::size_t c = 0; c < medoids.size(); ++c) {
            if (medoids[c] == s) {
                best = c;
                is_medoid = true;
                break;
            }
        }
        if (!is_medoid) {
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < medoids.size(); ++c) {
                const double d = m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(medoids[c]));
                if (d < best_d || (d == best_d && medoids[c] < medoids[best])) {
                    best_d = d;
                    best = c;
                }
            }
        }
        cluster[s] = best;
    }
    return cluster;
}

inline double total_within(const Eigen::MatrixXd& m, const std::vector<std::size_t>& cluster,
                           const std::vector<std::size_t>& medoids) {
    double total = 0.0;
    for (std::size_t s = 0; s < cluster.size(); ++s) {
        total += m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(medoids[cluster[s]]));
    }
    return total;
}

struct PamRun {
    std::vector<std::size_t> cluster;
    std::vector<std::size_t> medoids;
    double twgss = 0.0;
    double initial_twgss = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

inline PamRun run_pam(const Eigen::MatrixXd& m, std::vector<std::size_t> medoids, std::size_t max_iter) {
    PamRun run;
    auto cluster = assign_to_medoids(m, medoids);
    run.initial_twgss = total_within(m, cluster, medoids);
    double previous = run.initial_twgss;
    const std::size_t n = cluster.size();

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        ++run.iterations;
        // Update: the member minimizing the within-cluster sum. Sums equal up
        // to rounding count as ties and go to the smallest index.
        for (std::size_t c = 0; c < medoids.size(); ++c) {
            double best_sum = std::numeric_limits<double>::infinity();
            std::size_t best_p = medoids[c];
            for (std::size_t p = 0; p < n; ++p) {
                if (cluster[p] != c) {
                    continue;
                }
                double sum = 0.0;
                for (std::size_t q = 0; q < n; ++q) {
                    if (cluster[q] == c) {
                        sum += m(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
                    }
                }
                if (sum < best_sum - 1e-12 * std::max(1.0, std::abs(sum))) {
                    best_sum = sum;
                    best_p = p;
                }
            }
            medoids[c] = best_p;
        }
        auto next = assign_to_medoids(m, medoids);
        const double current = total_within(m, next, medoids);
        if (current > previous + 1e-12 * std::max(1.0, std::abs(previous))) {
            throw NumericalError("pam: within-group total increased between iterations");
        }
        previous = current;
        const bool changed = next != cluster;
        cluster = std::move(next);
        if (!changed) {
            run.converged = true;
            break;
        }
    }
    run.cluster = std::move(cluster);
    run.medoids = std::move(medoids);
    run.twgss = total_within(m, run.cluster, run.medoids);
    return run;
}

// Relabels clusters 1..k in order of increasing medoid index.
inline Clustering to_clustering(const PamRun& run) {
    std::vector<std::size_t> order(run.medoids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return run.medoids[a] < run.medoids[b]; });
    std::vector<int> label_of(run.medoids.size());
    Clustering out;
    out.k = run.medoids.size();
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        label_of[order[rank]] = static_cast<int>(rank + 1);
        out.medoids.push_back(run.medoids[order[rank]]);
    }
    out.assignments.reserve(run.cluster.size());
    for (const auto c : run.cluster) {
        out.assignments.push_back(label_of[c]);
    }
    out.twgss = run.twgss;
    out.converged = run.converged;
    out.iterations = run.iterations;
    out.initial_twgss = run.initial_twgss;
    return out;
}

}  // namespace detail

// Sum over sites of the dissimilarity to their cluster's medoid.
inline double twgss(const Eigen::MatrixXd& m, const Clustering& clustering) {
    const auto n = static_cast<std::size_t>(m.rows());
    detail::require(clustering.assignments.size() == n, "twgss: assignment length does not match the matrix");
    detail::require(clustering.medoids.size() == clustering.k, "twgss: expected one medoid per cluster");
    double total = 0.0;
    for (std::size_t c = 0; c < clustering.k; ++c) {
        const auto medoid = clustering.medoids[c];
        detail::require(medoid < n, "twgss: medoid index out of range");
        if (clustering.assignments[medoid] != static_cast<int>(c + 1)) {
            throw ContractError("twgss: medoid " + std::to_string(medoid) + " lies outside its cluster " +
                                std::to_string(c + 1));
        }
    }
    for (std::size_t s = 0; s < n; ++s) {
        const int label = clustering.assignments[s];
        detail::require(label >= 1 && static_cast<std::size_t>(label) <= clustering.k, "twgss: label out of range");
        total += m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(clustering.medoids[static_cast<std::size_t>(label - 1)]));
    }
    return total;
}

inline double twgss(const DissimMatrix& m, const Clustering& clustering) { return twgss(m.values, clustering); }

// One PAM run from the given initial medoids.
inline Clustering pam_from_medoids(const Eigen::MatrixXd& m, std::vector<std::size_t> initial_medoids,
                                   std::size_t max_iter = 100) {
    detail::check_dissimilarities(m);
    const auto n = static_cast<std::size_t>(m.rows());
    detail::require(!initial_medoids.empty() && initial_medoids.size() <= n, "pam: need between 1 and D medoids");
    auto sorted = initial_medoids;
    std::sort(sorted.begin(), sorted.end());
    detail::require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end() && sorted.back() < n,
                    "pam: initial medoids must be distinct valid site indices");
    auto out = detail::to_clustering(detail::run_pam(m, std::move(initial_medoids), max_iter));
    out.n_restarts = 1;
    return out;
}

// Best of n_restarts PAM runs from uniformly random distinct initial
// medoids. Restart r draws its medoids from substream "pam/<r>"; the lowest
// TWGSS wins, ties to the lowest restart index.
inline Clustering pam(const Eigen::MatrixXd& m, std::size_t k, std::uint64_t seed, const PamOptions& options = {}) {
    detail::check_dissimilarities(m);
    const auto n = static_cast<std::size_t>(m.rows());
    if (k < 1 || k > n) {
        throw ContractError("pam: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
    }
    detail::require(options.n_restarts >= 1, "pam: at least one restart is required");
    detail::require(options.max_iter >= 1, "pam: max_iter must be positive");

    std::vector<detail::PamRun> runs(options.n_restarts);
    parallel_for(options.n_restarts, options.threads, [&](std::size_t r) {
        Rng rng(derive_seed(seed, "pam", r));
        std::vector<std::size_t> sites(n);
        std::iota(sites.begin(), sites.end(), std::size_t{0});
        // Partial Fisher-Yates: the first k entries are a uniform k-subset.
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(sites[i], sites[pick(rng)]);
        }
        sites.resize(k);
        runs[r] = detail::run_pam(m, std::move(sites), options.max_iter);
    });

    std::size_t winner = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].twgss < runs[winner].twgss) {
            winner = r;
        }
    }
    auto out = detail::to_clustering(runs[winner]);
    out.n_restarts = options.n_restarts;
    out.seed = seed;
    out.winning_restart = winner;
    for (std::size_t c = 0; c < out.k; ++c) {
        if (out.assignments[out.medoids[c]] != static_cast<int>(c + 1)) {
            throw NumericalError("pam: medoid left its own cluster");
        }
    }
    return out;
}

inline Clustering pam(const DissimMatrix& m, std::size_t k, std::uint64_t seed, const PamOptions& options = {}) {
    return pam(m.values, k, seed, options);
}

struct ElbowPoint {
    std::size_t k = 0;
    double twgss = 0.0;
};

struct ElbowCurve {
    std::vector<ElbowPoint> points;
    // k maximizing twgss(k-1) - 2 twgss(k) + twgss(k+1) over interior
    // points of consecutive k; smallest k on ties.
    std::optional<std::size_t> suggested_k;
};

inline std::optional<std::size_t> suggest_elbow(const std::vector<ElbowPoint>& points) {
    std::optional<std::size_t> best;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < points.size(); ++i) {
        if (points[i - 1].k + 1 != points[i].k || points[i].k + 1 != points[i + 1].k) {
            continue;
        }
        const double second = points[i - 1].twgss - 2.0 * points[i].twgss + points[i + 1].twgss;
        if (second > best_value) {
            best_value = second;
            best = points[i].k;
        }
    }
    return best;
}

inline ElbowCurve elbow_curve(const Eigen::MatrixXd& m, std::vector<std::size_t> k_range, std::uint64_t seed,
                              const PamOptions& options = {}) {
    detail::require(!k_range.empty(), "elbow_curve: empty k range");
    std::sort(k_range.begin(), k_range.end());
    k_range.erase(std::unique(k_range.begin(), k_range.end()), k_range.end());
    ElbowCurve curve;
    for (const auto k : k_range) {
        curve.points.push_back({k, pam(m, k, seed, options).twgss});
    }
    curve.suggested_k = suggest_elbow(curve.points);
    return curve;
}

inline ElbowCurve elbow_curve(const DissimMatrix& m, std::vector<std::size_t> k_range, std::uint64_t seed,
                              const PamOptions& options = {}) {
    return elbow_curve(m.values, std::move(k_range), seed, options);
}

// Hubert-Arabie adjusted Rand index from the contingency table of the two
// labelings. Returns 1 when both partitions are identical, including the
// degenerate case where the expected index equals its maximum.
template <typename LabelA, typename LabelB>
double adjusted_rand_index(std::span<const LabelA> a, std::span<const LabelB> b) {
    if (a.size() != b.size()) {
        throw ContractError("adjusted_rand_index: labelings have different lengths");
    }
    detail::require(a.size() >= 2, "adjusted_rand_index: at least two items are required");

    std::map<std::pair<LabelA, LabelB>, std::size_t> table;
    std::map<LabelA, std::size_t> rows;
    std::map<LabelB, std::size_t> cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++table[{a[i], b[i]}];
        ++rows[a[i]];
        ++cols[b[i]];
    }
    auto choose2 = [](std::size_t x) { return 0.5 * static_cast<double>(x) * (static_cast<double>(x) - 1.0); };
    double index = 0.0;
    for (const auto& [key, count] : table) {
        index += choose2(count);
    }
    double sum_rows = 0.0;
    for (const auto& [key, count] : rows) {
        sum_rows += choose2(count);
    }
    double sum_cols = 0.0;
    for (const auto& [key, count] : cols) {
        sum_cols += choose2(count);
    }
    const double expected = sum_rows * sum_cols / choose2(a.size());
    const double maximum = 0.5 * (sum_rows + sum_cols);
    if (maximum == expected) {
        return 1.0;
    }
    return (index - expected) / (maximum - expected);
}

template <typename LabelA, typename LabelB>
double adjusted_rand_index(const std::vector<LabelA>& a, const std::vector<LabelB>& b) {
    return adjusted_rand_index(std::span<const LabelA>(a), std::span<const LabelB>(b));
}

}  // namespace cecluster
