#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cecluster/ce_fit.hpp"
#include "cecluster/divergence.hpp"
#include "cecluster/error.hpp"
#include "cecluster/parallel.hpp"
#include "cecluster/random.hpp"

namespace cecluster {

// D x D matrix of expected divergences between sites, for one conditioning
// variable or aggregated over all of them.
struct DissimMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> site_ids;
    std::optional<std::size_t> cond_var;  // 0-based; empty when aggregated
    std::string fingerprint;

    [[nodiscard]] std::size_t size() const noexcept { return site_ids.size(); }
    [[nodiscard]] bool aggregated() const noexcept { return !cond_var.has_value(); }
    [[nodiscard]] std::string source_label() const {
        return cond_var ? "cond_var:" + std::to_string(*cond_var + 1) : std::string("aggregated");
    }

    // Symmetric to 1e-12, zero diagonal, finite and non-negative.
    void validate() const {
        const auto n = static_cast<Eigen::Index>(site_ids.size());
        detail::require(values.rows() == n && values.cols() == n, "dissimilarity matrix: shape does not match site ids");
        for (Eigen::Index r = 0; r < n; ++r) {
            detail::require(values(r, r) == 0.0, "dissimilarity matrix: non-zero diagonal at site '" +
                                                     site_ids[static_cast<std::size_t>(r)] + "'");
            for (Eigen::Index c = 0; c < n; ++c) {
                const double v = values(r, c);
                detail::require(std::isfinite(v) && v >= 0.0, "dissimilarity matrix: entries must be finite and non-negative");
                detail::require(std::abs(v - values(c, r)) <= 1e-12, "dissimilarity matrix: not symmetric");
            }
        }
    }
};

namespace detail {

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace detail

// Hash of everything that changes matrix entries for a given set of fits.
inline std::string config_fingerprint(double q, const DivergenceConfig& cfg, double y_cap) {
    const std::string canonical = "q=" + detail::format_real(q) + ";lambda=" + detail::format_real(cfg.lambda) +
                                  ";n_mc=" + std::to_string(cfg.n_mc) + ";seed=" + std::to_string(cfg.seed) +
                                  ";y_cap=" + detail::format_real(y_cap);
    return detail::hex64(detail::fnv1a64(canonical));
}

// Upper triangle of expected divergences, mirrored to the lower triangle.
inline DissimMatrix build_matrix(std::span<const CeFit> fits, const DivergenceConfig& cfg, double y_cap,
                                 std::size_t threads = 1) {
    cfg.validate();
    detail::require(!fits.empty(), "build_matrix: no fits");
    const auto& first = fits.front();
    for (const auto& f : fits) {
        detail::require(f.cond_var == first.cond_var && f.quantile_q == first.quantile_q &&
                            f.threshold_u == first.threshold_u,
                        "build_matrix: fit for site '" + f.site + "' does not share the conditioning variable and threshold");
    }

    const std::size_t n = fits.size();
    DissimMatrix out;
    out.cond_var = first.cond_var;
    out.fingerprint = config_fingerprint(first.quantile_q, cfg, y_cap);
    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& f : fits) {
        out.site_ids.push_back(f.site);
    }

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = s + 1; t < n; ++t) {
            pairs.emplace_back(s, t);
        }
    }
    std::vector<double> entries(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t k) {
        const auto [s, t] = pairs[k];
        try {
            entries[k] = expected_jsg(fits[s], fits[t], cfg, y_cap);
        } catch (const ContractError& e) {
            throw ContractError("pair ('" + fits[s].site + "', '" + fits[t].site + "'): " + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError("pair ('" + fits[s].site + "', '" + fits[t].site + "'): " + e.what());
        }
    });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto s = static_cast<Eigen::Index>(pairs[k].first);
        const auto t = static_cast<Eigen::Index>(pairs[k].second);
        out.values(s, t) = entries[k];
        out.values(t, s) = entries[k];
    }
    return out;
}

// Element-wise mean of per-variable matrices over the same sites.
inline DissimMatrix aggregate(std::span<const DissimMatrix> matrices) {
    detail::require(!matrices.empty(), "aggregate: no matrices");
    const auto& first = matrices.front();
    std::vector<std::size_t> seen;
    std::string fingerprints;
    for (const auto& m : matrices) {
        if (m.site_ids != first.site_ids || m.values.rows() != first.values.rows()) {
            throw ContractError("aggregate: matrices cover different site sets");
        }
        detail::require(m.cond_var.has_value(), "aggregate: inputs must be per-variable matrices");
        for (const auto v : seen) {
            detail::require(v != *m.cond_var, "aggregate: conditioning variable " + std::to_string(v + 1) + " repeated");
        }
        seen.push_back(*m.cond_var);
        fingerprints += m.fingerprint + ";";
    }

    DissimMatrix out;
    out.site_ids = first.site_ids;
    out.values = Eigen::MatrixXd::Zero(first.values.rows(), first.values.cols());
    for (const auto& m : matrices) {
        out.values += m.values;
    }
    out.values /= static_cast<double>(matrices.size());
    out.fingerprint = detail::hex64(detail::fnv1a64("aggregate:" + fingerprints));
    return out;
}

}  // namespace cecluster
