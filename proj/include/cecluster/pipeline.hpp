#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cecluster/ce_fit.hpp"
#include "cecluster/cluster.hpp"
#include "cecluster/copulas.hpp"
#include "cecluster/dissim.hpp"
#include "cecluster/divergence.hpp"
#include "cecluster/margins.hpp"
#include "cecluster/panel.hpp"
#include "cecluster/parallel.hpp"

namespace cecluster {

struct FitFailure {
    std::string site;
    std::size_t cond_var = 0;
    std::string message;
    ExitCode code = ExitCode::numerical;
};

// Fits for every (site, conditioning variable), ordered conditioning
// variable first, then site.
struct FitSet {
    std::vector<CeFit> fits;
    std::vector<FitFailure> failures;

    [[nodiscard]] std::vector<CeFit> for_variable(std::size_t cond_var) const {
        std::vector<CeFit> out;
        for (const auto& f : fits) {
            if (f.cond_var == cond_var) {
                out.push_back(f);
            }
        }
        return out;
    }
};

inline FitSet fit_panel(const PanelData& panel, double q, const FitOptions& options = {}, std::size_t threads = 1) {
    detail::require(panel.margins == Margins::laplace, "fit_panel: panel must be on Laplace margins");
    panel.validate();
    const std::size_t d = panel.n_vars();
    const std::size_t n_sites = panel.n_sites();
    std::vector<std::optional<CeFit>> slots(d * n_sites);
    std::vector<FitFailure> errors(d * n_sites);
    parallel_for(slots.size(), threads, [&](std::size_t k) {
        const std::size_t i = k / n_sites;
        const std::size_t s = k % n_sites;
        try {
            slots[k] = fit_ce(panel, s, i, q, options);
        } catch (const Error& e) {
            errors[k] = {panel.site_ids[s], i, e.what(), e.exit_code()};
        }
    });
    FitSet out;
    for (std::size_t k = 0; k < slots.size(); ++k) {
        if (slots[k]) {
            out.fits.push_back(std::move(*slots[k]));
        } else {
            out.failures.push_back(std::move(errors[k]));
        }
    }
    return out;
}

// Upper truncation point for the expected divergence: the empirical
// p-quantile of the conditioning variable pooled over all sites.
inline double pooled_y_cap(const PanelData& panel, std::size_t cond_var, double p) {
    detail::require(cond_var < panel.n_vars(), "pooled_y_cap: variable out of range");
    std::vector<double> pooled;
    pooled.reserve(panel.n_sites() * panel.n_times());
    for (const auto& site : panel.sites) {
        const auto column = site.col(static_cast<Eigen::Index>(cond_var));
        pooled.insert(pooled.end(), column.data(), column.data() + column.size());
    }
    return empirical_quantile(std::move(pooled), p);
}

// One matrix per conditioning variable followed by their aggregate.
inline std::vector<DissimMatrix> build_dissimilarities(const PanelData& panel, const FitSet& fits,
                                                       const DivergenceConfig& cfg, std::size_t threads = 1) {
    std::vector<DissimMatrix> out;
    for (std::size_t i = 0; i < panel.n_vars(); ++i) {
        const auto var_fits = fits.for_variable(i);
        if (var_fits.size() != panel.n_sites()) {
            throw DataError("dissimilarity for variable '" + panel.variable_names[i] + "': " +
                            std::to_string(panel.n_sites() - var_fits.size()) + " site fits are missing");
        }
        out.push_back(build_matrix(var_fits, cfg, pooled_y_cap(panel, i, cfg.y_cap_quantile), threads));
    }
    out.push_back(aggregate(out));
    return out;
}

struct PipelineConfig {
    double q = 0.85;
    DivergenceConfig divergence{};
    std::size_t k = 2;
    std::vector<std::size_t> k_range;  // optional elbow sweep
    PamOptions pam{};
    FitOptions fit{};
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct PipelineResult {
    FitSet fits;
    std::vector<DissimMatrix> matrices;  // per variable, then aggregated
    Clustering clustering;
    std::optional<ElbowCurve> elbow;

    [[nodiscard]] const DissimMatrix& aggregated() const { return matrices.back(); }
};

// fit -> dissimilarity -> PAM on the aggregated matrix. The run seed drives
// both the Monte Carlo streams and the PAM restarts.
inline PipelineResult run_pipeline(const PanelData& panel, const PipelineConfig& config) {
    PipelineResult result;
    result.fits = fit_panel(panel, config.q, config.fit, config.threads);
    if (!result.fits.failures.empty()) {
        const auto& f = result.fits.failures.front();
        if (f.code == ExitCode::data) {
            throw DataError("fit failed: " + f.message);
        }
        throw NumericalError("fit failed: " + f.message);
    }
    auto div = config.divergence;
    div.seed = config.seed;
    result.matrices = build_dissimilarities(panel, result.fits, div, config.threads);
    auto pam_options = config.pam;
    pam_options.threads = config.threads;
    result.clustering = pam(result.aggregated(), config.k, config.seed, pam_options);
    if (!config.k_range.empty()) {
        result.elbow = elbow_curve(result.aggregated(), config.k_range, config.seed, pam_options);
    }
    return result;
}

// Concatenates the rows of the given sites (already on Laplace margins).
inline Eigen::MatrixXd pool_rows(const PanelData& panel, const std::vector<std::size_t>& sites) {
    Eigen::Index total = 0;
    for (const auto s : sites) {
        total += panel.sites[s].rows();
    }
    Eigen::MatrixXd out(total, static_cast<Eigen::Index>(panel.n_vars()));
    Eigen::Index offset = 0;
    for (const auto s : sites) {
        out.middleRows(offset, panel.sites[s].rows()) = panel.sites[s];
        offset += panel.sites[s].rows();
    }
    return out;
}

struct ReplicateOutcome {
    double ari = 0.0;
    Clustering clustering;
    std::vector<int> truth;
};

// Simulate a design, run the pipeline with k = number of true clusters, and
// score the clustering against the truth.
inline ReplicateOutcome run_replicate(const MixtureDesign& design, PipelineConfig config) {
    const auto sim = sample_mixture_panel(design, config.threads);
    config.k = design.cluster_sizes.size();
    const auto result = run_pipeline(sim.panel, config);
    ReplicateOutcome out;
    out.truth = sim.labels;
    out.clustering = result.clustering;
    out.ari = adjusted_rand_index(sim.labels, result.clustering.assignments);
    return out;
}

}  // namespace cecluster
