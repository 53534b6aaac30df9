#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cecluster/error.hpp"

namespace cecluster {

enum class Margins { raw, laplace };

// Observations indexed by (site, time, variable). Each site holds an n x d
// matrix with one row per time point; all sites share n and d.
struct PanelData {
    std::vector<std::string> site_ids;
    std::vector<std::string> variable_names;
    std::vector<Eigen::MatrixXd> sites;
    Margins margins = Margins::raw;

    [[nodiscard]] std::size_t n_sites() const noexcept { return sites.size(); }
    [[nodiscard]] std::size_t n_times() const noexcept {
        return sites.empty() ? 0 : static_cast<std::size_t>(sites.front().rows());
    }
    [[nodiscard]] std::size_t n_vars() const noexcept { return variable_names.size(); }

    // Throws ContractError if the panel is not rectangular.
    void validate() const {
        detail::require(site_ids.size() == sites.size(), "panel: site_ids length differs from site count");
        detail::require(!variable_names.empty(), "panel: no variables");
        for (std::size_t s = 0; s < sites.size(); ++s) {
            detail::require(sites[s].cols() == static_cast<Eigen::Index>(variable_names.size()),
                            "panel: site '" + site_ids[s] + "' has the wrong number of variables");
            detail::require(sites[s].rows() == sites.front().rows(),
                            "panel: site '" + site_ids[s] + "' has a different series length");
        }
    }
};

}  // namespace cecluster
