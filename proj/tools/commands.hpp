#pragma once

// Command-line front end: simulate, fit, stability, dissim, cluster, elbow,
// chi, experiment and pipeline. Each verb reads and writes the delimited
// formats in cecluster/io.hpp.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cecluster/cecluster.hpp"

namespace cecluster::cli {

namespace fs = std::filesystem;

struct CommonOptions {
    std::size_t threads = 1;
    fs::path out = ".";
};

struct SimulateOptions {
    std::string kind = "mixture";
    std::size_t sites = 12;
    std::size_t n = 1000;
    std::size_t vars = 2;
    std::vector<std::size_t> cluster_sizes{6, 6};
    std::vector<double> rho_gauss{0.5};
    std::vector<double> rho_t{0.9, 0.1};
    double t_dof = 3.0;
    double perturb = 0.0;
    std::uint64_t seed = 0;
};

struct FitCommandOptions {
    fs::path input;
    double q = 0.85;
    std::size_t min_exceed = 20;
};

struct StabilityOptions {
    fs::path input;
    std::string site;
    std::size_t cond_var = 1;
    std::vector<double> q_grid{0.8, 0.85, 0.9, 0.95};
    std::size_t bootstrap = 100;
    std::uint64_t seed = 0;
    std::size_t min_exceed = 20;
};

struct DissimOptions {
    fs::path input;
    fs::path fits;
    double lambda = 0.5;
    std::size_t n_mc = 10000;
    double y_cap_quantile = 0.99;
    std::uint64_t seed = 0;
};

struct ClusterOptions {
    fs::path matrix;
    std::size_t k = 2;
    std::string k_range;
    std::size_t restarts = 20;
    std::size_t max_iter = 100;
    std::uint64_t seed = 0;
};

struct ChiOptions {
    fs::path input;
    double u = 0.95;
};

struct ExperimentOptions {
    std::size_t sites = 12;
    std::size_t n = 1000;
    std::vector<std::size_t> dims{2};
    std::vector<std::size_t> cluster_sizes;
    std::vector<double> rho_gauss{0.5};
    std::vector<double> rho_t1{0.9};
    std::vector<double> rho_t2{0.1};
    std::vector<double> rho_t3;
    double t_dof = 3.0;
    double perturb = 0.0;
    std::size_t reps = 1;
    std::uint64_t seed = 0;
    double q = 0.9;
    double lambda = 0.5;
    std::size_t n_mc = 10000;
    double y_cap_quantile = 0.99;
    std::size_t restarts = 20;
};

struct PipelineOptions {
    fs::path input;
    double q = 0.85;
    std::size_t min_exceed = 20;
    double lambda = 0.5;
    std::size_t n_mc = 10000;
    double y_cap_quantile = 0.99;
    std::size_t k = 2;
    std::string k_range;
    std::size_t restarts = 20;
    std::size_t max_iter = 100;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::size_t> parse_k_range(const std::string& text) {
    std::vector<std::size_t> out;
    if (text.empty()) {
        return out;
    }
    const auto dots = text.find("..");
    try {
        if (dots != std::string::npos) {
            const auto lo = std::stoul(text.substr(0, dots));
            const auto hi = std::stoul(text.substr(dots + 2));
            if (lo < 1 || hi < lo) {
                throw ContractError("k range '" + text + "' is empty");
            }
            for (auto k = lo; k <= hi; ++k) {
                out.push_back(k);
            }
        } else {
            for (const auto& part : io::split(text)) {
                out.push_back(std::stoul(part));
            }
        }
    } catch (const std::logic_error&) {
        throw ContractError("cannot parse k range '" + text + "' (use A..B or a comma list)");
    }
    return out;
}

// One value broadcasts to every cluster.
inline std::vector<double> per_cluster(const std::vector<double>& values, std::size_t clusters, const std::string& name) {
    if (values.size() == 1) {
        return std::vector<double>(clusters, values.front());
    }
    if (values.size() != clusters) {
        throw ContractError(name + ": expected 1 or " + std::to_string(clusters) + " values, got " +
                            std::to_string(values.size()));
    }
    return values;
}

inline std::vector<std::size_t> equal_split(std::size_t sites, std::size_t clusters) {
    std::vector<std::size_t> sizes(clusters, sites / clusters);
    for (std::size_t c = 0; c < sites % clusters; ++c) {
        ++sizes[c];
    }
    return sizes;
}

inline std::string join_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i > 0 ? ";" : "") + io::format_real(v[i]);
    }
    return out;
}

inline std::string join_list(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i > 0 ? ";" : "") + std::to_string(v[i]);
    }
    return out;
}

inline std::string sanitize(std::string text) {
    for (auto& c : text) {
        if (c == ',' || c == '\n' || c == '\r') {
            c = ';';
        }
    }
    return text;
}

inline PanelData load_laplace_panel(const fs::path& path) {
    const auto panel = io::read_panel(path);
    return panel.margins == Margins::laplace ? panel : to_laplace(panel);
}

inline std::string fits_fingerprint(const PanelData& panel, double q, std::size_t min_exceed) {
    const std::string canonical = "fits;q=" + io::format_real(q) + ";min_exceed=" + std::to_string(min_exceed) +
                                  ";panel=" + io::panel_fingerprint(panel);
    return cecluster::detail::hex64(cecluster::detail::fnv1a64(canonical));
}

inline io::Metadata matrix_metadata(const DissimMatrix& m, const std::vector<DissimMatrix>& all, double q,
                                    const DivergenceConfig& cfg, double y_cap, const std::string& fits_fp) {
    io::Metadata meta{{"fits_fingerprint", fits_fp},
                      {"q", io::format_real(q)},
                      {"lambda", io::format_real(cfg.lambda)},
                      {"n_mc", std::to_string(cfg.n_mc)},
                      {"seed", std::to_string(cfg.seed)}};
    if (m.aggregated()) {
        std::string components;
        for (const auto& other : all) {
            if (!other.aggregated()) {
                components += other.fingerprint + ";";
            }
        }
        meta.emplace_back("components", components);
    } else {
        meta.emplace_back("y_cap", io::format_real(y_cap));
    }
    return meta;
}

// Recomputes a matrix file's fingerprint from its metadata.
inline void verify_matrix_fingerprint(const io::Table& table, const DissimMatrix& m) {
    std::string expected;
    if (m.aggregated()) {
        expected = cecluster::detail::hex64(cecluster::detail::fnv1a64("aggregate:" + table.require_meta("components")));
    } else {
        DivergenceConfig cfg;
        cfg.lambda = io::parse_real(table.require_meta("lambda"), 0);
        cfg.n_mc = static_cast<std::size_t>(io::parse_integer(table.require_meta("n_mc"), 0));
        cfg.seed = std::stoull(table.require_meta("seed"));
        expected = config_fingerprint(io::parse_real(table.require_meta("q"), 0), cfg,
                                      io::parse_real(table.require_meta("y_cap"), 0));
    }
    if (expected != m.fingerprint) {
        throw DataError("matrix fingerprint " + m.fingerprint + " does not match its metadata (expected " + expected +
                        ")");
    }
}

inline std::string matrix_file_name(const DissimMatrix& m, const std::vector<std::string>& variable_names) {
    return m.aggregated() ? "dissim_aggregated.csv" : "dissim_" + variable_names.at(*m.cond_var) + ".csv";
}

inline void write_fit_outputs(const fs::path& out, const PanelData& panel, const FitSet& set, double q,
                              std::size_t min_exceed, const std::string& fingerprint, std::ostream& log) {
    io::write_table(out / "fits.csv",
                    io::fits_to_table(set.fits, panel.variable_names, fingerprint,
                                      {{"q", io::format_real(q)}, {"min_exceed", std::to_string(min_exceed)}}));
    io::Table failures;
    failures.metadata = {{"fingerprint", fingerprint}};
    failures.header = {"site_id", "cond_var", "error"};
    for (const auto& f : set.failures) {
        failures.rows.push_back({f.site, std::to_string(f.cond_var + 1), sanitize(f.message)});
        log << "fit failed: " << f.message << '\n';
    }
    io::write_table(out / "fit_failures.csv", failures);
    log << "wrote " << set.fits.size() << " fit records to " << (out / "fits.csv").string() << '\n';
}

inline std::vector<DissimMatrix> write_matrices(const fs::path& out, const PanelData& panel, const FitSet& set,
                                                double q, const DivergenceConfig& cfg, const std::string& fits_fp,
                                                std::size_t threads, std::ostream& log) {
    auto matrices = build_dissimilarities(panel, set, cfg, threads);
    for (const auto& m : matrices) {
        const double y_cap = m.aggregated() ? 0.0 : pooled_y_cap(panel, *m.cond_var, cfg.y_cap_quantile);
        const auto path = out / matrix_file_name(m, panel.variable_names);
        io::write_table(path, io::matrix_to_table(m, matrix_metadata(m, matrices, q, cfg, y_cap, fits_fp)));
        log << "wrote " << path.string() << '\n';
    }
    return matrices;
}

inline void write_clustering_outputs(const fs::path& out, const DissimMatrix& m, std::size_t k,
                                     const std::vector<std::size_t>& k_range, std::uint64_t seed,
                                     const PamOptions& pam_options, std::ostream& log) {
    const auto clustering = pam(m, k, seed, pam_options);
    io::write_table(out / "clustering.csv", io::clustering_to_table(clustering, m.site_ids, m.fingerprint));
    log << "k = " << k << ", twgss = " << io::format_real(clustering.twgss) << '\n';
    if (!k_range.empty()) {
        const auto curve = elbow_curve(m, k_range, seed, pam_options);
        io::write_table(out / "elbow.csv", io::elbow_to_table(curve, m.fingerprint, seed));
        log << "suggested elbow: " << (curve.suggested_k ? std::to_string(*curve.suggested_k) : "none") << '\n';
    }
}

}  // namespace detail

inline void cmd_simulate(const SimulateOptions& o, const CommonOptions& common, std::ostream& log) {
    MixtureDesign design;
    if (o.kind == "gaussian") {
        design.kind = CopulaKind::gaussian;
    } else if (o.kind != "mixture") {
        throw ContractError("unknown design kind '" + o.kind + "' (use gaussian or mixture)");
    }
    design.n_sites = o.sites;
    design.n_obs = o.n;
    design.n_vars = o.vars;
    design.cluster_sizes = o.cluster_sizes;
    design.rho_gauss = detail::per_cluster(o.rho_gauss, o.cluster_sizes.size(), "rho-gauss");
    if (design.kind == CopulaKind::mixture) {
        design.rho_t = detail::per_cluster(o.rho_t, o.cluster_sizes.size(), "rho-t");
    } else {
        design.rho_t.clear();
    }
    design.t_dof = o.t_dof;
    design.perturb_halfwidth = o.perturb;
    design.seed = o.seed;

    const auto sim = sample_mixture_panel(design, common.threads);
    const io::Metadata meta{{"kind", o.kind},
                            {"sites", std::to_string(o.sites)},
                            {"n", std::to_string(o.n)},
                            {"vars", std::to_string(o.vars)},
                            {"cluster_sizes", detail::join_list(o.cluster_sizes)},
                            {"rho_gauss", detail::join_list(design.rho_gauss)},
                            {"rho_t", detail::join_list(design.rho_t)},
                            {"t_dof", io::format_real(o.t_dof)},
                            {"perturb_halfwidth", io::format_real(o.perturb)},
                            {"seed", std::to_string(o.seed)}};
    io::write_table(common.out / "panel.csv", io::panel_to_table(sim.panel, meta));
    io::write_table(common.out / "labels.csv", io::labels_to_table(sim.panel.site_ids, sim.labels, meta));
    log << "wrote " << (common.out / "panel.csv").string() << " and labels.csv\n";
}

// Returns false when any fit failed.
inline bool cmd_fit(const FitCommandOptions& o, const CommonOptions& common, std::ostream& log) {
    const auto panel = detail::load_laplace_panel(o.input);
    FitOptions fit_options;
    fit_options.min_exceedances = o.min_exceed;
    const auto set = fit_panel(panel, o.q, fit_options, common.threads);
    detail::write_fit_outputs(common.out, panel, set, o.q, o.min_exceed, detail::fits_fingerprint(panel, o.q, o.min_exceed), log);
    return set.failures.empty();
}

inline void cmd_stability(const StabilityOptions& o, const CommonOptions& common, std::ostream& log) {
    const auto panel = detail::load_laplace_panel(o.input);
    const auto it = std::find(panel.site_ids.begin(), panel.site_ids.end(), o.site);
    if (it == panel.site_ids.end()) {
        throw DataError("unknown site '" + o.site + "'");
    }
    if (o.cond_var < 1 || o.cond_var > panel.n_vars()) {
        throw ContractError("cond-var must lie in 1.." + std::to_string(panel.n_vars()));
    }
    const auto s = static_cast<std::size_t>(it - panel.site_ids.begin());
    FitOptions fit_options;
    fit_options.min_exceedances = o.min_exceed;
    const auto table = threshold_stability(panel.sites[s], o.site, o.cond_var - 1, o.q_grid, o.bootstrap, o.seed,
                                           fit_options, common.threads);

    io::Table out;
    out.metadata = {{"site", o.site},
                    {"cond_var", std::to_string(o.cond_var)},
                    {"bootstrap", std::to_string(o.bootstrap)},
                    {"seed", std::to_string(o.seed)},
                    {"fingerprint", detail::fits_fingerprint(panel, o.q_grid.front(), o.min_exceed)}};
    out.header = {"q", "replicate", "component", "alpha", "beta", "error"};
    for (const auto& row : table.rows) {
        const std::string rep = row.replicate ? std::to_string(*row.replicate + 1) : "full";
        std::size_t component = 0;
        for (std::size_t j = 0; j < panel.n_vars(); ++j) {
            if (j + 1 == o.cond_var) {
                continue;
            }
            out.rows.push_back({io::format_real(row.q), rep, panel.variable_names[j],
                                io::format_real(row.alpha[static_cast<Eigen::Index>(component)]),
                                io::format_real(row.beta[static_cast<Eigen::Index>(component)]), ""});
            ++component;
        }
    }
    for (const auto& f : table.failures) {
        const std::string rep = f.replicate ? std::to_string(*f.replicate + 1) : "full";
        out.rows.push_back({io::format_real(f.q), rep, "", "NA", "NA", detail::sanitize(f.message)});
        log << "q = " << f.q << ": " << f.message << '\n';
    }
    const auto path = common.out / ("stability_" + o.site + "_" + panel.variable_names[o.cond_var - 1] + ".csv");
    io::write_table(path, out);
    log << "wrote " << path.string() << '\n';
}

inline void cmd_dissim(const DissimOptions& o, const CommonOptions& common, std::ostream& log) {
    const auto panel = detail::load_laplace_panel(o.input);
    const auto fits_table = io::read_table(o.fits);
    const auto records = io::fits_from_table(fits_table);
    if (records.fits.empty()) {
        throw DataError("no fit records in '" + o.fits.string() + "'");
    }
    const double q = records.fits.front().quantile_q;
    const auto min_exceed = static_cast<std::size_t>(io::parse_integer(fits_table.require_meta("min_exceed"), 0));
    if (detail::fits_fingerprint(panel, q, min_exceed) != records.fingerprint) {
        throw DataError("fingerprint mismatch: '" + o.fits.string() + "' was not fitted to '" + o.input.string() + "'");
    }
    for (const auto& f : records.fits) {
        if (f.quantile_q != q || f.threshold_u != records.fits.front().threshold_u) {
            throw DataError("fingerprint mismatch among fits: site '" + f.site + "' uses a different threshold");
        }
    }
    FitSet set;
    set.fits = records.fits;
    DivergenceConfig cfg;
    cfg.lambda = o.lambda;
    cfg.n_mc = o.n_mc;
    cfg.y_cap_quantile = o.y_cap_quantile;
    cfg.seed = o.seed;
    detail::write_matrices(common.out, panel, set, q, cfg, records.fingerprint, common.threads, log);
}

inline void cmd_cluster(const ClusterOptions& o, const CommonOptions& common, std::ostream& log) {
    const auto table = io::read_table(o.matrix);
    const auto m = io::matrix_from_table(table);
    detail::verify_matrix_fingerprint(table, m);
    PamOptions pam_options{o.restarts, o.max_iter, common.threads};
    detail::write_clustering_outputs(common.out, m, o.k, detail::parse_k_range(o.k_range), o.seed, pam_options, log);
}

inline void cmd_elbow(const ClusterOptions& o, const CommonOptions& common, std::ostream& log) {
    const auto table = io::read_table(o.matrix);
    const auto m = io::matrix_from_table(table);
    detail::verify_matrix_fingerprint(table, m);
    auto k_range = detail::parse_k_range(o.k_range.empty() ? "1.." + std::to_string(std::min<std::size_t>(m.size(), 8))
                                                           : o.k_range);
    PamOptions pam_options{o.restarts, o.max_iter, common.threads};
    const auto curve = elbow_curve(m, k_range, o.seed, pam_options);
    io::write_table(common.out / "elbow.csv", io::elbow_to_table(curve, m.fingerprint, o.seed));
    log << "suggested elbow: " << (curve.suggested_k ? std::to_string(*curve.suggested_k) : "none") << '\n';
}

// chi(u) for every ordered variable pair (a | b) at every site.
inline void cmd_chi(const ChiOptions& o, const CommonOptions& common, std::ostream& log) {
    const auto panel = io::read_panel(o.input);
    panel.validate();
    io::Table out;
    out.metadata = {{"u", io::format_real(o.u)}, {"panel_fingerprint", io::panel_fingerprint(panel)}};
    out.header = {"site_id", "variable", "given", "u", "chi", "defined"};
    std::size_t undefined = 0;
    for (std::size_t s = 0; s < panel.n_sites(); ++s) {
        for (std::size_t a = 0; a < panel.n_vars(); ++a) {
            for (std::size_t b = 0; b < panel.n_vars(); ++b) {
                if (a == b) {
                    continue;
                }
                const Eigen::VectorXd xa = panel.sites[s].col(static_cast<Eigen::Index>(a));
                const Eigen::VectorXd xb = panel.sites[s].col(static_cast<Eigen::Index>(b));
                std::string value = "NA";
                std::string defined = "false";
                try {
                    value = io::format_real(empirical_chi(std::span<const double>(xa.data(), xa.size()),
                                                          std::span<const double>(xb.data(), xb.size()), o.u));
                    defined = "true";
                } catch (const DataError& e) {
                    ++undefined;
                    log << "site '" << panel.site_ids[s] << "': " << e.what() << '\n';
                }
                out.rows.push_back({panel.site_ids[s], panel.variable_names[a], panel.variable_names[b],
                                    io::format_real(o.u), value, defined});
            }
        }
    }
    io::write_table(common.out / "chi.csv", out);
    log << "wrote " << (common.out / "chi.csv").string() << " (" << undefined << " undefined)\n";
}

struct ExperimentCell {
    std::size_t d = 2;
    double rho_gauss = 0.5;
    std::vector<double> rho_t;
};

inline std::vector<ExperimentCell> experiment_cells(const ExperimentOptions& o) {
    std::vector<ExperimentCell> cells;
    const std::vector<double> none{std::numeric_limits<double>::quiet_NaN()};
    const auto& t3_values = o.rho_t3.empty() ? none : o.rho_t3;
    for (const auto d : o.dims) {
        for (const double g : o.rho_gauss) {
            for (const double t1 : o.rho_t1) {
                for (const double t2 : o.rho_t2) {
                    for (const double t3 : t3_values) {
                        ExperimentCell cell{d, g, {t1, t2}};
                        if (!std::isnan(t3)) {
                            cell.rho_t.push_back(t3);
                        }
                        cells.push_back(std::move(cell));
                    }
                }
            }
        }
    }
    return cells;
}

// One row per (cell, replicate). Replicate r of cell c uses the seed
// derive_seed(seed, "experiment/<c>/<r>") and can be re-run alone.
inline io::Table cmd_experiment(const ExperimentOptions& o, const CommonOptions& common, std::ostream& log) {
    const auto cells = experiment_cells(o);
    io::Table out;
    out.metadata = {{"seed", std::to_string(o.seed)},
                    {"sites", std::to_string(o.sites)},
                    {"n", std::to_string(o.n)},
                    {"q", io::format_real(o.q)},
                    {"n_mc", std::to_string(o.n_mc)},
                    {"perturb_halfwidth", io::format_real(o.perturb)}};
    out.header = {"cell", "replicate", "seed", "d", "sites", "rho_gauss", "rho_t", "cluster_sizes", "ari", "runtime_s", "status"};
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        const std::size_t clusters = cell.rho_t.size();
        const auto sizes = o.cluster_sizes.empty() ? detail::equal_split(o.sites, clusters) : o.cluster_sizes;
        for (std::size_t r = 0; r < o.reps; ++r) {
            const std::uint64_t rep_seed =
                derive_seed(o.seed, "experiment/" + std::to_string(c) + "/" + std::to_string(r));
            MixtureDesign design;
            design.n_sites = o.sites;
            design.n_obs = o.n;
            design.n_vars = cell.d;
            design.cluster_sizes = sizes;
            design.rho_gauss.assign(clusters, cell.rho_gauss);
            design.rho_t = cell.rho_t;
            design.t_dof = o.t_dof;
            design.perturb_halfwidth = o.perturb;
            design.seed = rep_seed;

            PipelineConfig config;
            config.q = o.q;
            config.divergence.lambda = o.lambda;
            config.divergence.n_mc = o.n_mc;
            config.divergence.y_cap_quantile = o.y_cap_quantile;
            config.pam.n_restarts = o.restarts;
            config.seed = rep_seed;
            config.threads = common.threads;

            std::string ari = "NA";
            std::string status = "ok";
            const auto start = std::chrono::steady_clock::now();
            try {
                ari = io::format_real(run_replicate(design, config).ari);
            } catch (const Error& e) {
                status = detail::sanitize(e.what());
            }
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            out.rows.push_back({std::to_string(c + 1), std::to_string(r + 1), std::to_string(rep_seed),
                                std::to_string(cell.d), std::to_string(o.sites), io::format_real(cell.rho_gauss),
                                detail::join_list(cell.rho_t), detail::join_list(sizes), ari,
                                io::format_real(std::round(seconds * 1000.0) / 1000.0), status});
            log << "cell " << c + 1 << " replicate " << r + 1 << ": ARI " << ari << " (" << seconds << " s)\n";
        }
    }
    io::write_table(common.out / "experiment.csv", out);
    return out;
}

inline void cmd_pipeline(const PipelineOptions& o, const CommonOptions& common, std::ostream& log) {
    const auto panel = detail::load_laplace_panel(o.input);
    FitOptions fit_options;
    fit_options.min_exceedances = o.min_exceed;
    const auto set = fit_panel(panel, o.q, fit_options, common.threads);
    const auto fits_fp = detail::fits_fingerprint(panel, o.q, o.min_exceed);
    detail::write_fit_outputs(common.out, panel, set, o.q, o.min_exceed, fits_fp, log);
    if (!set.failures.empty()) {
        const auto& f = set.failures.front();
        if (f.code == ExitCode::data) {
            throw DataError("fit failed: " + f.message);
        }
        throw NumericalError("fit failed: " + f.message);
    }
    DivergenceConfig cfg;
    cfg.lambda = o.lambda;
    cfg.n_mc = o.n_mc;
    cfg.y_cap_quantile = o.y_cap_quantile;
    cfg.seed = o.seed;
    const auto matrices = detail::write_matrices(common.out, panel, set, o.q, cfg, fits_fp, common.threads, log);
    PamOptions pam_options{o.restarts, o.max_iter, common.threads};
    detail::write_clustering_outputs(common.out, matrices.back(), o.k, detail::parse_k_range(o.k_range), o.seed,
                                     pam_options, log);
}

// Parses argv and dispatches. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cerr) {
    CLI::App app{"Clustering of multivariate extremes with conditional extremes models"};
    app.set_config("--config", "", "TOML/INI configuration file; command-line flags take precedence");
    app.require_subcommand(1);

    CommonOptions common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", common.out, "Output directory")->capture_default_str();
        sub->add_option("--threads", common.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    };

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate a copula design with known clusters");
    simulate->add_option("--kind", sim.kind, "gaussian or mixture")->capture_default_str();
    simulate->add_option("--sites", sim.sites, "Number of sites D")->capture_default_str();
    simulate->add_option("--n", sim.n, "Observations per site")->capture_default_str();
    simulate->add_option("--vars", sim.vars, "Variables per site d")->capture_default_str();
    simulate->add_option("--cluster-sizes", sim.cluster_sizes, "Sites per cluster")->capture_default_str();
    simulate->add_option("--rho-gauss", sim.rho_gauss, "Gaussian-copula correlation per cluster")->capture_default_str();
    simulate->add_option("--rho-t", sim.rho_t, "t-copula correlation per cluster")->capture_default_str();
    simulate->add_option("--t-dof", sim.t_dof, "t-copula degrees of freedom")->capture_default_str();
    simulate->add_option("--perturb", sim.perturb, "Half-width of the per-site uniform perturbation of rho_t")
        ->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
    add_common(simulate);

    FitCommandOptions fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit conditional extremes models at every site and variable");
    fit_cmd->add_option("--input", fit.input, "Long-form panel file")->required();
    fit_cmd->add_option("--q", fit.q, "Threshold quantile level")->capture_default_str();
    fit_cmd->add_option("--min-exceed", fit.min_exceed, "Minimum exceedance count")->capture_default_str();
    add_common(fit_cmd);

    StabilityOptions stab;
    auto* stability = app.add_subcommand("stability", "Threshold-stability table with bootstrap refits");
    stability->add_option("--input", stab.input, "Long-form panel file")->required();
    stability->add_option("--site", stab.site, "Site id")->required();
    stability->add_option("--cond-var", stab.cond_var, "Conditioning variable (1-based)")->capture_default_str();
    stability->add_option("--q-grid", stab.q_grid, "Ascending quantile levels")->capture_default_str();
    stability->add_option("--bootstrap", stab.bootstrap, "Bootstrap replicates per level")->capture_default_str();
    stability->add_option("--seed", stab.seed, "Master seed")->capture_default_str();
    stability->add_option("--min-exceed", stab.min_exceed, "Minimum exceedance count")->capture_default_str();
    add_common(stability);

    DissimOptions dis;
    auto* dissim = app.add_subcommand("dissim", "Per-variable and aggregated dissimilarity matrices");
    dissim->add_option("--input", dis.input, "Long-form panel file the fits came from")->required();
    dissim->add_option("--fits", dis.fits, "fits.csv written by 'fit'")->required();
    dissim->add_option("--lambda", dis.lambda, "Skew weight")->capture_default_str();
    dissim->add_option("--n-mc", dis.n_mc, "Monte Carlo draws per pair")->capture_default_str();
    dissim->add_option("--y-cap-quantile", dis.y_cap_quantile, "Pooled quantile truncating the integral")
        ->capture_default_str();
    dissim->add_option("--seed", dis.seed, "Master seed")->capture_default_str();
    add_common(dissim);

    ClusterOptions clu;
    auto* cluster = app.add_subcommand("cluster", "PAM clustering of a dissimilarity matrix");
    cluster->add_option("--matrix", clu.matrix, "Matrix file")->required();
    cluster->add_option("--k", clu.k, "Number of clusters")->capture_default_str();
    cluster->add_option("--k-range", clu.k_range, "Also emit the elbow curve over A..B or a comma list");
    cluster->add_option("--restarts", clu.restarts, "Random restarts")->capture_default_str();
    cluster->add_option("--max-iter", clu.max_iter, "Iteration cap per restart")->capture_default_str();
    cluster->add_option("--seed", clu.seed, "Master seed")->capture_default_str();
    add_common(cluster);

    ClusterOptions elb;
    auto* elbow = app.add_subcommand("elbow", "TWGSS curve and suggested number of clusters");
    elbow->add_option("--matrix", elb.matrix, "Matrix file")->required();
    elbow->add_option("--k-range", elb.k_range, "A..B or a comma list (default 1..min(D, 8))");
    elbow->add_option("--restarts", elb.restarts, "Random restarts")->capture_default_str();
    elbow->add_option("--max-iter", elb.max_iter, "Iteration cap per restart")->capture_default_str();
    elbow->add_option("--seed", elb.seed, "Master seed")->capture_default_str();
    add_common(elbow);

    ChiOptions chi_opts;
    auto* chi = app.add_subcommand("chi", "Empirical chi(u) for every site and variable pair");
    chi->add_option("--input", chi_opts.input, "Long-form panel file")->required();
    chi->add_option("--u", chi_opts.u, "Quantile level u")->capture_default_str();
    add_common(chi);

    ExperimentOptions exp;
    auto* experiment = app.add_subcommand("experiment", "Replicated simulate -> pipeline -> ARI over a design grid");
    experiment->add_option("--sites", exp.sites, "Sites per replicate")->capture_default_str();
    experiment->add_option("--n", exp.n, "Observations per site")->capture_default_str();
    experiment->add_option("--dims", exp.dims, "Variable counts d (grid axis)")->capture_default_str();
    experiment->add_option("--cluster-sizes", exp.cluster_sizes, "Sites per cluster (default: equal split)");
    experiment->add_option("--rho-gauss", exp.rho_gauss, "Gaussian correlations (grid axis)")->capture_default_str();
    experiment->add_option("--rho-t1", exp.rho_t1, "Cluster 1 t correlations (grid axis)")->capture_default_str();
    experiment->add_option("--rho-t2", exp.rho_t2, "Cluster 2 t correlations (grid axis)")->capture_default_str();
    experiment->add_option("--rho-t3", exp.rho_t3, "Cluster 3 t correlations (grid axis, optional)");
    experiment->add_option("--t-dof", exp.t_dof, "t-copula degrees of freedom")->capture_default_str();
    experiment->add_option("--perturb", exp.perturb, "Half-width of the per-site rho_t perturbation")
        ->capture_default_str();
    experiment->add_option("--reps", exp.reps, "Replicates per cell")->capture_default_str();
    experiment->add_option("--seed", exp.seed, "Master seed")->required();
    experiment->add_option("--q", exp.q, "Threshold quantile level")->capture_default_str();
    experiment->add_option("--lambda", exp.lambda, "Skew weight")->capture_default_str();
    experiment->add_option("--n-mc", exp.n_mc, "Monte Carlo draws per pair")->capture_default_str();
    experiment->add_option("--y-cap-quantile", exp.y_cap_quantile, "Pooled truncation quantile")->capture_default_str();
    experiment->add_option("--restarts", exp.restarts, "PAM restarts")->capture_default_str();
    add_common(experiment);

    PipelineOptions pipe;
    auto* pipeline = app.add_subcommand("pipeline", "fit + dissim + cluster in one run");
    pipeline->add_option("--input", pipe.input, "Long-form panel file")->required();
    pipeline->add_option("--q", pipe.q, "Threshold quantile level")->capture_default_str();
    pipeline->add_option("--min-exceed", pipe.min_exceed, "Minimum exceedance count")->capture_default_str();
    pipeline->add_option("--lambda", pipe.lambda, "Skew weight")->capture_default_str();
    pipeline->add_option("--n-mc", pipe.n_mc, "Monte Carlo draws per pair")->capture_default_str();
    pipeline->add_option("--y-cap-quantile", pipe.y_cap_quantile, "Pooled truncation quantile")->capture_default_str();
    pipeline->add_option("--k", pipe.k, "Number of clusters")->capture_default_str();
    pipeline->add_option("--k-range", pipe.k_range, "Also emit the elbow curve over A..B or a comma list");
    pipeline->add_option("--restarts", pipe.restarts, "PAM restarts")->capture_default_str();
    pipeline->add_option("--max-iter", pipe.max_iter, "Iteration cap per restart")->capture_default_str();
    pipeline->add_option("--seed", pipe.seed, "Master seed")->capture_default_str();
    add_common(pipeline);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, log, log);
        return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        if (simulate->parsed()) {
            cmd_simulate(sim, common, log);
        } else if (fit_cmd->parsed()) {
            if (!cmd_fit(fit, common, log)) {
                return static_cast<int>(ExitCode::numerical);
            }
        } else if (stability->parsed()) {
            cmd_stability(stab, common, log);
        } else if (dissim->parsed()) {
            cmd_dissim(dis, common, log);
        } else if (cluster->parsed()) {
            cmd_cluster(clu, common, log);
        } else if (elbow->parsed()) {
            cmd_elbow(elb, common, log);
        } else if (chi->parsed()) {
            cmd_chi(chi_opts, common, log);
        } else if (experiment->parsed()) {
            cmd_experiment(exp, common, log);
        } else if (pipeline->parsed()) {
            cmd_pipeline(pipe, common, log);
        }
    } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::numerical);
    }
    return 0;
}

}  // namespace cecluster::cli
