#pragma once

// Delimited-text formats. Every table may start with a metadata block of
// "# key: value" lines, followed by a header row and comma-separated rows.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cecluster/ce_fit.hpp"
#include "cecluster/cluster.hpp"
#include "cecluster/dissim.hpp"
#include "cecluster/error.hpp"
#include "cecluster/panel.hpp"

namespace cecluster::io {

using Metadata = std::vector<std::pair<std::string, std::string>>;

struct Table {
    Metadata metadata;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row

    [[nodiscard]] std::optional<std::string> meta(const std::string& key) const {
        for (const auto& [k, v] : metadata) {
            if (k == key) {
                return v;
            }
        }
        return std::nullopt;
    }

    [[nodiscard]] std::string require_meta(const std::string& key) const {
        auto v = meta(key);
        if (!v) {
            throw DataError("missing metadata entry '" + key + "'");
        }
        return *v;
    }

    // Source line of row r; tables built in memory count from the header.
    [[nodiscard]] std::size_t line(std::size_t r) const { return r < line_numbers.size() ? line_numbers[r] : r + 2; }

    [[nodiscard]] std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw DataError("missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    }
};

inline std::string format_real(double v) {
    if (std::isnan(v)) {
        return "NA";
    }
    return detail::format_real(v);
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

inline std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

inline double parse_real(const std::string& text, std::size_t line) {
    const std::string t = trim(text);
    if (t.empty() || t == "NA" || t == "NaN" || t == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != t.size()) {
        throw DataError("line " + std::to_string(line) + ": '" + t + "' is not a number");
    }
    return v;
}

inline long long parse_integer(const std::string& text, std::size_t line) {
    const std::string t = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw DataError("line " + std::to_string(line) + ": '" + t + "' is not an integer");
    }
    return v;
}

inline std::string join_reals(const Eigen::VectorXd& v, char sep = ';') {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i > 0) {
            out += sep;
        }
        out += format_real(v[i]);
    }
    return out;
}

inline Eigen::VectorXd parse_reals(const std::string& text, std::size_t line, char sep = ';') {
    const auto parts = split(trim(text), sep);
    Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = parse_real(parts[i], line);
    }
    return v;
}

inline Table parse_table(std::istream& in, const std::string& source) {
    Table table;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        if (line.front() == '#') {
            const auto colon = line.find(':');
            if (colon != std::string::npos && table.header.empty()) {
                table.metadata.emplace_back(trim(line.substr(1, colon - 1)), trim(line.substr(colon + 1)));
            }
            continue;
        }
        auto fields = split(line);
        for (auto& f : fields) {
            f = trim(f);
        }
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw DataError(source + ", line " + std::to_string(number) + ": expected " +
                            std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(number);
    }
    if (table.header.empty()) {
        throw DataError(source + ": missing header row");
    }
    return table;
}

inline Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    return parse_table(in, path.string());
}

inline void write_table(std::ostream& out, const Table& table) {
    for (const auto& [k, v] : table.metadata) {
        out << "# " << k << ": " << v << '\n';
    }
    auto write_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) {
                out << ',';
            }
            out << row[i];
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& row : table.rows) {
        write_row(row);
    }
}

inline void write_table(const std::filesystem::path& path, const Table& table) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    write_table(out, table);
}

inline void check_identifier(const std::string& id, const std::string& what) {
    if (id.empty() || id.find_first_of(",;#\n\r") != std::string::npos) {
        throw DataError(what + " '" + id + "' is empty or contains a reserved character (, ; #)");
    }
}

// ---------------------------------------------------------------------------
// Panel: long form (site_id, time_index, variable_name, value).

inline PanelData panel_from_table(const Table& table, const std::string& source = "panel") {
    const auto c_site = table.column("site_id");
    const auto c_time = table.column("time_index");
    const auto c_var = table.column("variable_name");
    const auto c_value = table.column("value");

    PanelData panel;
    const auto margins = table.meta("margins");
    panel.margins = (margins && *margins == "laplace") ? Margins::laplace : Margins::raw;

    std::map<std::string, std::size_t> site_index;
    std::map<std::string, std::size_t> var_index;
    std::set<long long> times;
    std::map<std::tuple<std::size_t, std::size_t, long long>, std::pair<double, std::size_t>> cells;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.line(r);
        const auto& site = row[c_site];
        const auto& var = row[c_var];
        check_identifier(site, source + ", line " + std::to_string(line) + ": site id");
        check_identifier(var, source + ", line " + std::to_string(line) + ": variable name");
        const auto [s_it, s_new] = site_index.try_emplace(site, panel.site_ids.size());
        if (s_new) {
            panel.site_ids.push_back(site);
        }
        const auto [v_it, v_new] = var_index.try_emplace(var, panel.variable_names.size());
        if (v_new) {
            panel.variable_names.push_back(var);
        }
        const long long t = parse_integer(row[c_time], line);
        const double value = parse_real(row[c_value], line);
        times.insert(t);
        const auto key = std::make_tuple(s_it->second, v_it->second, t);
        if (!cells.try_emplace(key, value, line).second) {
            throw DataError(source + ", line " + std::to_string(line) + ": duplicate observation for site '" + site +
                            "', variable '" + var + "', time " + std::to_string(t));
        }
    }
    if (panel.site_ids.empty()) {
        throw DataError(source + ": no observations");
    }

    const std::vector<long long> time_list(times.begin(), times.end());
    const auto n = static_cast<Eigen::Index>(time_list.size());
    const auto d = static_cast<Eigen::Index>(panel.variable_names.size());
    panel.sites.assign(panel.site_ids.size(), Eigen::MatrixXd(n, d));
    for (std::size_t s = 0; s < panel.site_ids.size(); ++s) {
        for (Eigen::Index v = 0; v < d; ++v) {
            for (Eigen::Index t = 0; t < n; ++t) {
                const auto it = cells.find(std::make_tuple(s, static_cast<std::size_t>(v), time_list[static_cast<std::size_t>(t)]));
                if (it == cells.end()) {
                    throw DataError(source + ": no observation for site '" + panel.site_ids[s] + "', variable '" +
                                    panel.variable_names[static_cast<std::size_t>(v)] + "', time " +
                                    std::to_string(time_list[static_cast<std::size_t>(t)]));
                }
                panel.sites[s](t, v) = it->second.first;
            }
        }
    }
    return panel;
}

inline PanelData read_panel(const std::filesystem::path& path) {
    return panel_from_table(read_table(path), path.string());
}

inline Table panel_to_table(const PanelData& panel, Metadata metadata = {}) {
    panel.validate();
    Table table;
    table.metadata = std::move(metadata);
    table.metadata.emplace_back("margins", panel.margins == Margins::laplace ? "laplace" : "raw");
    table.header = {"site_id", "time_index", "variable_name", "value"};
    for (std::size_t s = 0; s < panel.n_sites(); ++s) {
        for (Eigen::Index t = 0; t < panel.sites[s].rows(); ++t) {
            for (std::size_t v = 0; v < panel.n_vars(); ++v) {
                table.rows.push_back({panel.site_ids[s], std::to_string(t + 1), panel.variable_names[v],
                                      format_real(panel.sites[s](t, static_cast<Eigen::Index>(v)))});
            }
        }
    }
    return table;
}

// Content hash of a panel, used to tie fits to their input data.
inline std::string panel_fingerprint(const PanelData& panel) {
    std::ostringstream out;
    write_table(out, panel_to_table(panel));
    return detail::hex64(cecluster::detail::fnv1a64(out.str()));
}

// ---------------------------------------------------------------------------
// Labels: (site_id, label).

inline Table labels_to_table(const std::vector<std::string>& site_ids, const std::vector<int>& labels,
                             Metadata metadata = {}) {
    detail::require(site_ids.size() == labels.size(), "labels: length mismatch");
    Table table;
    table.metadata = std::move(metadata);
    table.header = {"site_id", "label"};
    for (std::size_t s = 0; s < site_ids.size(); ++s) {
        table.rows.push_back({site_ids[s], std::to_string(labels[s])});
    }
    return table;
}

inline std::vector<int> labels_from_table(const Table& table, const std::vector<std::string>& site_ids) {
    const auto c_site = table.column("site_id");
    const auto c_label = table.column("label");
    std::map<std::string, int> by_site;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        by_site[table.rows[r][c_site]] = static_cast<int>(parse_integer(table.rows[r][c_label], table.line(r)));
    }
    std::vector<int> out;
    for (const auto& id : site_ids) {
        const auto it = by_site.find(id);
        if (it == by_site.end()) {
            throw DataError("labels: no label for site '" + id + "'");
        }
        out.push_back(it->second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fits: one row per (site, conditioning variable).

inline Table fits_to_table(const std::vector<CeFit>& fits, const std::vector<std::string>& variable_names,
                           const std::string& fingerprint, Metadata metadata = {}) {
    Table table;
    table.metadata = std::move(metadata);
    table.metadata.emplace_back("fingerprint", fingerprint);
    table.header = {"site_id", "cond_var", "cond_var_name", "q", "threshold_u", "n_exceed", "nll", "alpha", "beta",
                    "mu", "sigma", "stage1_mu", "stage1_sd", "fingerprint"};
    for (const auto& f : fits) {
        const Eigen::VectorXd sigma = Eigen::Map<const Eigen::VectorXd>(f.sigma.data(), f.sigma.size());
        table.rows.push_back({f.site, std::to_string(f.cond_var + 1), variable_names.at(f.cond_var),
                              format_real(f.quantile_q), format_real(f.threshold_u), std::to_string(f.n_exceed),
                              format_real(f.nll), join_reals(f.alpha), join_reals(f.beta), join_reals(f.mu),
                              join_reals(sigma), join_reals(f.stage1_mu), join_reals(f.stage1_sd), fingerprint});
    }
    return table;
}

struct FitRecords {
    std::vector<CeFit> fits;
    std::string fingerprint;
};

inline FitRecords fits_from_table(const Table& table) {
    const auto c_site = table.column("site_id");
    const auto c_var = table.column("cond_var");
    const auto c_q = table.column("q");
    const auto c_u = table.column("threshold_u");
    const auto c_n = table.column("n_exceed");
    const auto c_nll = table.column("nll");
    const auto c_alpha = table.column("alpha");
    const auto c_beta = table.column("beta");
    const auto c_mu = table.column("mu");
    const auto c_sigma = table.column("sigma");
    const auto c_s1mu = table.column("stage1_mu");
    const auto c_s1sd = table.column("stage1_sd");
    const auto c_fp = table.column("fingerprint");

    FitRecords out;
    out.fingerprint = table.meta("fingerprint").value_or("");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.line(r);
        if (row[c_fp] != out.fingerprint) {
            throw DataError("fits, line " + std::to_string(line) + ": fingerprint " + row[c_fp] +
                            " does not match the file fingerprint " + out.fingerprint);
        }
        CeFit f;
        f.site = row[c_site];
        const auto var = parse_integer(row[c_var], line);
        if (var < 1) {
            throw DataError("fits, line " + std::to_string(line) + ": cond_var must be 1-based");
        }
        f.cond_var = static_cast<std::size_t>(var - 1);
        f.quantile_q = parse_real(row[c_q], line);
        f.threshold_u = parse_real(row[c_u], line);
        f.n_exceed = static_cast<std::size_t>(parse_integer(row[c_n], line));
        f.nll = parse_real(row[c_nll], line);
        f.alpha = parse_reals(row[c_alpha], line);
        f.beta = parse_reals(row[c_beta], line);
        f.mu = parse_reals(row[c_mu], line);
        f.stage1_mu = parse_reals(row[c_s1mu], line);
        f.stage1_sd = parse_reals(row[c_s1sd], line);
        const Eigen::VectorXd sigma = parse_reals(row[c_sigma], line);
        const Eigen::Index m = f.alpha.size();
        if (f.beta.size() != m || f.mu.size() != m || sigma.size() != m * m) {
            throw DataError("fits, line " + std::to_string(line) + ": inconsistent parameter dimensions");
        }
        f.sigma = Eigen::Map<const Eigen::MatrixXd>(sigma.data(), m, m);
        out.fits.push_back(std::move(f));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dissimilarity matrices: square table with a site-id header row and column.

inline Table matrix_to_table(const DissimMatrix& m, Metadata metadata = {}) {
    Table table;
    table.metadata.emplace_back("source", m.source_label());
    table.metadata.emplace_back("fingerprint", m.fingerprint);
    for (auto& kv : metadata) {
        table.metadata.push_back(std::move(kv));
    }
    table.header.push_back("site_id");
    table.header.insert(table.header.end(), m.site_ids.begin(), m.site_ids.end());
    for (std::size_t r = 0; r < m.size(); ++r) {
        std::vector<std::string> row{m.site_ids[r]};
        for (std::size_t c = 0; c < m.size(); ++c) {
            row.push_back(format_real(m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline DissimMatrix matrix_from_table(const Table& table) {
    if (table.header.empty() || table.header.front() != "site_id") {
        throw DataError("matrix: first header field must be 'site_id'");
    }
    DissimMatrix m;
    m.site_ids.assign(table.header.begin() + 1, table.header.end());
    const auto n = m.site_ids.size();
    if (table.rows.size() != n) {
        throw DataError("matrix: expected " + std::to_string(n) + " rows, found " + std::to_string(table.rows.size()));
    }
    m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const auto& row = table.rows[r];
        if (row.front() != m.site_ids[r]) {
            throw DataError("matrix, line " + std::to_string(table.line(r)) + ": row label '" + row.front() +
                            "' does not match column '" + m.site_ids[r] + "'");
        }
        for (std::size_t c = 0; c < n; ++c) {
            m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                parse_real(row[c + 1], table.line(r));
        }
    }
    const auto source = table.require_meta("source");
    if (source != "aggregated") {
        const std::string prefix = "cond_var:";
        if (source.rfind(prefix, 0) != 0) {
            throw DataError("matrix: unknown source '" + source + "'");
        }
        m.cond_var = static_cast<std::size_t>(parse_integer(source.substr(prefix.size()), 0) - 1);
    }
    m.fingerprint = table.require_meta("fingerprint");
    try {
        m.validate();
    } catch (const ContractError& e) {
        throw DataError(e.what());
    }
    return m;
}

// ---------------------------------------------------------------------------
// Clustering: (site_id, label) plus metadata.

inline Table clustering_to_table(const Clustering& c, const std::vector<std::string>& site_ids,
                                 const std::string& fingerprint) {
    Table table = labels_to_table(site_ids, c.assignments);
    std::string medoids;
    for (std::size_t i = 0; i < c.medoids.size(); ++i) {
        medoids += (i > 0 ? ";" : "") + site_ids[c.medoids[i]];
    }
    table.metadata = {{"fingerprint", fingerprint},
                      {"k", std::to_string(c.k)},
                      {"seed", std::to_string(c.seed)},
                      {"n_restarts", std::to_string(c.n_restarts)},
                      {"twgss", format_real(c.twgss)},
                      {"converged", c.converged ? "true" : "false"},
                      {"medoids", medoids}};
    return table;
}

inline Table elbow_to_table(const ElbowCurve& curve, const std::string& fingerprint, std::uint64_t seed) {
    Table table;
    table.metadata = {{"fingerprint", fingerprint},
                      {"seed", std::to_string(seed)},
                      {"suggested_k", curve.suggested_k ? std::to_string(*curve.suggested_k) : "NA"}};
    table.header = {"k", "twgss"};
    for (const auto& p : curve.points) {
        table.rows.push_back({std::to_string(p.k), format_real(p.twgss)});
    }
    return table;
}

}  // namespace cecluster::io
