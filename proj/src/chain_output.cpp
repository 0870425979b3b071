#include "sparsepanel/chain_output.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sparsepanel/panel_data.hpp"

namespace sparsepanel {

namespace fs = std::filesystem;

bool ChainOutput::has_common(const std::string& name) const {
    return std::find(common_names.begin(), common_names.end(), name) != common_names.end();
}

int ChainOutput::common_index(const std::string& name) const {
    const auto it = std::find(common_names.begin(), common_names.end(), name);
    if (it == common_names.end()) throw std::out_of_range("chain has no common parameter " + name);
    return static_cast<int>(it - common_names.begin());
}

Eigen::VectorXd ChainOutput::common_column(const std::string& name) const {
    return common.col(common_index(name));
}

const Eigen::MatrixXd& ChainOutput::unit_field(const std::string& name) const {
    const auto it = unit.find(name);
    if (it == unit.end()) throw std::out_of_range("chain has no unit field " + name);
    return it->second;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {
std::vector<double> sorted_copy(const Eigen::VectorXd& v) {
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end());
    return s;
}
}  // namespace

std::pair<double, double> equal_tail_interval(const Eigen::VectorXd& draws, double level) {
    const auto s = sorted_copy(draws);
    const double a = 0.5 * (1.0 - level);
    return {quantile_sorted(s, a), quantile_sorted(s, 1.0 - a)};
}

std::pair<double, double> hpd_interval(const Eigen::VectorXd& draws, double level) {
    const auto s = sorted_copy(draws);
    if (s.empty()) throw std::invalid_argument("HPD interval of an empty sample");
    const std::size_t n = s.size();
    const auto m = std::max<std::size_t>(
        1, std::min(n, static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)))));
    std::size_t best = 0;
    double width = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + m <= n; ++i) {
        const double w = s[i + m - 1] - s[i];
        if (w < width) {
            width = w;
            best = i;
        }
    }
    return {s[best], s[best + m - 1]};
}

namespace {
// Mean about the first draw, so a constant chain returns its value exactly.
double shifted_mean(const Eigen::VectorXd& x) {
    return x(0) + (x.array() - x(0)).mean();
}
}  // namespace

Summary summarize(const Eigen::VectorXd& draws, double level) {
    if (draws.size() == 0) throw std::invalid_argument("summary of an empty chain");
    Summary out;
    const auto s = sorted_copy(draws);
    out.mean = shifted_mean(draws);
    out.median = quantile_sorted(s, 0.5);
    out.sd = draws.size() > 1
                 ? std::sqrt((draws.array() - out.mean).square().sum() / (draws.size() - 1.0))
                 : 0.0;
    std::tie(out.eq_lo, out.eq_hi) = equal_tail_interval(draws, level);
    std::tie(out.hpd_lo, out.hpd_hi) = hpd_interval(draws, level);
    return out;
}

std::map<std::string, Summary> summarize_common(const ChainOutput& chain, double level) {
    std::map<std::string, Summary> out;
    for (std::size_t j = 0; j < chain.common_names.size(); ++j)
        out[chain.common_names[j]] = summarize(chain.common.col(static_cast<int>(j)), level);
    return out;
}

PointRule parse_point_rule(const std::string& s) {
    if (s == "mean") return PointRule::mean;
    if (s == "median") return PointRule::median;
    if (s == "median_spike_adjust" || s == "spike_adjust") return PointRule::median_spike_adjust;
    throw std::invalid_argument("unknown point rule '" + s + "'");
}

namespace {
double median_of(const Eigen::VectorXd& v) { return quantile_sorted(sorted_copy(v), 0.5); }

// One parameter: common column c (draws), unit deviations d (draws x N),
// indicators z (draws x N) or null, spike value and combination (additive or multiplicative).
Eigen::VectorXd estimate_parameter(const Eigen::VectorXd& c, const Eigen::MatrixXd& d,
                                   const Eigen::MatrixXd* z, double spike, bool multiplicative,
                                   PointRule rule, double threshold) {
    const int N = static_cast<int>(d.cols());
    Eigen::VectorXd out(N);
    const double c_med = median_of(c);
    for (int i = 0; i < N; ++i) {
        const Eigen::VectorXd combined = multiplicative ? Eigen::VectorXd(c.array() * d.col(i).array())
                                                        : Eigen::VectorXd(c + d.col(i));
        switch (rule) {
            case PointRule::mean:
                out(i) = shifted_mean(combined);
                break;
            case PointRule::median:
                out(i) = median_of(combined);
                break;
            case PointRule::median_spike_adjust: {
                double spike_frac = 0.0;
                if (z) spike_frac = 1.0 - z->col(i).mean();
                const double dhat = spike_frac > threshold ? spike : median_of(d.col(i));
                out(i) = multiplicative ? c_med * dhat : c_med + dhat;
                break;
            }
        }
    }
    return out;
}
}  // namespace

std::map<std::string, Eigen::VectorXd> point_estimates(const ChainOutput& chain, PointRule rule,
                                                       double spike_threshold) {
    if (chain.n_draws() == 0) throw std::invalid_argument("point estimates need a nonempty chain");
    std::map<std::string, Eigen::VectorXd> out;
    auto z_of = [&](const std::string& name) -> const Eigen::MatrixXd* {
        return chain.has_unit(name) ? &chain.unit_field(name) : nullptr;
    };
    if (chain.has_unit("delta_alpha")) {
        out["alpha"] = estimate_parameter(chain.common_column("alpha"), chain.unit_field("delta_alpha"),
                                          z_of("z_alpha"), 0.0, false, rule, spike_threshold);
    } else {
        for (int j = 0; chain.has_unit("delta_alpha_" + std::to_string(j)); ++j) {
            const std::string name = "alpha_" + std::to_string(j);
            out[name] = estimate_parameter(chain.common_column(name),
                                           chain.unit_field("delta_alpha_" + std::to_string(j)),
                                           z_of("z_alpha"), 0.0, false, rule, spike_threshold);
        }
    }
    if (chain.has_unit("delta_rho"))
        out["rho"] = estimate_parameter(chain.common_column("rho"), chain.unit_field("delta_rho"),
                                        z_of("z_rho"), 0.0, false, rule, spike_threshold);
    if (chain.has_unit("delta_sigma") && chain.has_common("sigma2"))
        out["sigma2"] = estimate_parameter(chain.common_column("sigma2"),
                                           chain.unit_field("delta_sigma"), z_of("z_sigma"), 1.0,
                                           true, rule, spike_threshold);
    return out;
}

Eigen::VectorXd slab_frequency(const ChainOutput& chain, const std::string& z_field) {
    const auto& z = chain.unit_field(z_field);
    return z.colwise().mean().transpose();
}

std::string git_blob_hash(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("SHA-1 context allocation failed");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, md, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("SHA-1 digest failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

namespace {
std::string matrix_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& m) {
    std::ostringstream os;
    for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
    os << '\n';
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) os << (c ? "," : "") << format_double(m(r, c));
        os << '\n';
    }
    return os.str();
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void read_matrix_csv(const std::string& path, std::vector<std::string>& header, Eigen::MatrixXd& m) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header");
    header = split(line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != header.size())
            throw std::runtime_error(path + ": row " + std::to_string(rows.size() + 2) +
                                     " has the wrong field count");
        std::vector<double> row(f.size());
        for (std::size_t j = 0; j < f.size(); ++j)
            row[j] = f[j].empty() ? std::numeric_limits<double>::quiet_NaN()
                                  : std::strtod(f[j].c_str(), nullptr);
        rows.push_back(std::move(row));
    }
    m.resize(static_cast<int>(rows.size()), static_cast<int>(header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < header.size(); ++c) m(r, c) = rows[r][c];
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}
}  // namespace

void write_chain(const ChainOutput& chain, const std::string& dir, const nlohmann::json& extra) {
    fs::create_directories(dir);
    std::map<std::string, std::string> files;
    files["common.csv"] = matrix_csv(chain.common_names, chain.common);
    for (const auto& [name, m] : chain.unit) files["unit_" + name + ".csv"] = matrix_csv(chain.unit_ids, m);

    nlohmann::json manifest;
    manifest["model"] = chain.model;
    manifest["variant"] = chain.variant;
    manifest["seed"] = chain.seed;
    manifest["config"] = chain.config;
    manifest["draws"] = chain.n_draws();
    manifest["units"] = chain.n_units();
    manifest["diagnostics"] = chain.diagnostics;
    std::string combined;
    for (const auto& [name, content] : files) {
        write_file(fs::path(dir) / name, content);
        const std::string h = git_blob_hash(content);
        manifest["files"][name] = h;
        combined += name + ":" + h + "\n";
    }
    manifest["content_hash"] = git_blob_hash(combined);
    if (!extra.empty()) manifest["run"] = extra;
    write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

ChainOutput load_chain(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("no manifest.json in " + dir);
    const auto manifest = nlohmann::json::parse(in);
    ChainOutput chain;
    chain.model = manifest.value("model", "");
    chain.variant = manifest.value("variant", "");
    chain.seed = manifest.value("seed", std::uint64_t{0});
    chain.config = manifest.value("config", nlohmann::json::object());
    chain.diagnostics = manifest.value("diagnostics", nlohmann::json::object());
    read_matrix_csv((fs::path(dir) / "common.csv").string(), chain.common_names, chain.common);
    for (const auto& [name, hash] : manifest.at("files").items()) {
        if (name.rfind("unit_", 0) != 0) continue;
        const std::string field = name.substr(5, name.size() - 5 - 4);
        std::vector<std::string> header;
        Eigen::MatrixXd m;
        read_matrix_csv((fs::path(dir) / name).string(), header, m);
        if (chain.unit_ids.empty()) chain.unit_ids = header;
        chain.unit[field] = std::move(m);
    }
    return chain;
}

}  // namespace sparsepanel
