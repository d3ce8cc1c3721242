#include "mbcr/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>
#include <vector>

#include "mbcr/errors.hpp"

namespace mbcr {

namespace {

using json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

double parse_double(std::string_view field, std::string_view what) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
        throw InputError("cannot parse number '" + std::string(field) + "' in " + std::string(what));
    return value;
}

long parse_long(std::string_view field, std::string_view what) {
    field = trim(field);
    long value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
        throw InputError("cannot parse integer '" + std::string(field) + "' in " + std::string(what));
    return value;
}

/// Index j >= 1 for a header "xj", 0 otherwise.
long covariate_index(std::string_view name) {
    if (name.size() < 2 || name.front() != 'x') return 0;
    long j = 0;
    const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), j);
    return ec == std::errc() && ptr == name.data() + name.size() && j >= 1 ? j : 0;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

Table parse_table(std::string_view text) {
    Table table;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        const auto line = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (table.header.empty()) {
            for (auto f : fields) table.header.emplace_back(f);
            continue;
        }
        if (fields.size() != table.header.size())
            throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (auto f : fields) row.push_back(parse_double(f, "line " + std::to_string(line_no)));
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw InputError("CSV has no header row");
    if (table.rows.empty()) throw InputError("CSV has no data rows");
    return table;
}

/// Column positions of x1..xp; throws unless they form a contiguous set starting at x1.
std::vector<std::size_t> covariate_columns(const Table& table) {
    std::map<long, std::size_t> found;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const long j = covariate_index(table.header[c]);
        if (j == 0) continue;
        if (!found.emplace(j, c).second) throw InputError("duplicate column '" + table.header[c] + "'");
    }
    if (found.empty()) throw InputError("missing column 'x1'");
    std::vector<std::size_t> columns;
    for (long j = 1; j <= static_cast<long>(found.size()); ++j) {
        const auto it = found.find(j);
        if (it == found.end()) throw InputError("missing column 'x" + std::to_string(j) + "'");
        columns.push_back(it->second);
    }
    return columns;
}

json matrix_to_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index expected, std::string_view what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected)
        throw InputError(std::string(what) + ": expected an array of length " + std::to_string(expected));
    Eigen::VectorXd v(expected);
    for (Eigen::Index i = 0; i < expected; ++i) {
        const auto& e = j[static_cast<std::size_t>(i)];
        if (!e.is_number()) throw InputError(std::string(what) + ": non-numeric entry");
        v(i) = e.get<double>();
    }
    return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index expected, std::string_view what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected)
        throw InputError(std::string(what) + ": expected " + std::to_string(expected) + " rows");
    Eigen::MatrixXd M(expected, expected);
    for (Eigen::Index i = 0; i < expected; ++i)
        M.row(i) = vector_from_json(j[static_cast<std::size_t>(i)], expected, what).transpose();
    return M;
}

template <class T>
void read_field(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError(std::string("config field '") + key + "' has the wrong type");
    }
}

json prior_to_json(const PriorConfig& prior) {
    json j;
    j["mu"] = vector_to_json(prior.mu);
    j["V"] = matrix_to_json(prior.V);
    j["a"] = prior.a;
    j["b"] = prior.b;
    j["lambda"] = prior.lambda;
    j["truncation"] = prior.truncation ? json(*prior.truncation) : json(nullptr);
    return j;
}

json proposal_to_json(const ProposalConfig& proposal) {
    json j;
    j["mu"] = vector_to_json(proposal.mu);
    j["V"] = matrix_to_json(proposal.V);
    j["a"] = proposal.a;
    j["b"] = proposal.b;
    j["L"] = proposal.L;
    j["M"] = proposal.M;
    j["direction_mode"] = std::string(to_string(proposal.direction_mode));
    j["c"] = proposal.c;
    return j;
}

json chain_to_json(const ChainConfig& chain) {
    json j;
    j["iterations"] = chain.iterations;
    j["burn_in"] = chain.burn_in;
    j["thin"] = chain.thin;
    j["seed"] = chain.seed;
    return j;
}

json diagnostics_to_json(const ChainDiagnostics& d) {
    auto by_kind = [](const auto& arr) {
        json j;
        for (MoveKind k : {MoveKind::relocate, MoveKind::remove, MoveKind::add})
            j[std::string(to_string(k))] = arr[static_cast<std::size_t>(k)];
        return j;
    };
    json j;
    j["acceptance_rate_by_kind"] = by_kind(d.acceptance_rate_by_kind);
    j["attempts_by_kind"] = by_kind(d.attempts_by_kind);
    j["accepted_by_kind"] = by_kind(d.accepted_by_kind);
    j["unavailable_additions"] = d.unavailable_additions;
    j["numerical_failures"] = d.numerical_failures;
    j["non_finite_rejections"] = d.non_finite_rejections;
    j["k_trace"] = d.k_trace;
    j["log_post_trace"] = d.log_post_trace;
    j["autocorrelation"] = d.autocorrelation;
    return j;
}

FitConfig fit_config_from_json(const json& root, Eigen::Index p) {
    if (!root.is_object()) throw InputError("config must be a JSON object");
    FitConfig cfg = default_fit_config(p);
    const Eigen::Index d = p + 1;
    if (root.contains("prior")) {
        const auto& j = root.at("prior");
        if (!j.is_object()) throw InputError("config 'prior' must be an object");
        if (j.contains("mu")) cfg.prior.mu = vector_from_json(j.at("mu"), d, "prior.mu");
        if (j.contains("V")) cfg.prior.V = matrix_from_json(j.at("V"), d, "prior.V");
        read_field(j, "a", cfg.prior.a);
        read_field(j, "b", cfg.prior.b);
        read_field(j, "lambda", cfg.prior.lambda);
        if (j.contains("truncation") && !j.at("truncation").is_null()) {
            double bound = 0;
            read_field(j, "truncation", bound);
            cfg.prior.truncation = bound;
        }
    }
    cfg.proposal = ProposalConfig::from_prior(cfg.prior);
    if (root.contains("proposal")) {
        const auto& j = root.at("proposal");
        if (!j.is_object()) throw InputError("config 'proposal' must be an object");
        if (j.contains("mu")) cfg.proposal.mu = vector_from_json(j.at("mu"), d, "proposal.mu");
        if (j.contains("V")) cfg.proposal.V = matrix_from_json(j.at("V"), d, "proposal.V");
        read_field(j, "a", cfg.proposal.a);
        read_field(j, "b", cfg.proposal.b);
        read_field(j, "L", cfg.proposal.L);
        read_field(j, "M", cfg.proposal.M);
        read_field(j, "c", cfg.proposal.c);
        if (j.contains("direction_mode")) {
            std::string mode;
            read_field(j, "direction_mode", mode);
            cfg.proposal.direction_mode = direction_mode_from_string(mode);
        }
    }
    if (root.contains("chain")) {
        const auto& j = root.at("chain");
        if (!j.is_object()) throw InputError("config 'chain' must be an object");
        read_field(j, "iterations", cfg.chain.iterations);
        read_field(j, "burn_in", cfg.chain.burn_in);
        read_field(j, "thin", cfg.chain.thin);
        read_field(j, "seed", cfg.chain.seed);
    }
    cfg.prior.validate();
    cfg.proposal.validate();
    cfg.chain.validate();
    return cfg;
}

json parse_json(std::string_view text, std::string_view what) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw InputError(std::string(what) + " is not valid JSON: " + e.what());
    }
}

}  // namespace

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

DatasetD parse_dataset_csv(std::string_view text) {
    const Table table = parse_table(text);
    const auto columns = covariate_columns(table);
    const auto y_it = std::find(table.header.begin(), table.header.end(), "y");
    if (y_it == table.header.end()) throw InputError("missing column 'y'");
    const auto y_col = static_cast<std::size_t>(y_it - table.header.begin());
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    const auto p = static_cast<Eigen::Index>(columns.size());
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < p; ++j) X(i, j) = row[columns[static_cast<std::size_t>(j)]];
        y(i) = row[y_col];
    }
    return DatasetD(std::move(X), std::move(y));
}

DatasetD read_dataset_csv(const std::filesystem::path& path) { return parse_dataset_csv(read_text_file(path)); }

Eigen::MatrixXd parse_query_csv(std::string_view text) {
    const Table table = parse_table(text);
    const auto columns = covariate_columns(table);
    Eigen::MatrixXd Q(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(columns.size()));
    for (Eigen::Index i = 0; i < Q.rows(); ++i)
        for (Eigen::Index j = 0; j < Q.cols(); ++j)
            Q(i, j) = table.rows[static_cast<std::size_t>(i)][columns[static_cast<std::size_t>(j)]];
    if (!Q.allFinite()) throw InputError("query points must be finite");
    return Q;
}

Eigen::MatrixXd read_query_csv(const std::filesystem::path& path) { return parse_query_csv(read_text_file(path)); }

Eigen::MatrixXd parse_grid(std::string_view spec, Eigen::Index dim) {
    std::vector<std::vector<double>> axes(static_cast<std::size_t>(dim));
    for (auto item : split(spec, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw InputError("grid item '" + std::string(item) + "' lacks '='");
        const long j = covariate_index(trim(item.substr(0, eq)));
        if (j < 1 || j > dim)
            throw InputError("grid coordinate '" + std::string(item.substr(0, eq)) + "' outside x1..x" + std::to_string(dim));
        auto& axis = axes[static_cast<std::size_t>(j - 1)];
        if (!axis.empty()) throw InputError("grid coordinate x" + std::to_string(j) + " given twice");
        const auto parts = split(item.substr(eq + 1), ':');
        if (parts.size() != 3) throw InputError("grid item '" + std::string(item) + "' must be name=lo:hi:count");
        const double lo = parse_double(parts[0], "grid");
        const double hi = parse_double(parts[1], "grid");
        const long count = parse_long(parts[2], "grid");
        if (count < 1 || !std::isfinite(lo) || !std::isfinite(hi) || (count > 1 && !(lo <= hi)))
            throw InputError("grid item '" + std::string(item) + "' has an invalid range");
        for (long k = 0; k < count; ++k)
            axis.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1));
    }
    Eigen::Index total = 1;
    for (std::size_t j = 0; j < axes.size(); ++j) {
        if (axes[j].empty()) throw InputError("grid is missing coordinate x" + std::to_string(j + 1));
        total *= static_cast<Eigen::Index>(axes[j].size());
    }
    Eigen::MatrixXd G(total, dim);
    for (Eigen::Index r = 0; r < total; ++r) {
        Eigen::Index rest = r;
        for (Eigen::Index j = dim - 1; j >= 0; --j) {
            const auto& axis = axes[static_cast<std::size_t>(j)];
            const auto size = static_cast<Eigen::Index>(axis.size());
            G(r, j) = axis[static_cast<std::size_t>(rest % size)];
            rest /= size;
        }
    }
    return G;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> parse_box(std::string_view spec) {
    const auto items = split(spec, ',');
    Eigen::VectorXd lower(static_cast<Eigen::Index>(items.size())), upper(lower.size());
    for (std::size_t j = 0; j < items.size(); ++j) {
        const auto parts = split(items[j], ':');
        if (parts.size() != 2) throw InputError("box item '" + std::string(items[j]) + "' must be lo:hi");
        lower(static_cast<Eigen::Index>(j)) = parse_double(parts[0], "box");
        upper(static_cast<Eigen::Index>(j)) = parse_double(parts[1], "box");
        if (!std::isfinite(lower(static_cast<Eigen::Index>(j))) || !std::isfinite(upper(static_cast<Eigen::Index>(j))) ||
            !(lower(static_cast<Eigen::Index>(j)) < upper(static_cast<Eigen::Index>(j))))
            throw InputError("box item '" + std::string(items[j]) + "' needs finite lo < hi");
    }
    return {std::move(lower), std::move(upper)};
}

FitConfig default_fit_config(Eigen::Index p) {
    FitConfig cfg;
    cfg.prior = PriorConfig::defaults(p);
    cfg.proposal = ProposalConfig::from_prior(cfg.prior);
    return cfg;
}

FitConfig parse_fit_config(std::string_view json_text, Eigen::Index p) {
    return fit_config_from_json(parse_json(json_text, "config"), p);
}

std::string fit_config_to_json(const FitConfig& config) {
    json j;
    j["prior"] = prior_to_json(config.prior);
    j["proposal"] = proposal_to_json(config.proposal);
    j["chain"] = chain_to_json(config.chain);
    return j.dump(2) + "\n";
}

std::string model_to_json(const ChainResult& result) {
    const auto& samples = result.samples;
    json root;
    root["dim"] = samples.dim();
    json draws = json::array();
    for (const auto& state : samples.draws) {
        json planes = json::array();
        for (const auto& h : state) {
            json plane;
            plane["alpha"] = h.intercept;
            plane["beta"] = vector_to_json(h.slope);
            plane["sigma2"] = h.variance;
            planes.push_back(std::move(plane));
        }
        json draw;
        draw["k"] = state.size();
        draw["planes"] = std::move(planes);
        draws.push_back(std::move(draw));
    }
    root["draws"] = std::move(draws);
    root["diagnostics"] = diagnostics_to_json(result.diagnostics);
    root["config"] = {{"prior", prior_to_json(samples.prior)},
                      {"proposal", proposal_to_json(samples.proposal)},
                      {"chain", chain_to_json(samples.chain)}};
    return root.dump() + "\n";
}

PosteriorSamples parse_model(std::string_view json_text) {
    const json root = parse_json(json_text, "model file");
    if (!root.is_object() || !root.contains("dim") || !root.contains("draws"))
        throw InputError("model file needs 'dim' and 'draws'");
    if (!root.at("dim").is_number_integer() || root.at("dim").get<long>() < 1)
        throw InputError("model 'dim' must be a positive integer");
    const auto p = static_cast<Eigen::Index>(root.at("dim").get<long>());
    const auto& draws = root.at("draws");
    if (!draws.is_array() || draws.empty()) throw InputError("model 'draws' must be a non-empty array");

    PosteriorSamples samples;
    samples.draws.reserve(draws.size());
    for (const auto& draw : draws) {
        if (!draw.is_object() || !draw.contains("planes") || !draw.at("planes").is_array())
            throw InputError("model draw lacks 'planes'");
        const auto& planes = draw.at("planes");
        if (draw.contains("k") && draw.at("k") != planes.size())
            throw InputError("model draw 'k' disagrees with its plane count");
        std::vector<HyperplaneD> hs;
        for (const auto& plane : planes) {
            if (!plane.is_object() || !plane.contains("alpha") || !plane.contains("beta") || !plane.contains("sigma2"))
                throw InputError("model plane needs 'alpha', 'beta' and 'sigma2'");
            if (!plane.at("alpha").is_number() || !plane.at("sigma2").is_number())
                throw InputError("model plane has a non-numeric field");
            hs.push_back({plane.at("alpha").get<double>(), vector_from_json(plane.at("beta"), p, "plane beta"),
                          plane.at("sigma2").get<double>()});
        }
        try {
            samples.draws.emplace_back(std::move(hs));
        } catch (const std::invalid_argument& e) {
            throw InputError(std::string("invalid model draw: ") + e.what());
        }
    }
    const FitConfig cfg = root.contains("config") ? fit_config_from_json(root.at("config"), p) : default_fit_config(p);
    samples.prior = cfg.prior;
    samples.proposal = cfg.proposal;
    samples.chain = cfg.chain;
    return samples;
}

PosteriorSamples read_model(const std::filesystem::path& path) { return parse_model(read_text_file(path)); }

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write '" + tmp.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot move output into '" + path.string() + "'");
    }
}

}  // namespace mbcr
