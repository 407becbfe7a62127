#include "airfl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "airfl/channel.hpp"
#include "airfl/error.hpp"

namespace airfl {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text)
{
    const auto t = trim(text);
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    if (t == "inf") return std::numeric_limits<double>::infinity();
    if (t == "nan" || t == "default") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, v);
    if (t.empty() || ec != std::errc{} || ptr != end) fail(ErrorKind::invalid_argument, key + ": not a number: " + text);
    return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text)
{
    const auto t = trim(text);
    std::uint64_t v = 0;
    const auto* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, v);
    if (t.empty() || ec != std::errc{} || ptr != end) {
        fail(ErrorKind::invalid_argument, key + ": not a non-negative integer: " + text);
    }
    return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(key, item));
    if (out.empty()) fail(ErrorKind::invalid_argument, key + ": empty list");
    return out;
}

std::string format_list(const std::vector<double>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

struct Field {
    const char* name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define AIRFL_SIZE(key, member)                                                                    \
    Field{key, [](ExperimentConfig& c, const std::string& v) { c.member = parse_unsigned(key, v); }, \
          [](const ExperimentConfig& c) { return std::to_string(c.member); }}
#define AIRFL_REAL(key, member)                                                                 \
    Field{key, [](ExperimentConfig& c, const std::string& v) { c.member = parse_real(key, v); }, \
          [](const ExperimentConfig& c) { return format_double(c.member); }}
#define AIRFL_TEXT(key, member)                                                             \
    Field{key, [](ExperimentConfig& c, const std::string& v) { c.member = trim(v); }, \
          [](const ExperimentConfig& c) { return c.member; }}
#define AIRFL_LIST(key, member)                                                                 \
    Field{key, [](ExperimentConfig& c, const std::string& v) { c.member = parse_list(key, v); }, \
          [](const ExperimentConfig& c) { return format_list(c.member); }}

const std::vector<Field>& fields()
{
    static const std::vector<Field> table{
        AIRFL_SIZE("devices", devices),
        AIRFL_SIZE("clusters", clusters),
        AIRFL_SIZE("rounds", rounds),
        AIRFL_SIZE("batch", batch),
        AIRFL_REAL("lr", lr),
        AIRFL_REAL("lipschitz", lipschitz),
        AIRFL_REAL("power_w", power_w),
        AIRFL_REAL("noise_dbm", noise_dbm),
        AIRFL_REAL("omega0_db", omega0_db),
        AIRFL_REAL("kappa", kappa),
        AIRFL_REAL("ring_inner_m", ring_inner_m),
        AIRFL_REAL("ring_outer_m", ring_outer_m),
        Field{"data", [](ExperimentConfig& c, const std::string& v) { c.data = parse_data_mode(trim(v)); },
              [](const ExperimentConfig& c) { return to_string(c.data); }},
        Field{"scheme", [](ExperimentConfig& c, const std::string& v) { c.scheme = parse_scheme(trim(v)); },
              [](const ExperimentConfig& c) { return to_string(c.scheme); }},
        AIRFL_SIZE("seed", seed),
        AIRFL_REAL("rho", rho),
        AIRFL_REAL("rho1", rho1),
        AIRFL_REAL("rho2", rho2),
        AIRFL_SIZE("recluster_period", recluster_period),
        AIRFL_SIZE("solver_max_iter", solver_max_iter),
        AIRFL_REAL("solver_tol", solver_tol),
        AIRFL_TEXT("model", model),
        AIRFL_SIZE("hidden", hidden),
        AIRFL_SIZE("blob_classes", blob_classes),
        AIRFL_SIZE("blob_dim", blob_dim),
        AIRFL_REAL("blob_spread", blob_spread),
        AIRFL_SIZE("blob_samples", blob_samples),
        AIRFL_REAL("test_fraction", test_fraction),
        AIRFL_TEXT("idx_train_images", idx_train_images),
        AIRFL_TEXT("idx_train_labels", idx_train_labels),
        AIRFL_TEXT("idx_test_images", idx_test_images),
        AIRFL_TEXT("idx_test_labels", idx_test_labels),
        AIRFL_SIZE("quad_dim", quad_dim),
        AIRFL_SIZE("quad_pairs", quad_pairs),
        AIRFL_REAL("quad_noise", quad_noise),
        AIRFL_SIZE("seeds", seeds),
        AIRFL_LIST("sweep_clusters", sweep_clusters),
        AIRFL_LIST("sweep_power", sweep_power),
        AIRFL_SIZE("summary_window", summary_window),
    };
    return table;
}

#undef AIRFL_SIZE
#undef AIRFL_REAL
#undef AIRFL_TEXT
#undef AIRFL_LIST

const Field& field(const std::string& key)
{
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.name; });
    if (it == table.end()) fail(ErrorKind::invalid_argument, "unknown config key: " + key);
    return *it;
}

} // namespace

Scheme parse_scheme(const std::string& name)
{
    if (name == "proposed") return Scheme::proposed;
    if (name == "static") return Scheme::static_clustering;
    if (name == "similarity") return Scheme::similarity;
    if (name == "maxpower") return Scheme::max_power;
    if (name == "direct") return Scheme::direct;
    if (name == "mse") return Scheme::mse;
    fail(ErrorKind::invalid_argument, "unknown scheme: " + name);
}

std::string to_string(Scheme scheme)
{
    switch (scheme) {
    case Scheme::proposed: return "proposed";
    case Scheme::static_clustering: return "static";
    case Scheme::similarity: return "similarity";
    case Scheme::max_power: return "maxpower";
    case Scheme::direct: return "direct";
    case Scheme::mse: return "mse";
    }
    return "?";
}

DataMode parse_data_mode(const std::string& name)
{
    if (name == "iid") return DataMode::iid;
    if (name == "noniid") return DataMode::noniid;
    if (name == "synthetic") return DataMode::synthetic;
    fail(ErrorKind::invalid_argument, "unknown data mode: " + name);
}

std::string to_string(DataMode mode)
{
    switch (mode) {
    case DataMode::iid: return "iid";
    case DataMode::noniid: return "noniid";
    case DataMode::synthetic: return "synthetic";
    }
    return "?";
}

std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) fail(ErrorKind::internal, "number formatting failed");
    return {buf, ptr};
}

double ExperimentConfig::noise_watts() const
{
    if (std::isinf(noise_dbm) && noise_dbm < 0) return 0.0;
    return dbm_to_watts(noise_dbm);
}

void ExperimentConfig::set(const std::string& key, const std::string& value)
{
    field(trim(key)).set(*this, value);
}

std::string ExperimentConfig::get(const std::string& key) const
{
    return field(trim(key)).get(*this);
}

const std::vector<std::string>& ExperimentConfig::keys()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& f : fields()) out.emplace_back(f.name);
        return out;
    }();
    return names;
}

void ExperimentConfig::load(std::istream& in)
{
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(ErrorKind::invalid_argument, "line " + std::to_string(lineno) + ": expected key = value");
        }
        set(line.substr(0, eq), line.substr(eq + 1));
    }
}

void ExperimentConfig::load_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open config file: " + path);
    load(in);
}

void ExperimentConfig::validate() const
{
    require(devices >= 1, ErrorKind::invalid_argument, "need at least one device");
    require(clusters >= 1 && clusters <= devices, ErrorKind::invalid_argument, "clusters must be in [1, devices]");
    require(batch >= 1, ErrorKind::invalid_argument, "batch must be positive");
    require(lipschitz > 0.0 && std::isfinite(lipschitz), ErrorKind::invalid_argument, "lipschitz must be positive");
    require(lr >= 0.0 && std::isfinite(lr), ErrorKind::invalid_argument, "lr must be non-negative");
    require(power_w > 0.0 && std::isfinite(power_w), ErrorKind::invalid_argument, "power_w must be positive");
    require(!std::isnan(noise_dbm) && noise_dbm < std::numeric_limits<double>::infinity(), ErrorKind::invalid_argument,
            "noise_dbm must be finite or -inf");
    require(std::isfinite(omega0_db), ErrorKind::invalid_argument, "omega0_db must be finite");
    require(kappa >= 0.0 && std::isfinite(kappa), ErrorKind::invalid_argument, "kappa must be non-negative");
    require(ring_inner_m > 0.0 && ring_inner_m < ring_outer_m, ErrorKind::invalid_argument,
            "ring radii must satisfy 0 < inner < outer");
    require(recluster_period >= 1, ErrorKind::invalid_argument, "recluster_period must be positive");
    require(solver_max_iter >= 1, ErrorKind::invalid_argument, "solver_max_iter must be positive");
    require(solver_tol > 0.0, ErrorKind::invalid_argument, "solver_tol must be positive");
    require(test_fraction >= 0.0 && test_fraction < 1.0, ErrorKind::invalid_argument,
            "test_fraction must be in [0, 1)");
    require(seeds >= 1, ErrorKind::invalid_argument, "seeds must be positive");
    require(summary_window >= 1, ErrorKind::invalid_argument, "summary_window must be positive");
    for (const double rho_value : {rho, rho1, rho2}) {
        require(std::isnan(rho_value) || std::isfinite(rho_value), ErrorKind::invalid_argument,
                "clustering weights must be finite");
    }
}

} // namespace airfl
