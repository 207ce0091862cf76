#include "nlrte/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

namespace nlrte {

namespace {

enum class Type { real, integer, boolean, text, list, words };

struct KeySpec {
    Type type;
    std::string fallback;
    // Extra check on a parsed real/integer; empty message means ok.
    std::string (*check)(double) = nullptr;
};

std::string positive(double v) { return v > 0.0 ? "" : "must be > 0"; }
std::string nonneg(double v) { return v >= 0.0 ? "" : "must be >= 0"; }
std::string at_least_one(double v) { return v >= 1.0 ? "" : "must be >= 1"; }
std::string at_least_two(double v) { return v >= 2.0 ? "" : "must be >= 2"; }
std::string unit_interval(double v) { return v > 0.0 && v <= 1.0 ? "" : "must lie in (0, 1]"; }
std::string dim(double v) { return v == 1.0 || v == 2.0 ? "" : "must be 1 or 2"; }

const std::map<std::string, KeySpec>& schema() {
    static const std::map<std::string, KeySpec> s = {
        {"grid.dimension", {Type::integer, "1", dim}},
        {"grid.nx", {Type::integer, "32", at_least_two}},
        {"grid.ny", {Type::integer, "", at_least_two}},
        {"grid.extent_x", {Type::real, "1", positive}},
        {"grid.extent_y", {Type::real, "1", positive}},
        {"evolution.horizon", {Type::real, "1", positive}},
        {"evolution.steps", {Type::integer, "100", at_least_one}},
        {"angular.n_angles", {Type::integer, "16", at_least_two}},
        {"phase.family", {Type::text, "isotropic"}},
        {"phase.g", {Type::real, "0"}},
        {"transport.sigma_s", {Type::real, "1", positive}},
        {"transport.epsilon", {Type::real, "1", unit_interval}},
        {"absorption.coefficients", {Type::list, "0"}},
        {"absorption.left_coefficients", {Type::list, ""}},
        {"absorption.split", {Type::real, "0.5"}},
        {"absorption.files", {Type::words, ""}},
        {"initial.kind", {Type::text, "constant"}},
        {"initial.value", {Type::real, "1", nonneg}},
        {"initial.width", {Type::real, "0.1", positive}},
        {"initial.file", {Type::text, ""}},
        {"solver.method", {Type::text, "march"}},
        {"solver.tol_picard", {Type::real, "1e-10", positive}},
        {"solver.max_picard", {Type::integer, "200", at_least_one}},
        {"solver.tol_source", {Type::real, "1e-12", positive}},
        {"solver.max_source", {Type::integer, "10000", at_least_one}},
        {"solver.nonlinearity", {Type::text, "per_step_picard"}},
        {"diffusion.argument", {Type::text, "angular_mean"}},
        {"study.epsilons", {Type::list, "0.4, 0.2, 0.1, 0.05"}},
        {"study.nx", {Type::integer, "256", at_least_two}},
        {"study.nz", {Type::integer, "20", at_least_one}},
        {"study.degenerate", {Type::boolean, "false"}},
        {"study.refine", {Type::boolean, "true"}},
        {"study.max_refinements", {Type::integer, "6", at_least_one}},
        {"study.lower_bound_c", {Type::real, "1", nonneg}},
        {"inverse.sources", {Type::list, "0.5, 1"}},
        {"inverse.noise", {Type::real, "0", nonneg}},
        {"inverse.seed", {Type::integer, "0", nonneg}},
        {"inverse.smooth", {Type::real, "-1"}},
        {"inverse.balance", {Type::text, "consistent"}},
        {"inverse.cond_max", {Type::real, "1e8", positive}},
        {"inverse.tol_m", {Type::real, "1e-8", positive}},
        {"inverse.max_iterations", {Type::integer, "100", at_least_one}},
        {"wigner.epsilon", {Type::real, "0.05", unit_interval}},
        {"wigner.sigma_v", {Type::real, "0.7", nonneg}},
        {"wigner.decorrelation", {Type::real, "-1"}},
        {"wigner.K", {Type::real, "0.5", nonneg}},
        {"wigner.ensemble", {Type::integer, "1024", at_least_one}},
        {"wigner.dz", {Type::real, "0.01", positive}},
        {"wigner.points", {Type::integer, "512", at_least_two}},
        {"wigner.extent", {Type::real, "6.4", positive}},
        {"wigner.width", {Type::real, "0.4", positive}},
        {"wigner.horizon", {Type::real, "0.5", positive}},
        {"wigner.targets", {Type::list, "0.125, 0.25, 0.375, 0.5"}},
        {"wigner.transport_steps", {Type::integer, "500", at_least_one}},
        {"wigner.refine", {Type::integer, "8", at_least_one}},
        {"wigner.threshold", {Type::real, "0.15", positive}},
        {"wigner.smoothing", {Type::real, "-1"}},
        {"wigner.snapshots", {Type::boolean, "false"}},
        {"wigner.seed", {Type::integer, "0", nonneg}},
        {"conditions.f_sup", {Type::real, "", nonneg}},
        {"inequality.trials", {Type::integer, "10000", at_least_one}},
        {"inequality.seed", {Type::integer, "42", nonneg}},
        {"inequality.cells", {Type::integer, "4", at_least_one}},
        {"output.dir", {Type::text, ""}},
    };
    return s;
}

const std::map<std::string, std::vector<std::string>>& choices() {
    static const std::map<std::string, std::vector<std::string>> c = {
        {"phase.family", {"isotropic", "linear_anisotropic", "henyey_greenstein"}},
        {"initial.kind", {"constant", "sine", "sine2", "gaussian", "file"}},
        {"solver.method", {"march", "picard"}},
        {"solver.nonlinearity", {"lagged", "per_step_picard"}},
        {"diffusion.argument", {"angular_mean", "point_value"}},
        {"inverse.balance", {"consistent", "central"}},
    };
    return c;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::optional<double> to_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    return out;
}

// Returns an error message, empty when the value is acceptable.
std::string check_value(const std::string& key, const std::string& value) {
    const auto& spec = schema().at(key);
    auto checked = [&](double v) { return spec.check ? spec.check(v) : std::string(); };
    switch (spec.type) {
    case Type::real: {
        const auto v = to_real(value);
        if (!v) return "expected a number";
        return checked(*v);
    }
    case Type::integer: {
        const auto v = to_real(value);
        if (!v || *v != std::floor(*v) || value.find_first_of(".eE") != std::string::npos) return "expected an integer";
        return checked(*v);
    }
    case Type::boolean:
        return value == "true" || value == "false" ? "" : "expected true or false";
    case Type::list:
        for (const auto& item : split(value, ','))
            if (!to_real(item)) return "expected a comma-separated list of numbers";
        return "";
    case Type::words:
    case Type::text:
        if (auto it = choices().find(key); it != choices().end()) {
            if (std::find(it->second.begin(), it->second.end(), value) == it->second.end()) {
                std::string opts;
                for (const auto& o : it->second) opts += (opts.empty() ? "" : ", ") + o;
                return "expected one of: " + opts;
            }
        }
        return "";
    }
    return "";
}

}  // namespace

ConfigError::ConfigError(const std::string& origin, int line, int column, const std::string& what)
    : ValidationError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

Config Config::parse(const std::string& text, const std::string& origin) {
    Config c;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        const int key_col = static_cast<int>(line.find_first_not_of(" \t")) + 1;
        if (eq == std::string::npos) throw ConfigError(origin, lineno, key_col, "expected 'section.key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.find('.') == std::string::npos)
            throw ConfigError(origin, lineno, key_col, "key '" + key + "' is not of the form section.key");
        if (!schema().count(key)) throw ConfigError(origin, lineno, key_col, "unknown key '" + key + "'");
        if (c.entries_.count(key)) throw ConfigError(origin, lineno, key_col, "duplicate key '" + key + "'");
        const auto vpos = line.find_first_not_of(" \t", eq + 1);
        const int value_col = static_cast<int>(vpos == std::string::npos ? eq + 1 : vpos) + 1;
        if (value.empty()) throw ConfigError(origin, lineno, value_col, "missing value for '" + key + "'");
        if (const auto msg = check_value(key, value); !msg.empty())
            throw ConfigError(origin, lineno, value_col, key + ": " + msg + " (got '" + value + "')");
        c.entries_[key] = value;
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

std::map<std::string, std::string> Config::resolved() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, spec] : schema()) {
        auto it = entries_.find(k);
        out[k] = it != entries_.end() ? it->second : spec.fallback;
    }
    return out;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!schema().count(key)) throw ValidationError("unknown config key '" + key + "'");
    if (const auto msg = check_value(key, value); !msg.empty())
        throw ValidationError(key + ": " + msg + " (got '" + value + "')");
    entries_[key] = value;
}

std::string Config::text(const std::string& key) const {
    auto s = schema().find(key);
    if (s == schema().end()) throw ValidationError("unknown config key '" + key + "'");
    auto it = entries_.find(key);
    return it != entries_.end() ? it->second : s->second.fallback;
}

double Config::real(const std::string& key) const {
    const auto v = to_real(text(key));
    if (!v) throw ValidationError("config key '" + key + "' has no numeric value");
    return *v;
}

long long Config::integer(const std::string& key) const { return std::llround(real(key)); }

bool Config::boolean(const std::string& key) const { return text(key) == "true"; }

std::vector<double> Config::list(const std::string& key) const {
    std::vector<double> out;
    const auto t = text(key);
    if (t.empty()) return out;
    for (const auto& item : split(t, ',')) out.push_back(*to_real(item));
    return out;
}

std::vector<std::string> Config::words(const std::string& key) const {
    std::vector<std::string> out;
    const auto t = text(key);
    if (t.empty()) return out;
    for (auto& item : split(t, ',')) out.push_back(item);
    return out;
}

std::vector<std::string> Config::known_keys() {
    std::vector<std::string> k;
    for (const auto& [key, spec] : schema()) k.push_back(key);
    return k;
}

}  // namespace nlrte
