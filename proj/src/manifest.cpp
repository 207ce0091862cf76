#include "nlrte/manifest.hpp"

#include <fstream>
#include <sstream>

#include "nlrte/error.hpp"
#include "nlrte/table.hpp"

namespace nlrte {

void RunManifest::set(const std::string& key, const std::string& value) {
    if (key.empty() || key.find_first_of("=#\n ") != std::string::npos)
        throw ValidationError("invalid manifest key '" + key + "'");
    if (value.find('\n') != std::string::npos) throw ValidationError("manifest value for " + key + " spans lines");
    entries_[key] = value;
}

void RunManifest::set(const std::string& key, double value) { set(key, format_double(value)); }

void RunManifest::set(const std::string& key, long long value) { set(key, std::to_string(value)); }

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path.generic_string()); }

const std::string& RunManifest::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ValidationError("manifest has no key " + key);
    return it->second;
}

double RunManifest::get_double(const std::string& key) const { return std::stod(get(key)); }

std::string RunManifest::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    for (std::size_t i = 0; i < outputs_.size(); ++i)
        out += "outputs." + std::to_string(i) + " = " + outputs_[i] + "\n";
    return out;
}

RunManifest RunManifest::parse(const std::string& text) {
    RunManifest m;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos)
            throw ValidationError("manifest line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 3);
        if (key.rfind("outputs.", 0) == 0)
            m.outputs_.push_back(value);
        else
            m.set(key, value);
    }
    return m;
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << serialize();
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

}  // namespace nlrte
