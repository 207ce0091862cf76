#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace nlrte {

// Flat ordered key/value record of one run. Serialized in the same
// `key = value` line grammar as configs, keys sorted, doubles as %.17g.
class RunManifest {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, long long value);
    void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    void add_output(const std::filesystem::path& path);

    bool contains(const std::string& key) const { return entries_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
    const std::vector<std::string>& outputs() const noexcept { return outputs_; }

    std::string serialize() const;
    static RunManifest parse(const std::string& text);
    void write(const std::filesystem::path& path) const;
    static RunManifest read(const std::filesystem::path& path);

    friend bool operator==(const RunManifest&, const RunManifest&) = default;

private:
    std::map<std::string, std::string> entries_;
    std::vector<std::string> outputs_;
};

}  // namespace nlrte
