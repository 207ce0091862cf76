#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nlrte/error.hpp"

namespace nlrte {

// Malformed configuration text; carries the 1-based line and column.
class ConfigError : public ValidationError {
public:
    ConfigError(const std::string& origin, int line, int column, const std::string& what);
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

// Line-oriented `section.key = value` document with `#` comments.  Every key
// must appear in the built-in schema; values are type-checked at load.
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<config>");
    static Config load(const std::filesystem::path& path);

    // Canonical text: explicit entries only, sorted by key.
    std::string serialize() const;
    // Every schema key with its effective value (explicit or default).
    std::map<std::string, std::string> resolved() const;

    bool has(const std::string& key) const { return entries_.count(key) > 0; }
    void set(const std::string& key, const std::string& value);

    std::string text(const std::string& key) const;
    double real(const std::string& key) const;
    long long integer(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::vector<double> list(const std::string& key) const;
    std::vector<std::string> words(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
    friend bool operator==(const Config&, const Config&) = default;

    static std::vector<std::string> known_keys();

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace nlrte
