#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace avgdqn {

enum class KeyType { integer, real, text, boolean, list };

struct ConfigKey {
    std::string name;
    KeyType type;
    std::string default_value;
    std::string doc;
};

/// Every recognized key with its default, in documentation order. Keys under
/// `ale.` record the Atari hyperparameters for reference; no preset reads them.
const std::vector<ConfigKey>& config_keys();

/// Flat key = value configuration. Unknown keys and values that do not parse
/// as the key's type are rejected on set().
class Config {
public:
    /// All keys at their defaults.
    Config();

    /// Parses `key = value` lines; blank lines and `#` comments are ignored.
    static Config parse(std::istream& in);

    void set(const std::string& key, const std::string& value);
    /// Applies a `key=value` override.
    void apply(const std::string& assignment);

    const std::string& get(const std::string& key) const;
    double get_real(const std::string& key) const;
    long long get_int(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const;
    std::vector<double> get_real_list(const std::string& key) const;
    std::vector<std::size_t> get_size_list(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

    /// Sorted `key=value` lines; equal for semantically equal configs.
    std::string canonical() const;
    /// Hex SHA-256 of canonical().
    std::string hash() const;

private:
    std::map<std::string, std::string> values_;
};

/// Renders config_keys() as a commented key = value file.
void write_config_reference(std::ostream& out);

}  // namespace avgdqn
