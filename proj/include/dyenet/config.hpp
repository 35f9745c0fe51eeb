#pragma once

#include <map>
#include <string>
#include <vector>

namespace dyenet {

// Flat key=value configuration. Every key lives in one registry together
// with its default and one-line doc; setting an unknown key is a contract
// violation so typos fail loudly. CLI flags call set() after load() and
// therefore override file values.
class Config {
public:
    struct Entry {
        std::string key;
        std::string def;
        std::string doc;
    };

    // The single reference table of every known key.
    static const std::vector<Entry>& registry();

    Config() = default;

    static Config load(const std::string& path);      // parse a config file
    void parse_line(const std::string& line, const std::string& where);
    void set(const std::string& key, const std::string& value);

    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;      // on/off/true/false/1/0
    std::vector<int> get_int_list(const std::string& key) const;  // comma separated

    const std::map<std::string, std::string>& overrides() const { return values_; }

private:
    std::map<std::string, std::string> values_;  // only keys that were set
};

}  // namespace dyenet
