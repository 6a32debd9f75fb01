#pragma once

#include <map>
#include <string>
#include <vector>

namespace csolab {

// Human-editable experiment configuration: one "key = value" pair per line,
// flat dotted key paths, '#' comments. Values keep their text form here;
// typed accessors parse on demand and validate. A JSON object with the same
// keys is accepted as an equivalent schema.
class FlatConfig {
public:
    static FlatConfig parse_string(const std::string& text);
    static FlatConfig parse_file(const std::string& path);
    static FlatConfig from_json_text(const std::string& text);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // comma-separated list
    std::vector<std::string> get_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value);

    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string to_text() const;
    std::string to_json_text() const;

    // Throws when a key outside the known set is present (catches typos).
    void validate_keys(const std::vector<std::string>& known) const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace csolab
