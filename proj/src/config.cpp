#include "csolab/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace csolab {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

FlatConfig FlatConfig::parse_string(const std::string& text) {
    FlatConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

FlatConfig FlatConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("FlatConfig: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    // Accept the JSON-equivalent form transparently.
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        return from_json_text(text);
    }
    return parse_string(text);
}

FlatConfig FlatConfig::from_json_text(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw std::runtime_error("FlatConfig: JSON config must be an object");
    FlatConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (value.is_string()) cfg.values_[key] = value.get<std::string>();
        else if (value.is_boolean()) cfg.values_[key] = value.get<bool>() ? "true" : "false";
        else cfg.values_[key] = value.dump();
    }
    return cfg;
}

bool FlatConfig::has(const std::string& key) const { return values_.count(key) != 0; }

std::string FlatConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

long long FlatConfig::get_int(const std::string& key, long long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': expected integer, got '" +
                                 it->second + "'");
    }
}

double FlatConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': expected number, got '" +
                                 it->second + "'");
    }
}

bool FlatConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error("config key '" + key + "': expected true/false, got '" +
                             it->second + "'");
}

std::vector<std::string> FlatConfig::get_list(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return {};
    std::vector<std::string> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void FlatConfig::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

std::string FlatConfig::to_text() const {
    std::ostringstream out;
    for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
    return out.str();
}

std::string FlatConfig::to_json_text() const {
    nlohmann::ordered_json j;
    for (const auto& [key, value] : values_) j[key] = value;
    return j.dump(2);
}

void FlatConfig::validate_keys(const std::vector<std::string>& known) const {
    for (const auto& [key, value] : values_) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::runtime_error("config: unknown key '" + key + "'");
        }
    }
}

} // namespace csolab
