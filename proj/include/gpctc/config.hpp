#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpctc::cfg {

class config_error : public std::runtime_error {
public:
    config_error(const std::string& msg, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg) {}
};

// Sectioned key-value configuration:
//   [section]
//   key = value
// Sections and keys keep their insertion order so that parse -> serialize
// -> parse round-trips exactly.
class Config {
public:
    static Config parse(const std::string& text) {
        Config c;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            const auto last = line.find_last_not_of(" \t\r");
            std::string trimmed = line.substr(first, last - first + 1);
            if (trimmed[0] == '#' || trimmed[0] == ';') continue;
            if (trimmed.front() == '[') {
                if (trimmed.back() != ']') throw config_error("unterminated section header", lineno);
                section = trimmed.substr(1, trimmed.size() - 2);
                c.ensure_section(section);
                continue;
            }
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) throw config_error("expected key = value", lineno);
            std::string key = trimmed.substr(0, eq);
            std::string value = trimmed.substr(eq + 1);
            key.erase(key.find_last_not_of(" \t") + 1);
            value.erase(0, value.find_first_not_of(" \t"));
            if (key.empty()) throw config_error("empty key", lineno);
            c.set(section, key, value);
        }
        return c;
    }

    std::string serialize() const {
        std::ostringstream out;
        for (const auto& sec : order_) {
            if (!sec.empty()) out << "[" << sec << "]\n";
            for (const auto& key : key_order_.at(sec))
                out << key << " = " << values_.at(sec).at(key) << "\n";
        }
        return out.str();
    }

    bool has(const std::string& section, const std::string& key) const {
        auto s = values_.find(section);
        return s != values_.end() && s->second.count(key) > 0;
    }

    std::string get(const std::string& section, const std::string& key) const {
        if (!has(section, key))
            throw config_error("missing config value [" + section + "] " + key);
        return values_.at(section).at(key);
    }

    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const {
        return has(section, key) ? values_.at(section).at(key) : fallback;
    }

    double get_double(const std::string& section, const std::string& key) const {
        try {
            return std::stod(get(section, key));
        } catch (const std::invalid_argument&) {
            throw config_error("not a number: [" + section + "] " + key);
        }
    }
    double get_double_or(const std::string& section, const std::string& key, double fb) const {
        return has(section, key) ? get_double(section, key) : fb;
    }
    long get_int(const std::string& section, const std::string& key) const {
        try {
            return std::stol(get(section, key));
        } catch (const std::invalid_argument&) {
            throw config_error("not an integer: [" + section + "] " + key);
        }
    }
    long get_int_or(const std::string& section, const std::string& key, long fb) const {
        return has(section, key) ? get_int(section, key) : fb;
    }
    bool get_bool_or(const std::string& section, const std::string& key, bool fb) const {
        if (!has(section, key)) return fb;
        const std::string v = get(section, key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw config_error("not a boolean: [" + section + "] " + key);
    }

    // comma-separated doubles
    std::vector<double> get_list(const std::string& section, const std::string& key) const {
        std::vector<double> vals;
        std::istringstream in(get(section, key));
        std::string tok;
        while (std::getline(in, tok, ',')) vals.push_back(std::stod(tok));
        return vals;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        ensure_section(section);
        if (values_[section].count(key) == 0) key_order_[section].push_back(key);
        values_[section][key] = value;
    }

    bool operator==(const Config& o) const {
        return order_ == o.order_ && key_order_ == o.key_order_ && values_ == o.values_;
    }

private:
    void ensure_section(const std::string& section) {
        if (values_.count(section) == 0) {
            order_.push_back(section);
            values_[section] = {};
            key_order_[section] = {};
        }
    }

    std::vector<std::string> order_;
    std::map<std::string, std::vector<std::string>> key_order_;
    std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace gpctc::cfg
