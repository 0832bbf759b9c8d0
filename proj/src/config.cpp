#include "dpc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dpc/errors.hpp"

namespace dpc {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as number");
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    // %.17g always round-trips; try shorter forms first.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::stod(buf) == v) break;
    }
    return buf;
}

KvFile KvFile::parse(const std::string& text) {
    KvFile f;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        }
        f.set(key, value);
    }
    return f;
}

KvFile KvFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool KvFile::has(const std::string& key) const { return entries_.count(key) != 0; }

std::optional<std::string> KvFile::raw(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

double KvFile::get_double(const std::string& key) const {
    const auto v = raw(key);
    if (!v) throw ConfigError("missing config key: " + key);
    return parse_double(key, *v);
}

double KvFile::get_double(const std::string& key, double fallback) const {
    const auto v = raw(key);
    return v ? parse_double(key, *v) : fallback;
}

long KvFile::get_int(const std::string& key) const {
    const double v = get_double(key);
    const long n = static_cast<long>(v);
    if (static_cast<double>(n) != v) throw ConfigError("config key '" + key + "' is not an integer");
    return n;
}

long KvFile::get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::string KvFile::get_string(const std::string& key, const std::string& fallback) const {
    const auto v = raw(key);
    return v ? *v : fallback;
}

std::vector<double> KvFile::get_list(const std::string& key) const {
    const auto v = raw(key);
    if (!v) throw ConfigError("missing config key: " + key);
    std::vector<double> out;
    std::istringstream in(*v);
    std::string item;
    while (std::getline(in, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        out.push_back(parse_double(key, t));
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

void KvFile::set(const std::string& key, const std::string& value) {
    if (entries_.find(key) == entries_.end()) order_.push_back(key);
    entries_[key] = value;
}

void KvFile::set_double(const std::string& key, double value) { set(key, format_double(value)); }

void KvFile::set_int(const std::string& key, long value) { set(key, std::to_string(value)); }

void KvFile::set_list(const std::string& key, const std::vector<double>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ", ";
        s += format_double(values[i]);
    }
    set(key, s);
}

std::string KvFile::to_text() const {
    std::string out;
    for (const auto& key : order_) {
        out += key;
        out += " = ";
        out += entries_.at(key);
        out += "\n";
    }
    return out;
}

void KvFile::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file: " + path);
    out << to_text();
}

}  // namespace dpc
