#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dpc {

// Flat "key = value" text files. Lines starting with '#' and blank lines are
// ignored. Values keep their raw text; typed getters parse on demand.
class KvFile {
public:
    KvFile() = default;

    static KvFile parse(const std::string& text);
    static KvFile load(const std::string& path);

    bool has(const std::string& key) const;
    std::optional<std::string> raw(const std::string& key) const;

    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback = "") const;
    // Comma-separated list of doubles.
    std::vector<double> get_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, long value);
    void set_list(const std::string& key, const std::vector<double>& values);

    std::string to_text() const;
    void save(const std::string& path) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::vector<std::string> order_;
};

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace dpc
