#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace warpcone {

/// Flat key = value configuration with dotted section prefixes. Lines
/// starting with '#' are comments. Relative paths resolve against the
/// directory of the file the config was read from.
class Config {
public:
    static Config parse(std::string_view text, std::filesystem::path base_dir = {});
    static Config load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    /// Throw InputError naming the key when missing or malformed.
    std::string require(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    double require_double(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    std::vector<double> get_list(const std::string& key) const;
    std::filesystem::path get_path(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    const std::filesystem::path& base_dir() const { return base_dir_; }
    /// Canonical text form, one sorted key per line.
    std::string dump() const;

private:
    std::map<std::string, std::string> values_;
    std::filesystem::path base_dir_;
};

/// Numeric CSV rows. Blank lines, '#' comments and a leading header row are
/// skipped. Throws InputError on unreadable files, malformed numbers or a
/// column count other than `columns` (when nonzero).
std::vector<std::vector<double>> read_csv(const std::filesystem::path& path, std::size_t columns = 0);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double x);

}  // namespace warpcone
