#include "warpcone/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "warpcone/error.hpp"

namespace warpcone {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

Config Config::parse(std::string_view text, std::filesystem::path base_dir) {
    Config cfg;
    cfg.base_dir_ = std::move(base_dir);
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw InputError("config line " + std::to_string(number) + ": expected key = value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw InputError("config line " + std::to_string(number) + ": empty key");
        if (cfg.values_.count(key)) throw InputError("config line " + std::to_string(number) + ": duplicate key " + key);
        cfg.values_[key] = value;
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.parent_path());
}

std::optional<std::string> Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

std::string Config::require(const std::string& key) const {
    const auto v = get(key);
    if (!v || v->empty()) throw InputError("config: missing key " + key);
    return *v;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    const auto x = parse_number(*v);
    if (!x) throw InputError("config: " + key + " is not a number: " + *v);
    return *x;
}

double Config::require_double(const std::string& key) const {
    const std::string v = require(key);
    const auto x = parse_number(v);
    if (!x) throw InputError("config: " + key + " is not a number: " + v);
    return *x;
}

int Config::get_int(const std::string& key, int fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    const auto x = parse_number(*v);
    if (!x || *x != std::floor(*x) || std::abs(*x) > 1e9) throw InputError("config: " + key + " is not an integer: " + *v);
    return static_cast<int>(*x);
}

std::vector<double> Config::get_list(const std::string& key) const {
    std::vector<double> out;
    const auto v = get(key);
    if (!v || v->empty()) return out;
    for (const std::string& item : split(*v, ',')) {
        const auto x = parse_number(item);
        if (!x) throw InputError("config: " + key + " has a non-numeric entry '" + item + "'");
        out.push_back(*x);
    }
    return out;
}

std::filesystem::path Config::get_path(const std::string& key) const {
    std::filesystem::path p = require(key);
    if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
    return p;
}

std::string Config::dump() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& path, std::size_t columns) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int number = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::vector<double> row;
        bool numeric = true;
        for (const std::string& cell : split(t, ',')) {
            const auto x = parse_number(cell);
            if (!x) {
                numeric = false;
                break;
            }
            row.push_back(*x);
        }
        if (!numeric) {
            if (!seen_data) {
                seen_data = true;  // header row
                continue;
            }
            throw InputError(path.string() + ":" + std::to_string(number) + ": malformed number");
        }
        seen_data = true;
        if (columns != 0 && row.size() != columns)
            throw InputError(path.string() + ":" + std::to_string(number) + ": expected " + std::to_string(columns) +
                             " columns");
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw EvaluationError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw EvaluationError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw EvaluationError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace warpcone
