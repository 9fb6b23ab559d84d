#include "vhs/config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "vhs/errors.h"

namespace vhs {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

RunConfig RunConfig::parse(std::istream& in, const std::string& command) {
    RunConfig cfg(command);
    std::string line;
    std::vector<std::string> problems;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back("line " + std::to_string(lineno) + ": expected key=value");
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            problems.push_back("line " + std::to_string(lineno) + ": empty key");
            continue;
        }
        if (key == "command") {
            if (cfg.command_.empty()) cfg.command_ = trim(line.substr(eq + 1));
            continue;
        }
        cfg.file_[key] = trim(line.substr(eq + 1));
    }
    if (!problems.empty()) {
        std::string msg = "invalid config file:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ValidationError(msg);
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const std::string& command) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    return parse(in, command);
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
    if (auto it = flags_.find(key); it != flags_.end()) return it->second;
    if (auto it = file_.find(key); it != file_.end()) return it->second;
    return std::nullopt;
}

std::map<std::string, std::string> RunConfig::values() const {
    auto out = file_;
    for (const auto& [k, v] : flags_) out[k] = v;
    return out;
}

void RunConfig::write_metadata(std::ostream& out) const {
    out << "command=" << command_ << '\n';
    for (const auto& [k, v] : values())
        out << "config." << k << '=' << v << "  # " << (flags_.count(k) ? "flag" : "file") << '\n';
}

std::optional<std::string> ConfigReader::optional_text(const std::string& key) {
    seen_.push_back(key);
    return cfg_.get(key);
}

std::string ConfigReader::text(const std::string& key, const std::string& fallback) {
    return optional_text(key).value_or(fallback);
}

std::string ConfigReader::required(const std::string& key) {
    auto v = optional_text(key);
    if (!v || v->empty()) {
        problem(key + ": required");
        return {};
    }
    return *v;
}

double ConfigReader::real(const std::string& key, double fallback, double lo, double hi, bool open_lo, bool open_hi) {
    auto v = optional_text(key);
    if (!v) return fallback;
    double x = 0.0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
    if (ec != std::errc{} || p != v->data() + v->size()) {
        problem(key + ": '" + *v + "' is not a number");
        return fallback;
    }
    const bool below = open_lo ? !(x > lo) : !(x >= lo);
    const bool above = open_hi ? !(x < hi) : !(x <= hi);
    if (below || above) {
        std::ostringstream os;
        os << key << ": " << *v << " outside " << (open_lo ? '(' : '[') << lo << ", " << hi << (open_hi ? ')' : ']');
        problem(os.str());
        return fallback;
    }
    return x;
}

std::size_t ConfigReader::count(const std::string& key, std::size_t fallback, std::size_t lo) {
    auto v = optional_text(key);
    if (!v) return fallback;
    std::size_t x = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
    if (ec != std::errc{} || p != v->data() + v->size()) {
        problem(key + ": '" + *v + "' is not a non-negative integer");
        return fallback;
    }
    if (x < lo) {
        problem(key + ": must be at least " + std::to_string(lo));
        return fallback;
    }
    return x;
}

std::uint64_t ConfigReader::seed(const std::string& key, std::uint64_t fallback) {
    auto v = optional_text(key);
    if (!v) return fallback;
    std::uint64_t x = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
    if (ec != std::errc{} || p != v->data() + v->size()) {
        problem(key + ": '" + *v + "' is not a valid seed");
        return fallback;
    }
    return x;
}

bool ConfigReader::flag(const std::string& key, bool fallback) {
    auto v = optional_text(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    problem(key + ": expected true or false, got '" + *v + "'");
    return fallback;
}

std::vector<std::string> ConfigReader::list(const std::string& key, const std::vector<std::string>& fallback) {
    auto v = optional_text(key);
    if (!v) return fallback;
    auto items = split(*v, ',');
    if (items.empty()) problem(key + ": empty list");
    return items;
}

std::vector<double> ConfigReader::reals(const std::string& key, const std::vector<double>& fallback) {
    auto v = optional_text(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& item : split(*v, ',')) {
        double x = 0.0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
        if (ec != std::errc{} || p != item.data() + item.size()) {
            problem(key + ": '" + item + "' is not a number");
            return fallback;
        }
        out.push_back(x);
    }
    if (out.empty()) problem(key + ": empty list");
    return out;
}

void ConfigReader::finish() {
    for (const auto& [k, v] : cfg_.values())
        if (std::find(seen_.begin(), seen_.end(), k) == seen_.end())
            problem(k + ": unknown key for command '" + cfg_.command() + "'");
    if (problems_.empty()) return;
    std::string msg = "invalid configuration (" + std::to_string(problems_.size()) + " problem" +
                      (problems_.size() > 1 ? "s" : "") + "):";
    for (const auto& p : problems_) msg += "\n  " + p;
    throw ValidationError(msg);
}

}  // namespace vhs
