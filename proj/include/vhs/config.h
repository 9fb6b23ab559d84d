#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vhs {

// Flat key=value settings for one command. Values from a config file are
// kept apart from command-line overrides so both can be logged.
class RunConfig {
  public:
    explicit RunConfig(std::string command = {}) : command_(std::move(command)) {}

    static RunConfig parse(std::istream& in, const std::string& command = {});
    static RunConfig load(const std::filesystem::path& path, const std::string& command = {});

    const std::string& command() const { return command_; }
    void set_command(std::string c) { command_ = std::move(c); }

    void set_file(const std::string& key, const std::string& value) { file_[key] = value; }
    void set_flag(const std::string& key, const std::string& value) { flags_[key] = value; }

    std::optional<std::string> get(const std::string& key) const;
    bool has(const std::string& key) const { return get(key).has_value(); }
    // Merged view, flags winning.
    std::map<std::string, std::string> values() const;

    // key=value lines with a "# source" trailer per line, sorted by key.
    void write_metadata(std::ostream& out) const;

  private:
    std::string command_;
    std::map<std::string, std::string> file_;
    std::map<std::string, std::string> flags_;
};

// Collects every problem found while reading a config and throws one
// ValidationError listing all of them.
class ConfigReader {
  public:
    explicit ConfigReader(const RunConfig& cfg) : cfg_(cfg) {}

    std::string text(const std::string& key, const std::string& fallback);
    std::optional<std::string> optional_text(const std::string& key);
    std::string required(const std::string& key);
    double real(const std::string& key, double fallback, double lo, double hi, bool open_lo = true, bool open_hi = true);
    std::size_t count(const std::string& key, std::size_t fallback, std::size_t lo = 0);
    std::uint64_t seed(const std::string& key, std::uint64_t fallback);
    bool flag(const std::string& key, bool fallback);
    std::vector<std::string> list(const std::string& key, const std::vector<std::string>& fallback);
    std::vector<double> reals(const std::string& key, const std::vector<double>& fallback);

    void problem(std::string msg) { problems_.push_back(std::move(msg)); }
    const std::vector<std::string>& problems() const { return problems_; }
    // Throws ValidationError if any problem was recorded; also rejects keys
    // that were never read.
    void finish();

  private:
    const RunConfig& cfg_;
    std::vector<std::string> problems_;
    std::vector<std::string> seen_;
};

std::vector<std::string> split(const std::string& s, char sep);

}  // namespace vhs
