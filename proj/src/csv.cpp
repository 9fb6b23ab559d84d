#include "vhs/csv.h"

#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

#include "vhs/errors.h"

namespace vhs::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.pop_back();
        std::size_t b = cell.find_first_not_of(' ');
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

int digits(std::string_view s, std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return -1;
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

}  // namespace

bool is_iso_date(std::string_view s) {
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return false;
    if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') return false;
    int y = digits(s, 0, 4), m = digits(s, 5, 2), d = digits(s, 8, 2);
    if (y < 0 || m < 0 || d < 0) return false;
    using namespace std::chrono;
    return year_month_day{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}}.ok();
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

PriceMatrix parse_prices(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("price CSV is empty (header row required)");
    auto header = split(line);
    if (header.size() < 2) throw ValidationError("price CSV header needs a date column and at least one asset");

    PriceMatrix pm;
    pm.assets.assign(header.begin() + 1, header.end());
    const std::size_t m = pm.assets.size();
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = split(line);
        if (cells.size() != m + 1) {
            std::ostringstream os;
            os << "line " << lineno << ": expected " << m + 1 << " cells, found " << cells.size();
            throw ValidationError(os.str());
        }
        if (!is_iso_date(cells[0]))
            throw ValidationError("line " + std::to_string(lineno) + ": not an ISO-8601 date: '" + cells[0] + "'");
        pm.dates.push_back(cells[0]);
        for (std::size_t j = 1; j <= m; ++j) {
            const auto& c = cells[j];
            double v = 0.0;
            auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (c.empty() || res.ec != std::errc{} || res.ptr != c.data() + c.size()) {
                std::ostringstream os;
                os << "line " << lineno << ", column '" << pm.assets[j - 1] << "': missing or malformed value '" << c
                   << "'";
                throw ValidationError(os.str());
            }
            values.push_back(v);
        }
    }
    const auto n = static_cast<Eigen::Index>(pm.dates.size());
    pm.prices.resize(n, static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(m); ++j)
            pm.prices(i, j) = values[static_cast<std::size_t>(i) * m + static_cast<std::size_t>(j)];
    pm.validate();
    return pm;
}

PriceMatrix read_prices(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open price file: " + path.string());
    return parse_prices(in);
}

void write_prices(std::ostream& out, const PriceMatrix& pm) {
    out << "date";
    for (const auto& a : pm.assets) out << ',' << a;
    out << '\n';
    for (std::size_t i = 0; i < pm.rows(); ++i) {
        out << pm.dates[i];
        for (std::size_t j = 0; j < pm.cols(); ++j)
            out << ',' << format_double(pm.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out << '\n';
    }
}

void write_prices(const std::filesystem::path& path, const PriceMatrix& pm) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write price file: " + path.string());
    write_prices(out, pm);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace vhs::csv
