#pragma once

#include <filesystem>
#include <iosfwd>

#include "vhs/portfolio.h"

namespace vhs::csv {

// Header row required; first column an ISO-8601 date, the rest prices.
PriceMatrix parse_prices(std::istream& in);
PriceMatrix read_prices(const std::filesystem::path& path);

void write_prices(std::ostream& out, const PriceMatrix& prices);
void write_prices(const std::filesystem::path& path, const PriceMatrix& prices);

bool is_iso_date(std::string_view s);

// Shortest round-trip representation.
std::string format_double(double v);

}  // namespace vhs::csv
