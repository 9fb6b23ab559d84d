#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "vhs/garch.h"

namespace vhs::test {

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, sd);
    std::vector<double> out(n);
    for (auto& x : out) x = z(rng);
    return out;
}

inline garch::Simulated garch_path(const garch::GarchParams& theta, std::size_t n, std::uint64_t seed) {
    auto u = gaussian(n, seed);
    return garch::simulate(theta, u);
}

}  // namespace vhs::test
