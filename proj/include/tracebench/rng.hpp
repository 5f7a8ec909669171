#pragma once

#include <cstdint>
#include <vector>

namespace tracebench {

// splitmix64 step; also used to derive independent seeds.
std::uint64_t mix64(std::uint64_t x);

// Small deterministic generator.  std:: distributions are implementation
// defined, so everything that must reproduce byte-for-byte across platforms
// goes through this instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();
    // [0, 1)
    double uniform01();
    double uniform(double lo, double hi);
    // inclusive on both ends
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
    // index into `weights` (need not be normalized; must sum > 0)
    std::size_t pick_weighted(const std::vector<double>& weights);

private:
    std::uint64_t state_;
};

}  // namespace tracebench
