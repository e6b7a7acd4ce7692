#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace instrexp {

/// Seeded generator with platform-independent derived draws.
///
/// std::mt19937_64 has a fully specified output sequence, but the standard
/// distributions do not, so every draw used by the pipeline goes through the
/// helpers here. Outputs are then bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for a named sub-task (per-task workers, per-template scoring).
    static Rng derive(std::uint64_t seed, std::string_view stream);

    std::uint64_t next() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    /// k distinct indices from [0, n), uniform without replacement, in draw order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace instrexp
