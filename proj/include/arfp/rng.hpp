#pragma once

#include <cstdint>
#include <vector>

namespace arfp {

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based generator: draw i of (seed, stream) is a pure function of
// (seed, stream, i), so any experiment is replayable from its seeds alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();
    double uniform();                    // [0, 1)
    double uniform(double lo, double hi);
    double normal();                     // standard normal, Box-Muller
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    int uniform_int(int lo, int hi_inclusive);

    std::vector<int> permutation(int n);
    // Independent generator derived from this one's key and a sub-stream id.
    Rng fork(std::uint64_t stream) const;

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace arfp
