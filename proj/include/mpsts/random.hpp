#pragma once

#include <array>
#include <cstdint>

namespace mpsts {

/// Names an independent, reproducible random substream.
struct SeededStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    bool operator==(const SeededStream&) const = default;
};

/// xoshiro256** keyed by (seed, stream_id, index) through SplitMix64, so any
/// trial index opens its own substream without advancing a shared state.
/// All conversions are written out explicitly; output is bit-identical
/// across platforms with IEEE doubles.
class Rng {
public:
    explicit Rng(const SeededStream& stream, std::uint64_t index = 0);

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }
    double normal();
    /// Bose-Einstein (geometric on 0, 1, ...) with the given mean.
    int geometric(double mean);
    int poisson(double mean);

private:
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mpsts
