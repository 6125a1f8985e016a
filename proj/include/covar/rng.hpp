#pragma once

#include <array>
#include <cstdint>

namespace covar {

/// Counter-based random stream (Philox4x32-10).
///
/// The key is the 64-bit seed; the 128-bit counter is split into a 64-bit
/// block index and the 64-bit stream id. A stream is therefore a pure
/// function of (seed, stream_id, position): two streams with the same
/// seed and id replay identical sequences, and different ids address
/// disjoint regions of the Philox output space.
///
/// A stream is single-owner. Concurrent work takes distinct stream ids.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : seed_(seed), stream_id_(stream_id) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream_id() const noexcept { return stream_id_; }
    /// Number of 64-bit words consumed so far.
    [[nodiscard]] std::uint64_t position() const noexcept { return 2 * block_ - (have_spare_ ? 1 : 0); }

    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() noexcept;
    /// Uniform on (0, 1): the 53-bit grid shifted by half a step.
    double uniform_open() noexcept;

    /// Returns an independent child stream and advances this stream by
    /// one block. The child's id hashes (stream_id, position, tag), so
    /// repeated forks never collide and consumption stays deterministic.
    RngStream fork(std::uint64_t tag = 0) noexcept;

    /// Child stream that depends only on (seed, stream_id, tag), not on
    /// the current position. Does not advance this stream.
    [[nodiscard]] RngStream substream(std::uint64_t tag) const noexcept;

    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;
    /// Raw Philox4x32-10 bijection, exposed for known-answer tests.
    static Block philox(Block counter, Key key) noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    std::uint64_t spare_ = 0;
    bool have_spare_ = false;
};

/// SplitMix64 finalizer; used to derive stream ids and cache keys.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace covar
