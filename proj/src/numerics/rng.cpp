#include "covar/rng.hpp"

namespace covar {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

constexpr double kTwoM53 = 1.0 / 9007199254740992.0;

}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

RngStream::Block RngStream::philox(Block ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

std::uint64_t RngStream::next_u64() noexcept {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const Block ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                    static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    const Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    const Block out = philox(ctr, key);
    ++block_;
    spare_ = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    have_spare_ = true;
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

double RngStream::uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * kTwoM53;
}

double RngStream::uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * kTwoM53;
}

RngStream RngStream::fork(std::uint64_t tag) noexcept {
    const std::uint64_t id = mix64(stream_id_ ^ mix64(block_ ^ mix64(tag + 0x5851F42D4C957F2Dull)));
    // Discard the rest of the current block so the parent moves forward.
    have_spare_ = false;
    ++block_;
    return RngStream(seed_, id);
}

RngStream RngStream::substream(std::uint64_t tag) const noexcept {
    return RngStream(seed_, mix64(stream_id_ ^ mix64(~tag)));
}

}  // namespace covar
