#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "wqed/common.hpp"

namespace wqed {

// Philox4x32-10 counter-based generator. A stream is identified by a
// 64-bit key (master seed) plus a 64-bit stream id placed in the upper
// counter words, so distinct stream ids can never produce overlapping
// counter blocks no matter how many values are drawn (< 2^64 blocks).
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}

    RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : key0_(static_cast<std::uint32_t>(master_seed)),
          key1_(static_cast<std::uint32_t>(master_seed >> 32)),
          stream_lo_(static_cast<std::uint32_t>(stream_id)),
          stream_hi_(static_cast<std::uint32_t>(stream_id >> 32)) {}

    std::uint32_t next_u32() {
        if (buf_pos_ == 4) refill();
        return buf_[buf_pos_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Standard normal via Box-Muller; pairs are cached.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double c = std::cos(2.0 * kPi * u2);
        double s = std::sin(2.0 * kPi * u2);
        spare_ = r * s;
        have_spare_ = true;
        return r * c;
    }

    // Complex increment with E[dW dW*] = dt, E[dW dW] = 0:
    // real and imaginary parts are independent N(0, dt/2).
    cplx wiener(double dt) {
        double s = std::sqrt(0.5 * dt);
        double re = gaussian();
        double im = gaussian();
        return {s * re, s * im};
    }

    // Two independent fair bits.
    std::uint32_t bits2() { return next_u32() & 3u; }

private:
    static std::uint64_t mulhilo(std::uint32_t a, std::uint32_t b) {
        return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b);
    }

    void refill() {
        constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        std::uint32_t c0 = static_cast<std::uint32_t>(block_);
        std::uint32_t c1 = static_cast<std::uint32_t>(block_ >> 32);
        std::uint32_t c2 = stream_lo_, c3 = stream_hi_;
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = mulhilo(M0, c0);
            std::uint64_t p1 = mulhilo(M1, c2);
            std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            std::uint32_t n0 = hi1 ^ c1 ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c3 ^ k1;
            std::uint32_t n3 = lo0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += W0; k1 += W1;
        }
        buf_ = {c0, c1, c2, c3};
        buf_pos_ = 0;
        ++block_;
    }

    std::uint32_t key0_, key1_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stream for trajectory `index` of an experiment. Reserved ids above
// 2^63 are used for auxiliary draws (shared disorder realizations).
inline RngStream seed_stream(std::uint64_t master_seed, std::uint64_t trajectory_index) {
    return RngStream(master_seed, trajectory_index);
}

inline constexpr std::uint64_t kSharedRealizationStream = (1ull << 63);

}  // namespace wqed
