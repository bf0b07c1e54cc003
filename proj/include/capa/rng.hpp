#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace capa {

// Counter-based stream keyed by (master seed, stream id). The generator is
// Philox4x32-10: the 128-bit counter block carries a 64-bit block counter in
// words 0-1 and the stream id in words 2-3; the key is the master seed.
// Streams with distinct (master, id) pairs never share counter blocks, and a
// stream replayed from the same point reproduces its output exactly.
class RngStream {
public:
    RngStream(uint64_t master_seed, uint64_t stream_id)
        : master_(master_seed), stream_(stream_id) {}

    uint64_t master() const { return master_; }
    uint64_t stream() const { return stream_; }

    uint32_t next_u32() {
        if (word_pos_ == 4) {
            block_ = philox(block_counter_++);
            word_pos_ = 0;
        }
        return block_[word_pos_++];
    }

    uint64_t next_u64() {
        uint32_t lo = next_u32();
        uint32_t hi = next_u32();
        return (uint64_t(hi) << 32) | lo;
    }

    // Uniform on [0,1) with 53 random bits.
    double next_unit() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via the Box-Muller transform; draws come in pairs and
    // the second one is cached, so output depends only on the stream state.
    double next_gaussian() {
        if (have_gauss_) {
            have_gauss_ = false;
            return gauss_;
        }
        // u1 in (0,1] so the log is finite.
        double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;
        double u2 = double(next_u64() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        gauss_ = r * std::sin(a);
        have_gauss_ = true;
        return r * std::cos(a);
    }

    // Unbiased integer in [0, bound) (Lemire rejection).
    uint32_t next_below(uint32_t bound) {
        uint64_t m = uint64_t(uint32_t(next_u64())) * bound;
        uint32_t lo = uint32_t(m);
        if (lo < bound) {
            uint32_t t = (-bound) % bound;
            while (lo < t) {
                m = uint64_t(uint32_t(next_u64())) * bound;
                lo = uint32_t(m);
            }
        }
        return uint32_t(m >> 32);
    }

    // Uniform direction index in [0, 2d). For 2d == 8 this consumes exactly
    // 3 bits from an internal reservoir; for 2d == 6 it rejects 3-bit values
    // 6 and 7. Keeps the hot walk loop at a fraction of a u64 draw per step.
    int next_direction(int two_d) {
        if (two_d == 8) return int(take_bits(3));
        if (two_d == 6) {
            for (;;) {
                uint32_t v = take_bits(3);
                if (v < 6) return int(v);
            }
        }
        return int(next_below(uint32_t(two_d)));
    }

private:
    uint32_t take_bits(int k) {
        if (bits_left_ < k) {
            bit_buf_ = next_u64();
            bits_left_ = 64;
        }
        uint32_t v = uint32_t(bit_buf_ & ((1u << k) - 1));
        bit_buf_ >>= k;
        bits_left_ -= k;
        return v;
    }

    static void round_once(std::array<uint32_t, 4>& ctr, uint32_t k0, uint32_t k1) {
        constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        uint64_t p0 = uint64_t(M0) * ctr[0];
        uint64_t p1 = uint64_t(M1) * ctr[2];
        std::array<uint32_t, 4> out;
        out[0] = uint32_t(p1 >> 32) ^ ctr[1] ^ k0;
        out[1] = uint32_t(p1);
        out[2] = uint32_t(p0 >> 32) ^ ctr[3] ^ k1;
        out[3] = uint32_t(p0);
        ctr = out;
    }

    std::array<uint32_t, 4> philox(uint64_t counter) const {
        constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        std::array<uint32_t, 4> ctr = {
            uint32_t(counter), uint32_t(counter >> 32),
            uint32_t(stream_), uint32_t(stream_ >> 32)};
        uint32_t k0 = uint32_t(master_), k1 = uint32_t(master_ >> 32);
        for (int r = 0; r < 10; ++r) {
            round_once(ctr, k0, k1);
            k0 += W0;
            k1 += W1;
        }
        return ctr;
    }

    uint64_t master_;
    uint64_t stream_;
    uint64_t block_counter_ = 0;
    std::array<uint32_t, 4> block_{};
    int word_pos_ = 4;
    uint64_t bit_buf_ = 0;
    int bits_left_ = 0;
    double gauss_ = 0.0;
    bool have_gauss_ = false;
};

inline RngStream derive_stream(uint64_t master_seed, uint64_t stream_id) {
    return RngStream(master_seed, stream_id);
}

// Collision-resistant stream id from a purpose tag and two parameters, so
// replica streams are a pure function of what they compute, not of
// scheduling order.
inline uint64_t stream_id_for(uint64_t purpose, uint64_t a, uint64_t b) {
    auto mix = [](uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    };
    uint64_t h = mix(purpose);
    h = mix(h ^ mix(a));
    h = mix(h ^ mix(b));
    return h;
}

}  // namespace capa
