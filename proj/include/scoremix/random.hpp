#ifndef SCOREMIX_RANDOM_HPP
#define SCOREMIX_RANDOM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace scoremix {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Output block i of stream (key) is a pure function of (key, i), so each
/// path and each step draws independent noise regardless of evaluation order.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit Philox4x32(std::uint64_t key) : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

    Block operator()(std::uint64_t counter_hi, std::uint64_t counter_lo) const {
        Block ctr{static_cast<std::uint32_t>(counter_lo), static_cast<std::uint32_t>(counter_lo >> 32),
                  static_cast<std::uint32_t>(counter_hi), static_cast<std::uint32_t>(counter_hi >> 32)};
        std::array<std::uint32_t, 2> key = key_;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    std::array<std::uint32_t, 2> key_;
};

/// Uniform in (0, 1) from 32 bits, never exactly 0 or 1.
inline double uniform_open(std::uint32_t bits) { return (static_cast<double>(bits) + 0.5) * 0x1p-32; }

/// Standard normal draws addressed by (stream, step, index).
class NormalStream {
public:
    explicit NormalStream(std::uint64_t stream) : gen_(stream) {}

    /// The j-th standard normal of draw `step`; pairs come from one Box-Muller transform.
    double operator()(std::uint64_t step, std::uint64_t j) const {
        const auto block = gen_(step, j / 2);
        const double r = std::sqrt(-2.0 * std::log(uniform_open(block[0])));
        const double a = 2.0 * std::numbers::pi * uniform_open(block[1]);
        return j % 2 == 0 ? r * std::cos(a) : r * std::sin(a);
    }

private:
    Philox4x32 gen_;
};

}  // namespace scoremix

#endif  // SCOREMIX_RANDOM_HPP
