#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace ringmd {

struct QuantOverflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fixed-point codec for reduction payloads. A value v with |v| <= v_max is
// encoded as round(v * scale) + bias in a 32-bit lane; two lanes share one
// 64-bit word (even index in the low lane). The bias keeps every lane
// non-negative so lane sums never carry into the neighbouring lane as long
// as k_summands * (bias + scale * v_max) < 2^32.
struct QuantSpec {
    double scale = 1e7;
    std::uint32_t bias = 1u << 25;
    double v_max = 1.0;

    std::int64_t max_magnitude() const {
        return static_cast<std::int64_t>(scale * v_max + 0.5);
    }

    int max_summands() const {
        const std::uint64_t per_summand = bias + static_cast<std::uint64_t>(max_magnitude());
        return static_cast<int>(((1ULL << 32) - 1) / per_summand);
    }
};

// Hard error at configuration time when a ring is too long for carry-free
// summation under this spec.
inline void validate_summand_count(const QuantSpec& spec, int k_summands) {
    if (k_summands < 1) throw std::invalid_argument("quant: k_summands must be >= 1");
    if (k_summands > spec.max_summands())
        throw std::invalid_argument("quant: " + std::to_string(k_summands) +
                                    " summands would overflow a 32-bit lane (max " +
                                    std::to_string(spec.max_summands()) + ")");
}

std::uint32_t quantize_lane(double v, const QuantSpec& spec);

// Encode values into packed words, two lanes per word. An odd trailing lane
// is padded with an encoded zero so decoding stays uniform.
std::vector<std::uint64_t> quantize_pack(std::span<const double> values, const QuantSpec& spec);

// Decode words that hold the lane-wise sum of exactly k_summands packed
// contributions: per lane (lane_sum - k * bias) / scale.
std::vector<double> unpack_dequantize(std::span<const std::uint64_t> words, std::size_t n_values,
                                      int k_summands, const QuantSpec& spec);

}  // namespace ringmd
