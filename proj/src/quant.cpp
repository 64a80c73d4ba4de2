#include "ringmd/quant.hpp"

#include <cmath>

namespace ringmd {

std::uint32_t quantize_lane(double v, const QuantSpec& spec) {
    if (!(std::abs(v) <= spec.v_max))
        throw QuantOverflowError("quantize: |" + std::to_string(v) + "| exceeds v_max " +
                                 std::to_string(spec.v_max));
    const std::int64_t q = std::llround(v * spec.scale);
    return static_cast<std::uint32_t>(q + static_cast<std::int64_t>(spec.bias));
}

std::vector<std::uint64_t> quantize_pack(std::span<const double> values, const QuantSpec& spec) {
    std::vector<std::uint64_t> words((values.size() + 1) / 2);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint64_t lane = quantize_lane(values[i], spec);
        if (i % 2 == 0)
            words[i / 2] = lane;  // even index -> low lane
        else
            words[i / 2] |= lane << 32;
    }
    if (values.size() % 2 == 1) words.back() |= static_cast<std::uint64_t>(spec.bias) << 32;
    return words;
}

std::vector<double> unpack_dequantize(std::span<const std::uint64_t> words, std::size_t n_values,
                                      int k_summands, const QuantSpec& spec) {
    validate_summand_count(spec, k_summands);
    if (words.size() * 2 < n_values)
        throw std::invalid_argument("unpack_dequantize: not enough words for value count");
    std::vector<double> out(n_values);
    const std::int64_t offset = static_cast<std::int64_t>(k_summands) *
                                static_cast<std::int64_t>(spec.bias);
    for (std::size_t i = 0; i < n_values; ++i) {
        const std::uint64_t word = words[i / 2];
        const std::uint64_t lane = (i % 2 == 0) ? (word & 0xffffffffULL) : (word >> 32);
        out[i] = static_cast<double>(static_cast<std::int64_t>(lane) - offset) / spec.scale;
    }
    return out;
}

}  // namespace ringmd
