#include "splat/packing.hpp"

#include "splat/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace splat {

std::uint16_t float_to_half(float value) noexcept {
    std::uint32_t x = std::bit_cast<std::uint32_t>(value);
    const auto sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
    x &= 0x7FFFFFFFu;
    if (x >= 0x7F800000u) return static_cast<std::uint16_t>(sign | (x > 0x7F800000u ? 0x7E00u : 0x7C00u));
    if (x >= 0x477FF000u) return static_cast<std::uint16_t>(sign | 0x7C00u); // rounds past 65504
    if (x < 0x38800000u) {
        // Result is a binary16 subnormal (or zero).
        if (x < 0x33000000u) return sign;
        const std::uint32_t exponent = x >> 23;
        const std::uint32_t mantissa = (x & 0x7FFFFFu) | 0x800000u;
        const std::uint32_t shift = 126u - exponent;
        std::uint32_t h = mantissa >> shift;
        const std::uint32_t rem = mantissa & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1u);
        if (rem > halfway || (rem == halfway && (h & 1u))) ++h;
        return static_cast<std::uint16_t>(sign | h);
    }
    std::uint32_t h = (x >> 13) - (112u << 10);
    const std::uint32_t rem = x & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;
    return static_cast<std::uint16_t>(sign | h);
}

float half_to_float(std::uint16_t bits) noexcept {
    const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
    const std::uint32_t exponent = (bits >> 10) & 0x1Fu;
    std::uint32_t mantissa = bits & 0x3FFu;
    if (exponent == 0) {
        if (mantissa == 0) return std::bit_cast<float>(sign);
        // subnormal: mantissa * 2^-24
        const float magnitude = static_cast<float>(mantissa) * 0x1.0p-24f;
        return sign ? -magnitude : magnitude;
    }
    if (exponent == 31) return std::bit_cast<float>(sign | 0x7F800000u | (mantissa << 13));
    return std::bit_cast<float>(sign | ((exponent + 112u) << 23) | (mantissa << 13));
}

std::uint32_t pack_half2(float x, float y) noexcept {
    const float cx = std::clamp(x, -kHalfMax, kHalfMax);
    const float cy = std::clamp(y, -kHalfMax, kHalfMax);
    return static_cast<std::uint32_t>(float_to_half(cx)) | (static_cast<std::uint32_t>(float_to_half(cy)) << 16);
}

std::array<float, 2> unpack_half2(std::uint32_t word) noexcept {
    return {half_to_float(static_cast<std::uint16_t>(word & 0xFFFFu)),
            half_to_float(static_cast<std::uint16_t>(word >> 16))};
}

std::uint32_t quantize_unorm8(float x) noexcept {
    const float c = std::clamp(x, 0.0f, 1.0f); // NaN stays NaN and maps to 0 below
    const float scaled = std::floor(c * 255.0f + 0.5f);
    if (!(scaled > 0.0f)) return 0;
    return static_cast<std::uint32_t>(scaled);
}

std::uint32_t pack_rgba8(float r, float g, float b, float a) noexcept {
    return quantize_unorm8(r) | (quantize_unorm8(g) << 8) | (quantize_unorm8(b) << 16) | (quantize_unorm8(a) << 24);
}

std::array<float, 4> unpack_rgba8(std::uint32_t word) noexcept {
    return {static_cast<float>(word & 0xFFu) / 255.0f, static_cast<float>((word >> 8) & 0xFFu) / 255.0f,
            static_cast<float>((word >> 16) & 0xFFu) / 255.0f, static_cast<float>(word >> 24) / 255.0f};
}

std::uint32_t monotone_key(float value) noexcept {
    const auto bits = std::bit_cast<std::uint32_t>(value);
    return (bits & 0x80000000u) ? ~bits : (bits | 0x80000000u);
}

std::uint32_t depth_key(float view_depth) {
    if (!std::isfinite(view_depth)) throw Error(Errc::NonFinite, "depth must be finite");
    return ~monotone_key(view_depth);
}

} // namespace splat
