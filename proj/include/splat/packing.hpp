#pragma once

#include <array>
#include <cstdint>

namespace splat {

/// Largest finite binary16 value; pack_half2 clamps to +/- this.
constexpr float kHalfMax = 65504.0f;

/// IEEE-754 binary32 -> binary16, round-to-nearest-even. Overflow gives inf.
std::uint16_t float_to_half(float value) noexcept;
float half_to_float(std::uint16_t bits) noexcept;

/// x in the low 16 bits, y in the high 16 bits. Components are clamped to
/// [-kHalfMax, kHalfMax] first.
std::uint32_t pack_half2(float x, float y) noexcept;
std::array<float, 2> unpack_half2(std::uint32_t word) noexcept;

/// floor(clamp(x, 0, 1) * 255 + 0.5), evaluated in binary32.
std::uint32_t quantize_unorm8(float x) noexcept;

/// R in the least significant byte, A (opacity) in the most significant.
std::uint32_t pack_rgba8(float r, float g, float b, float a) noexcept;
std::array<float, 4> unpack_rgba8(std::uint32_t word) noexcept;

/// Order-preserving float -> unsigned map: non-negatives get the sign bit
/// set, negatives are fully inverted.
std::uint32_t monotone_key(float value) noexcept;

/// Sort key for view depth: ~monotone_key(depth), so ascending key order is
/// far-to-near. Throws Error(NonFinite) for NaN/inf.
std::uint32_t depth_key(float view_depth);

} // namespace splat
