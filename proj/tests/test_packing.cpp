#include "splat/error.hpp"
#include "splat/packing.hpp"

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>

using namespace splat;

TEST_CASE("pack_rgba8") {
    CHECK(pack_rgba8(0, 0, 0, 0) == 0x00000000u);
    CHECK(pack_rgba8(1, 1, 1, 1) == 0xFFFFFFFFu);
    CHECK(pack_rgba8(1.0f, 0.5f, 0.0f, 1.0f) == 0xFF0080FFu);
    CHECK(pack_rgba8(2.0f, -1.0f, 0.0f, 0.5f) == 0x800000FFu);
    const auto u = unpack_rgba8(0xFF0080FFu);
    CHECK(u[0] == 1.0f);
    CHECK(u[1] == 128.0f / 255.0f);
    CHECK(u[3] == 1.0f);
}

TEST_CASE("quantize_unorm8 rounds half up in binary32") {
    for (int i = 0; i <= 255; ++i) CHECK(quantize_unorm8(static_cast<float>(i) / 255.0f) == static_cast<std::uint32_t>(i));
    CHECK(quantize_unorm8(0.5f) == 128u);
    CHECK(quantize_unorm8(-3.0f) == 0u);
    CHECK(quantize_unorm8(7.0f) == 255u);
}

TEST_CASE("pack_half2") {
    CHECK(pack_half2(0.0f, 0.0f) == 0x00000000u);
    CHECK(pack_half2(1.0f, -2.0f) == 0xC0003C00u);
    CHECK((pack_half2(1e9f, -1e9f) & 0xFFFFu) == 0x7BFFu); // clamped to the largest finite half
    CHECK((pack_half2(1e9f, -1e9f) >> 16) == 0xFBFFu);
}

TEST_CASE("half codec matches field decoding for every pattern") {
    for (std::uint32_t h = 0; h <= 0xFFFF; ++h) {
        const double expect = oracle::half_value(static_cast<std::uint16_t>(h));
        const float got = half_to_float(static_cast<std::uint16_t>(h));
        if (std::isnan(expect)) {
            CHECK(std::isnan(got));
            continue;
        }
        REQUIRE(static_cast<double>(got) == expect);
        if (std::isfinite(expect) && !(h == 0x8000)) CHECK(float_to_half(got) == h);
    }
}

TEST_CASE("float_to_half rounds to nearest, ties to even") {
    fixture::Rng rng(11);
    for (int i = 0; i < 20000; ++i) {
        const float x = static_cast<float>(rng.uniform(-70000, 70000) * std::pow(10.0, -rng.uniform(0, 6)));
        const std::uint16_t h = float_to_half(x);
        const double v = oracle::half_value(h);
        if (std::abs(x) > 65520.0f) {
            CHECK(std::isinf(v));
            continue;
        }
        // no other half is strictly closer
        const double up = oracle::half_value(static_cast<std::uint16_t>(h + 1));
        const double down = oracle::half_value(static_cast<std::uint16_t>(h - 1));
        const double err = std::abs(v - x);
        if (std::isfinite(up)) CHECK(err <= std::abs(up - x));
        if ((h & 0x7FFF) != 0 && std::isfinite(down)) CHECK(err <= std::abs(down - x));
    }
    CHECK(float_to_half(1.0f + std::ldexp(1.0f, -11)) == 0x3C00); // tie -> even mantissa
    CHECK(float_to_half(1.0f + 3 * std::ldexp(1.0f, -11)) == 0x3C02);
}

TEST_CASE("half2 round trip within one half ulp") {
    fixture::Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
        const float x = static_cast<float>(rng.uniform(-2000, 2000)), y = static_cast<float>(rng.uniform(-1, 1));
        const auto back = unpack_half2(pack_half2(x, y));
        auto ulp = [](float v) { return std::ldexp(1.0, std::max(std::ilogb(v == 0 ? 1e-8f : v), -14) - 10); };
        CHECK(std::abs(back[0] - x) <= 0.5 * ulp(x));
        CHECK(std::abs(back[1] - y) <= 0.5 * ulp(y));
    }
}

TEST_CASE("monotone and depth keys") {
    CHECK(monotone_key(1.0f) == 0xBF800000u);
    CHECK(monotone_key(-1.0f) == 0x407FFFFFu);
    CHECK(monotone_key(-1.0f) < monotone_key(1.0f));
    CHECK(depth_key(1.0f) == ~0xBF800000u);
    CHECK_THROWS_AS(depth_key(NAN), Error);
    CHECK_THROWS_AS(depth_key(INFINITY), Error);

    fixture::Rng rng(17);
    for (int i = 0; i < 20000; ++i) {
        const float a = static_cast<float>(rng.uniform(-1e6, 1e6) * std::pow(10.0, -rng.uniform(0, 30)));
        const float b = static_cast<float>(rng.uniform(-1e6, 1e6) * std::pow(10.0, -rng.uniform(0, 30)));
        if (a < b) {
            CHECK(monotone_key(a) < monotone_key(b));
            CHECK(depth_key(a) > depth_key(b));
        }
    }
    // adjacent floats stay strictly ordered across zero
    CHECK(monotone_key(-std::numeric_limits<float>::denorm_min()) < monotone_key(0.0f));
    CHECK(monotone_key(0.0f) < monotone_key(std::numeric_limits<float>::denorm_min()));
}
