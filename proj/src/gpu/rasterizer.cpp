// Fixed-function part of the software device: triangle-strip assembly,
// sub-pixel snapped edge functions with a top-left fill rule, linear
// varying interpolation and over blending into an RGBA8 target.

#include "splat/gpu/device.hpp"

#include <algorithm>
#include <cmath>

namespace splat::gpu {

namespace {

constexpr int kSubpixelBits = 8;
constexpr double kSubpixelScale = 1 << kSubpixelBits;
// Guard band in pixels; vertices are clamped here so edge products fit in 128 bits.
constexpr double kGuardBand = 1 << 30;

using Wide = __int128;

struct ScreenVertex {
    std::int64_t x = 0; // 24.8 fixed point pixels
    std::int64_t y = 0;
    std::array<float, 4> varyings{};
};

Wide edge(const ScreenVertex& a, const ScreenVertex& b, std::int64_t px, std::int64_t py) {
    return static_cast<Wide>(b.x - a.x) * (py - a.y) - static_cast<Wide>(b.y - a.y) * (px - a.x);
}

bool top_left(const ScreenVertex& a, const ScreenVertex& b) {
    const std::int64_t dx = b.x - a.x;
    const std::int64_t dy = b.y - a.y;
    return (dy == 0 && dx > 0) || dy < 0;
}

std::uint32_t unorm8(float x) {
    const float c = std::clamp(x, 0.0f, 1.0f);
    return static_cast<std::uint32_t>(std::floor(c * 255.0f + 0.5f));
}

void blend_over(std::uint32_t& dst, const std::array<float, 4>& src) {
    const float a = std::clamp(src[3], 0.0f, 1.0f);
    std::uint32_t out = 0;
    for (int c = 0; c < 3; ++c) {
        const float d = static_cast<float>((dst >> (8 * c)) & 0xFFu) / 255.0f;
        out |= unorm8(src[c] * a + d * (1.0f - a)) << (8 * c);
    }
    const float da = static_cast<float>(dst >> 24) / 255.0f;
    out |= unorm8(a + da * (1.0f - a)) << 24;
    dst = out;
}

} // namespace

void Device::run_draw(const Texture& target, const RenderPipeline& pipeline, std::uint32_t vertex_count,
                      std::uint32_t instance_count) {
    ++counters_.draws;
    if (vertex_count < 3 || instance_count == 0 || target.width == 0 || target.height == 0) return;
    const BufferView pixels = target.pixels.view();
    const double w = target.width;
    const double h = target.height;

    std::vector<ScreenVertex> verts(vertex_count);
    std::vector<std::uint32_t> flats(vertex_count);
    for (std::uint32_t instance = 0; instance < instance_count; ++instance) {
        for (std::uint32_t v = 0; v < vertex_count; ++v) {
            const VertexOutput out = pipeline.vertex(v, instance);
            ++counters_.vertices;
            const double inv_w = 1.0 / static_cast<double>(out.position[3]);
            double px = (static_cast<double>(out.position[0]) * inv_w + 1.0) * 0.5 * w;
            double py = (1.0 - static_cast<double>(out.position[1]) * inv_w) * 0.5 * h;
            if (!std::isfinite(px) || !std::isfinite(py)) px = py = -kGuardBand;
            px = std::clamp(px, -kGuardBand, kGuardBand);
            py = std::clamp(py, -kGuardBand, kGuardBand);
            verts[v].x = std::llround(px * kSubpixelScale);
            verts[v].y = std::llround(py * kSubpixelScale);
            verts[v].varyings = out.varyings;
            flats[v] = out.flat;
        }

        for (std::uint32_t t = 0; t + 2 < vertex_count; ++t) {
            // Strip order: even triangles (t, t+1, t+2), odd ones (t+1, t, t+2).
            const std::uint32_t i0 = (t & 1u) ? t + 1 : t;
            const std::uint32_t i1 = (t & 1u) ? t : t + 1;
            const std::uint32_t i2 = t + 2;
            ScreenVertex a = verts[i0], b = verts[i1], c = verts[i2];
            const std::uint32_t flat = flats[i2];
            Wide area = edge(a, b, c.x, c.y);
            if (area == 0) continue;
            if (area < 0) {
                std::swap(a, b);
                area = -area;
            }
            const std::int64_t min_x = std::min({a.x, b.x, c.x});
            const std::int64_t max_x = std::max({a.x, b.x, c.x});
            const std::int64_t min_y = std::min({a.y, b.y, c.y});
            const std::int64_t max_y = std::max({a.y, b.y, c.y});
            // Pixel centers at (i + 0.5) * scale.
            const std::int64_t half = 1 << (kSubpixelBits - 1);
            auto first_center = [&](std::int64_t lo) {
                std::int64_t i = (lo - half + (1 << kSubpixelBits) - 1) >> kSubpixelBits;
                return std::max<std::int64_t>(i, 0);
            };
            auto last_center = [&](std::int64_t hi, std::int64_t limit) {
                std::int64_t i = (hi - half) >> kSubpixelBits;
                return std::min<std::int64_t>(i, limit - 1);
            };
            const std::int64_t x0 = first_center(min_x), x1 = last_center(max_x, target.width);
            const std::int64_t y0 = first_center(min_y), y1 = last_center(max_y, target.height);
            if (x0 > x1 || y0 > y1) continue;

            const int bias0 = top_left(b, c) ? 0 : -1;
            const int bias1 = top_left(c, a) ? 0 : -1;
            const int bias2 = top_left(a, b) ? 0 : -1;
            const double inv_area = 1.0 / static_cast<double>(area);
            for (std::int64_t y = y0; y <= y1; ++y) {
                const std::int64_t sy = (y << kSubpixelBits) + half;
                for (std::int64_t x = x0; x <= x1; ++x) {
                    const std::int64_t sx = (x << kSubpixelBits) + half;
                    const Wide w0 = edge(b, c, sx, sy);
                    const Wide w1 = edge(c, a, sx, sy);
                    const Wide w2 = edge(a, b, sx, sy);
                    if (w0 + bias0 < 0 || w1 + bias1 < 0 || w2 + bias2 < 0) continue;
                    const float l0 = static_cast<float>(static_cast<double>(w0) * inv_area);
                    const float l1 = static_cast<float>(static_cast<double>(w1) * inv_area);
                    const float l2 = static_cast<float>(static_cast<double>(w2) * inv_area);
                    FragmentInput in;
                    for (int k = 0; k < 4; ++k) in.varyings[k] = l0 * a.varyings[k] + l1 * b.varyings[k] + l2 * c.varyings[k];
                    in.flat = flat;
                    in.x = static_cast<std::uint32_t>(x);
                    in.y = static_cast<std::uint32_t>(y);
                    ++counters_.fragments;
                    const FragmentOutput out = pipeline.fragment(in);
                    if (out.discard) continue;
                    blend_over(pixels[static_cast<std::uint64_t>(y) * target.width + static_cast<std::uint64_t>(x)],
                               out.rgba);
                }
            }
        }
    }
}

} // namespace splat::gpu
