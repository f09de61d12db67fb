#include "splat/gpu/raster.hpp"

#include "splat/packing.hpp"

#include <cmath>

namespace splat::gpu {

float max_quad_radius() noexcept { return std::sqrt(std::log(255.0f)); }

float quad_radius_from_color(std::uint32_t color, bool no_radius) noexcept {
    if (no_radius) return max_quad_radius();
    const std::uint32_t alpha_byte = color >> 24;
    if (alpha_byte == 0) return 0.0f;
    return std::sqrt(std::log(static_cast<float>(alpha_byte)));
}

VertexOutput vertex_expand(const ProjectedSplat& splat, std::uint32_t corner, bool no_radius, float width,
                           float height) noexcept {
    const float su = (corner & 1u) ? 1.0f : -1.0f;
    const float sv = (corner & 2u) ? 1.0f : -1.0f;
    const float r = quad_radius_from_color(splat.color, no_radius);
    const auto a1 = unpack_half2(splat.axes[0]);
    const auto a2 = unpack_half2(splat.axes[1]);
    const float u = su * r;
    const float v = sv * r;
    const float x = splat.center[0] + u * a1[0] + v * a2[0];
    const float y = splat.center[1] + u * a1[1] + v * a2[1];
    VertexOutput out;
    out.position = {2.0f * x / width - 1.0f, 1.0f - 2.0f * y / height, 0.0f, 1.0f};
    out.varyings = {u, v, 0.0f, 0.0f};
    out.flat = splat.color;
    return out;
}

FragmentOutput fragment_shade(const FragmentInput& in) noexcept {
    const float u = in.varyings[0];
    const float v = in.varyings[1];
    const auto rgba = unpack_rgba8(in.flat);
    const float alpha = rgba[3] * std::exp(-(u * u + v * v));
    FragmentOutput out;
    out.rgba = {rgba[0], rgba[1], rgba[2], alpha};
    out.discard = alpha < 1.0f / 255.0f;
    return out;
}

RenderPipeline make_splat_pipeline(const VisibleSet& visible, const Buffer& order, const Buffer& uniforms) {
    const BufferView splats = visible.splats.view();
    const BufferView slots = order.view();
    const BufferView u = uniforms.view();
    RenderPipeline p;
    p.vertex = [splats, slots, u](std::uint32_t vertex, std::uint32_t instance) {
        const ProjectedSplat s = load_projected(splats, slots[instance]);
        const bool no_radius = (u[uniform::kFlags] & uniform::kFlagNoRadius) != 0;
        return vertex_expand(s, vertex, no_radius, u.f32(uniform::kWidth), u.f32(uniform::kHeight));
    };
    p.fragment = fragment_shade;
    return p;
}

} // namespace splat::gpu
