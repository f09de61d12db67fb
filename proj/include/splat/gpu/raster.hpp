#pragma once

#include "splat/gpu/device.hpp"
#include "splat/gpu/preprocess.hpp"

#include <cstdint>

namespace splat::gpu {

/// sqrt(ln 255): the quad half-size used for every splat under -RADIUS.
float max_quad_radius() noexcept;

/// Quad half-size in local units for a packed color word; derived from the
/// quantized opacity byte so vertex and fragment stages agree.
float quad_radius_from_color(std::uint32_t color, bool no_radius) noexcept;

/// Strip corner c in 0..3 -> signs (-,-), (+,-), (-,+), (+,+).
/// varyings = (u, v, 0, 0) local coordinates, flat = packed color.
VertexOutput vertex_expand(const ProjectedSplat& splat, std::uint32_t corner, bool no_radius, float width,
                           float height) noexcept;

/// alpha = sigma_q * exp(-(u^2 + v^2)); discarded below 1/255.
FragmentOutput fragment_shade(const FragmentInput& in) noexcept;

/// Instanced-quad pipeline: instance i draws the splat in slot order[i].
RenderPipeline make_splat_pipeline(const VisibleSet& visible, const Buffer& order, const Buffer& uniforms);

} // namespace splat::gpu
