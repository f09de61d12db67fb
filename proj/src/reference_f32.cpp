// Binary32 cull decision, written straight from the operation order in
// docs/LAYOUTS.md ("Pre-processing arithmetic"). The preprocess kernel
// implements the same sequence independently; the two must agree bit for bit.

#include "splat/packing.hpp"
#include "splat/reference.hpp"

#include <cmath>

namespace splat::reference {

namespace {

struct ViewF32 {
    float m[4][4];
    float fx, fy, width, height, near_plane;
};

ViewF32 make_view(const Camera& camera) {
    ViewF32 v{};
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) v.m[r][c] = static_cast<float>(camera.view()(r, c));
    }
    const Focal f = focal(camera);
    v.fx = static_cast<float>(f.fx);
    v.fy = static_cast<float>(f.fy);
    v.width = static_cast<float>(camera.viewport().width);
    v.height = static_cast<float>(camera.viewport().height);
    v.near_plane = static_cast<float>(camera.near_plane());
    return v;
}

bool keep_f32(const Gaussian& g, const ViewF32& v, const RenderFlags& flags) {
    const float px = g.position[0], py = g.position[1], pz = g.position[2];
    const float tx = v.m[0][0] * px + v.m[0][1] * py + v.m[0][2] * pz + v.m[0][3];
    const float ty = v.m[1][0] * px + v.m[1][1] * py + v.m[1][2] * pz + v.m[1][3];
    const float tz = v.m[2][0] * px + v.m[2][1] * py + v.m[2][2] * pz + v.m[2][3];
    const float depth = -tz;
    if (!(depth > v.near_plane)) return false;
    if (!(g.opacity >= 1.0f / 255.0f)) return false;

    const float qw = g.rotation[0], qx = g.rotation[1], qy = g.rotation[2], qz = g.rotation[3];
    float rot[3][3];
    rot[0][0] = 1.0f - 2.0f * (qy * qy + qz * qz);
    rot[0][1] = 2.0f * (qx * qy - qw * qz);
    rot[0][2] = 2.0f * (qx * qz + qw * qy);
    rot[1][0] = 2.0f * (qx * qy + qw * qz);
    rot[1][1] = 1.0f - 2.0f * (qx * qx + qz * qz);
    rot[1][2] = 2.0f * (qy * qz - qw * qx);
    rot[2][0] = 2.0f * (qx * qz - qw * qy);
    rot[2][1] = 2.0f * (qy * qz + qw * qx);
    rot[2][2] = 1.0f - 2.0f * (qx * qx + qy * qy);
    float m[3][3];
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) m[i][j] = rot[i][j] * g.scale[j];
    }
    float cov[3][3];
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) cov[i][j] = m[i][0] * m[j][0] + m[i][1] * m[j][1] + m[i][2] * m[j][2];
    }

    const float inv = 1.0f / depth;
    const float j00 = v.fx * inv;
    const float j02 = v.fx * tx * inv * inv;
    const float j11 = -v.fy * inv;
    const float j12 = -v.fy * ty * inv * inv;
    float t[2][3];
    for (int c = 0; c < 3; ++c) {
        t[0][c] = j00 * v.m[0][c] + j02 * v.m[2][c];
        t[1][c] = j11 * v.m[1][c] + j12 * v.m[2][c];
    }
    float u[2][3];
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 3; ++c) u[r][c] = t[r][0] * cov[0][c] + t[r][1] * cov[1][c] + t[r][2] * cov[2][c];
    }
    const float a = u[0][0] * t[0][0] + u[0][1] * t[0][1] + u[0][2] * t[0][2] + 0.3f;
    const float b = u[0][0] * t[1][0] + u[0][1] * t[1][1] + u[0][2] * t[1][2];
    const float c = u[1][0] * t[1][0] + u[1][1] * t[1][1] + u[1][2] * t[1][2] + 0.3f;
    const float cx = 0.5f * v.width + v.fx * tx * inv;
    const float cy = 0.5f * v.height - v.fy * ty * inv;

    const float mid = 0.5f * (a + c);
    const float half_diff = 0.5f * (a - c);
    const float disc = std::sqrt(half_diff * half_diff + b * b);
    const float l1 = mid + disc;
    const float l2 = mid - disc;
    if (!(l2 > 0.0f) || !std::isfinite(l1)) return false;
    float e1x, e1y;
    if (b == 0.0f) {
        e1x = a >= c ? 1.0f : 0.0f;
        e1y = a >= c ? 0.0f : 1.0f;
    } else {
        const float vx = a >= c ? half_diff + disc : b;
        const float vy = a >= c ? b : disc - half_diff;
        const float n = std::sqrt(vx * vx + vy * vy);
        e1x = vx / n;
        e1y = vy / n;
    }
    const float s1 = std::sqrt(2.0f * l1);
    const float s2 = std::sqrt(2.0f * l2);
    const float a1x = e1x * s1, a1y = e1y * s1;
    const float a2x = -e1y * s2, a2y = e1x * s2;

    const std::uint32_t alpha_byte = quantize_unorm8(g.opacity);
    const float r = flags.no_radius ? std::sqrt(std::log(255.0f)) : std::sqrt(std::log(static_cast<float>(alpha_byte)));
    const float ext_x = r * (std::fabs(a1x) + std::fabs(a2x));
    const float ext_y = r * (std::fabs(a1y) + std::fabs(a2y));
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(ext_x) || !std::isfinite(ext_y)) return false;
    if (flags.no_cull) return true;
    return cx + ext_x >= 0.0f && cx - ext_x <= v.width && cy + ext_y >= 0.0f && cy - ext_y <= v.height;
}

} // namespace

std::vector<std::uint32_t> survivors_f32(const Scene& scene, const Camera& camera, const RenderFlags& flags) {
    const ViewF32 v = make_view(camera);
    std::vector<std::uint32_t> out;
    const auto gaussians = scene.gaussians();
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        if (keep_f32(gaussians[i], v, flags)) out.push_back(static_cast<std::uint32_t>(i));
    }
    return out;
}

} // namespace splat::reference
