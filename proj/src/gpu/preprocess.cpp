#include "splat/gpu/preprocess.hpp"

#include "splat/gpu/kernel.hpp"
#include "splat/packing.hpp"
#include "splat/sh_constants.hpp"

#include <bit>
#include <cmath>

namespace splat::gpu {

ProjectedSplat load_projected(const BufferView& buffer, std::uint64_t slot) noexcept {
    const std::uint64_t base = slot * kProjectedWords;
    ProjectedSplat s;
    s.center = {buffer.f32(base + 0), buffer.f32(base + 1)};
    s.axes = {buffer[base + 2], buffer[base + 3]};
    s.color = buffer[base + 4];
    return s;
}

void store_projected(const BufferView& buffer, std::uint64_t slot, const ProjectedSplat& splat) noexcept {
    const std::uint64_t base = slot * kProjectedWords;
    buffer.set_f32(base + 0, splat.center[0]);
    buffer.set_f32(base + 1, splat.center[1]);
    buffer[base + 2] = splat.axes[0];
    buffer[base + 3] = splat.axes[1];
    buffer[base + 4] = splat.color;
    buffer[base + 5] = 0;
}

namespace {

std::uint64_t sh_words(SceneLayout layout) { return 3ull * sh_coeff_count(layout.sh_degree); }

} // namespace

SceneBuffers::SceneBuffers(Device& device, SceneLayout layout) : layout_(layout) {
    const std::uint64_t n = layout.count;
    positions_ = device.create_buffer("scene.positions", 3 * n, 3);
    rotations_ = device.create_buffer("scene.rotations", 4 * n, 4);
    scales_ = device.create_buffer("scene.scales", 3 * n, 3);
    opacities_ = device.create_buffer("scene.opacities", n);
    sh_ = device.create_buffer("scene.sh", sh_words(layout) * n, static_cast<std::uint32_t>(sh_words(layout)));
}

std::uint64_t SceneBuffers::bytes(SceneLayout layout) noexcept {
    return 4 * layout.count * (3 + 4 + 3 + 1 + sh_words(layout));
}

SceneBuffers SceneBuffers::upload(Device& device, const Scene& scene) {
    SceneBuffers b(device, SceneLayout{scene.count(), scene.sh_degree()});
    const std::uint64_t shw = sh_words(b.layout_);
    const BufferView pos = b.positions_.view(), rot = b.rotations_.view(), scl = b.scales_.view(),
                     opa = b.opacities_.view(), sh = b.sh_.view();
    const auto gaussians = scene.gaussians();
    for (std::uint64_t i = 0; i < gaussians.size(); ++i) {
        const Gaussian& g = gaussians[i];
        for (int k = 0; k < 3; ++k) {
            pos.set_f32(3 * i + k, g.position[k]);
            scl.set_f32(3 * i + k, g.scale[k]);
        }
        for (int k = 0; k < 4; ++k) rot.set_f32(4 * i + k, g.rotation[k]);
        opa.set_f32(i, g.opacity);
        for (std::uint64_t k = 0; k < shw; ++k) sh.set_f32(shw * i + k, g.sh[k]);
    }
    return b;
}

std::vector<std::uint32_t> make_uniforms(const Camera& camera, SceneLayout layout, const RenderFlags& flags) {
    std::vector<std::uint32_t> u(uniform::kWords, 0);
    auto put = [&](std::uint32_t word, double value) { u[word] = std::bit_cast<std::uint32_t>(static_cast<float>(value)); };
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) put(uniform::kView + 4 * r + c, camera.view()(r, c));
    }
    const Focal f = focal(camera);
    put(uniform::kFx, f.fx);
    put(uniform::kFy, f.fy);
    put(uniform::kWidth, camera.viewport().width);
    put(uniform::kHeight, camera.viewport().height);
    put(uniform::kNear, camera.near_plane());
    const Eigen::Vector3d p = camera.position();
    for (int k = 0; k < 3; ++k) put(uniform::kCameraPosition + k, p[k]);
    std::uint32_t bits = 0;
    if (flags.no_cull) bits |= uniform::kFlagNoCull;
    if (flags.no_radius) bits |= uniform::kFlagNoRadius;
    if (flags.sh_direction == ShDirection::SplatToCamera) bits |= uniform::kFlagShSplatToCamera;
    u[uniform::kFlags] = bits;
    u[uniform::kCount] = static_cast<std::uint32_t>(layout.count);
    u[uniform::kShDegree] = static_cast<std::uint32_t>(layout.sh_degree);
    return u;
}

VisibleSet::VisibleSet(Device& device, std::uint64_t capacity) {
    splats = device.create_buffer("visible.splats", kProjectedWords * capacity, kProjectedWords);
    source_index = device.create_buffer("visible.source_index", capacity);
    counter = device.create_buffer("visible.counter", 1);
}

FrameConstants read_frame_constants(const BufferView& u) noexcept {
    FrameConstants k;
    for (int i = 0; i < 16; ++i) k.view[i] = u.f32(uniform::kView + i);
    k.fx = u.f32(uniform::kFx);
    k.fy = u.f32(uniform::kFy);
    k.width = u.f32(uniform::kWidth);
    k.height = u.f32(uniform::kHeight);
    k.near_plane = u.f32(uniform::kNear);
    for (int i = 0; i < 3; ++i) k.camera[i] = u.f32(uniform::kCameraPosition + i);
    k.flags = u[uniform::kFlags];
    k.count = u[uniform::kCount];
    k.sh_degree = static_cast<int>(u[uniform::kShDegree]);
    return k;
}

FrameConstants frame_constants(const Camera& camera, SceneLayout layout, const RenderFlags& flags) {
    const auto words = make_uniforms(camera, layout, flags);
    FrameConstants k;
    auto f = [&](std::uint32_t w) { return std::bit_cast<float>(words[w]); };
    for (int i = 0; i < 16; ++i) k.view[i] = f(uniform::kView + i);
    k.fx = f(uniform::kFx);
    k.fy = f(uniform::kFy);
    k.width = f(uniform::kWidth);
    k.height = f(uniform::kHeight);
    k.near_plane = f(uniform::kNear);
    for (int i = 0; i < 3; ++i) k.camera[i] = f(uniform::kCameraPosition + i);
    k.flags = words[uniform::kFlags];
    k.count = words[uniform::kCount];
    k.sh_degree = static_cast<int>(words[uniform::kShDegree]);
    return k;
}

std::array<float, 3> eval_sh_f32(std::span<const float> sh, int degree, const std::array<float, 3>& dir) noexcept {
    const float x = dir[0], y = dir[1], z = dir[2];
    std::array<float, 16> basis{};
    basis[0] = static_cast<float>(kShC0);
    if (degree >= 1) {
        const float c1 = static_cast<float>(kShC1);
        basis[1] = -c1 * y;
        basis[2] = c1 * z;
        basis[3] = -c1 * x;
    }
    if (degree >= 2) {
        const float xx = x * x, yy = y * y, zz = z * z;
        basis[4] = static_cast<float>(kShC2[0]) * (x * y);
        basis[5] = static_cast<float>(kShC2[1]) * (y * z);
        basis[6] = static_cast<float>(kShC2[2]) * (2.0f * zz - xx - yy);
        basis[7] = static_cast<float>(kShC2[3]) * (x * z);
        basis[8] = static_cast<float>(kShC2[4]) * (xx - yy);
        if (degree >= 3) {
            basis[9] = static_cast<float>(kShC3[0]) * y * (3.0f * xx - yy);
            basis[10] = static_cast<float>(kShC3[1]) * (x * y) * z;
            basis[11] = static_cast<float>(kShC3[2]) * y * (4.0f * zz - xx - yy);
            basis[12] = static_cast<float>(kShC3[3]) * z * (2.0f * zz - 3.0f * xx - 3.0f * yy);
            basis[13] = static_cast<float>(kShC3[4]) * x * (4.0f * zz - xx - yy);
            basis[14] = static_cast<float>(kShC3[5]) * z * (xx - yy);
            basis[15] = static_cast<float>(kShC3[6]) * x * (xx - 3.0f * yy);
        }
    }
    std::array<float, 3> rgb{0.0f, 0.0f, 0.0f};
    const int coeffs = sh_coeff_count(degree);
    for (int c = 0; c < coeffs; ++c) {
        for (int ch = 0; ch < 3; ++ch) rgb[ch] += basis[c] * sh[3 * c + ch];
    }
    for (float& v : rgb) v += 0.5f;
    return rgb;
}

// Operation order is the one documented in docs/LAYOUTS.md; it must not be
// reassociated (the library is built with -ffp-contract=off).
CullResult preprocess_splat(const SplatInput& in, const FrameConstants& k, SplatMath& out) noexcept {
    const auto& m = k.view;
    const float px = in.position[0], py = in.position[1], pz = in.position[2];
    const float tx = m[0] * px + m[1] * py + m[2] * pz + m[3];
    const float ty = m[4] * px + m[5] * py + m[6] * pz + m[7];
    const float tz = m[8] * px + m[9] * py + m[10] * pz + m[11];
    const float depth = -tz;
    out.depth = depth;
    if (!(depth > k.near_plane)) return CullResult::Frustum;
    const float sigma = in.opacity;
    if (!(sigma >= 1.0f / 255.0f)) return CullResult::Opacity;

    const float qw = in.rotation[0], qx = in.rotation[1], qy = in.rotation[2], qz = in.rotation[3];
    const auto& sc = in.scale;
    const float r00 = 1.0f - 2.0f * (qy * qy + qz * qz);
    const float r01 = 2.0f * (qx * qy - qw * qz);
    const float r02 = 2.0f * (qx * qz + qw * qy);
    const float r10 = 2.0f * (qx * qy + qw * qz);
    const float r11 = 1.0f - 2.0f * (qx * qx + qz * qz);
    const float r12 = 2.0f * (qy * qz - qw * qx);
    const float r20 = 2.0f * (qx * qz - qw * qy);
    const float r21 = 2.0f * (qy * qz + qw * qx);
    const float r22 = 1.0f - 2.0f * (qx * qx + qy * qy);
    const float ms[3][3] = {{r00 * sc[0], r01 * sc[1], r02 * sc[2]},
                            {r10 * sc[0], r11 * sc[1], r12 * sc[2]},
                            {r20 * sc[0], r21 * sc[1], r22 * sc[2]}};
    float sigma3[3][3];
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) sigma3[a][b] = ms[a][0] * ms[b][0] + ms[a][1] * ms[b][1] + ms[a][2] * ms[b][2];
    }
    out.cov3 = {sigma3[0][0], sigma3[0][1], sigma3[0][2], sigma3[1][1], sigma3[1][2], sigma3[2][2]};

    const float inv = 1.0f / depth;
    const float j00 = k.fx * inv;
    const float j02 = k.fx * tx * inv * inv;
    const float j11 = -k.fy * inv;
    const float j12 = -k.fy * ty * inv * inv;
    // T = J * W_rot (2x3)
    float t0[3], t1[3];
    for (int c = 0; c < 3; ++c) {
        t0[c] = j00 * m[c] + j02 * m[8 + c];
        t1[c] = j11 * m[4 + c] + j12 * m[8 + c];
    }
    // U = T * Sigma
    float u0[3], u1[3];
    for (int c = 0; c < 3; ++c) {
        u0[c] = t0[0] * sigma3[0][c] + t0[1] * sigma3[1][c] + t0[2] * sigma3[2][c];
        u1[c] = t1[0] * sigma3[0][c] + t1[1] * sigma3[1][c] + t1[2] * sigma3[2][c];
    }
    const float ca = u0[0] * t0[0] + u0[1] * t0[1] + u0[2] * t0[2] + 0.3f;
    const float cb = u0[0] * t1[0] + u0[1] * t1[1] + u0[2] * t1[2];
    const float cc = u1[0] * t1[0] + u1[1] * t1[1] + u1[2] * t1[2] + 0.3f;
    const float cx = 0.5f * k.width + k.fx * tx * inv;
    const float cy = 0.5f * k.height - k.fy * ty * inv;
    out.cov2 = {ca, cb, cc};
    out.center = {cx, cy};

    // m^2 - det rewritten as ((a - c)/2)^2 + b^2: no cancellation when the
    // eigenvalues are close.
    const float mid = 0.5f * (ca + cc);
    const float half_diff = 0.5f * (ca - cc);
    const float disc = std::sqrt(half_diff * half_diff + cb * cb);
    const float lambda1 = mid + disc;
    const float lambda2 = mid - disc;
    if (!(lambda2 > 0.0f) || !std::isfinite(lambda1)) return CullResult::Degenerate;
    float ex = 1.0f, ey = 0.0f;
    if (cb == 0.0f) {
        if (!(ca >= cc)) {
            ex = 0.0f;
            ey = 1.0f;
        }
    } else {
        // lambda1 - c = half_diff + disc and lambda1 - a = disc - half_diff.
        const float vx = ca >= cc ? half_diff + disc : cb;
        const float vy = ca >= cc ? cb : disc - half_diff;
        const float norm = std::sqrt(vx * vx + vy * vy);
        ex = vx / norm;
        ey = vy / norm;
    }
    const float len1 = std::sqrt(2.0f * lambda1);
    const float len2 = std::sqrt(2.0f * lambda2);
    out.major = {ex * len1, ey * len1};
    out.minor = {-ey * len2, ex * len2};

    const std::uint32_t alpha_byte = quantize_unorm8(sigma);
    const float r = (k.flags & uniform::kFlagNoRadius) ? std::sqrt(std::log(255.0f))
                                                        : std::sqrt(std::log(static_cast<float>(alpha_byte)));
    out.radius = r;
    const float ext_x = r * (std::fabs(out.major[0]) + std::fabs(out.minor[0]));
    const float ext_y = r * (std::fabs(out.major[1]) + std::fabs(out.minor[1]));
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(ext_x) || !std::isfinite(ext_y))
        return CullResult::Degenerate;
    if (!(k.flags & uniform::kFlagNoCull)) {
        const bool hit = cx + ext_x >= 0.0f && cx - ext_x <= k.width && cy + ext_y >= 0.0f && cy - ext_y <= k.height;
        if (!hit) return CullResult::Viewport;
    }

    std::array<float, 3> dir{px - k.camera[0], py - k.camera[1], pz - k.camera[2]};
    const float len = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    const float sign = (k.flags & uniform::kFlagShSplatToCamera) ? -1.0f : 1.0f;
    if (len > 0.0f) {
        for (float& d : dir) d = sign * (d / len);
    }
    out.rgb = eval_sh_f32(in.sh, k.sh_degree, dir);
    return CullResult::Kept;
}

void encode_preprocess(CommandEncoder& encoder, const SceneBuffers& scene, const Buffer& uniforms,
                       const VisibleSet& visible, const Buffer& keys, const Buffer& payload) {
    const std::uint64_t n = scene.layout().count;
    const BufferView pos = scene.positions().view(), rot = scene.rotations().view(), scl = scene.scales().view(),
                     opa = scene.opacities().view(), shv = scene.sh().view();
    const BufferView u = uniforms.view();
    const BufferView splats = visible.splats.view();
    const BufferView source = visible.source_index.view();
    const BufferView counter = visible.counter.view();
    const BufferView key_out = keys.view();
    const BufferView payload_out = payload.view();
    encoder.dispatch(
        "preprocess",
        [=](WorkgroupId wg) {
            const FrameConstants k = read_frame_constants(u);
            const std::uint64_t sh_stride = 3ull * sh_coeff_count(k.sh_degree);
            lanes([&](std::uint32_t lid) {
                const std::uint64_t i = static_cast<std::uint64_t>(wg.index) * kWorkgroupSize + lid;
                if (i >= k.count) return;
                std::array<float, 3 * kMaxShCoeffs> sh{};
                SplatInput in;
                for (int c = 0; c < 3; ++c) {
                    in.position[c] = pos.f32(3 * i + c);
                    in.scale[c] = scl.f32(3 * i + c);
                }
                for (int c = 0; c < 4; ++c) in.rotation[c] = rot.f32(4 * i + c);
                in.opacity = opa.f32(i);
                for (std::uint64_t c = 0; c < sh_stride; ++c) sh[c] = shv.f32(sh_stride * i + c);
                in.sh = std::span<const float>(sh.data(), sh_stride);

                SplatMath math;
                if (preprocess_splat(in, k, math) != CullResult::Kept) return;
                ProjectedSplat out;
                out.center = math.center;
                out.axes = {pack_half2(math.major[0], math.major[1]), pack_half2(math.minor[0], math.minor[1])};
                out.color = pack_rgba8(math.rgb[0], math.rgb[1], math.rgb[2], in.opacity);

                const std::uint32_t slot = counter.atomic_fetch_add(0, 1);
                store_projected(splats, slot, out);
                key_out[slot] = ~monotone_key(math.depth);
                payload_out[slot] = slot;
                source[slot] = static_cast<std::uint32_t>(i);
            });
        },
        static_cast<std::uint32_t>(ceil_div(n, kWorkgroupSize)));
}

} // namespace splat::gpu
