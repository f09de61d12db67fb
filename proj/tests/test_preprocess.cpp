#include "splat/error.hpp"
#include "splat/gpu/preprocess.hpp"
#include "splat/gpu/sort.hpp"
#include "splat/packing.hpp"
#include "splat/reference.hpp"

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace splat;
using namespace splat::gpu;

namespace {

struct Run {
    std::vector<std::uint32_t> sources;
    std::vector<std::uint32_t> keys;
    std::vector<std::uint32_t> payload;
    std::vector<ProjectedSplat> splats;
    std::uint32_t count = 0;
    std::vector<std::uint32_t> raw_splats;
};

/// Preprocess `scene` once; the visible buffers start out poisoned so stray
/// writes past the count show up.
Run preprocess_once(const Scene& scene, const Camera& camera, const RenderFlags& flags = {},
                    Schedule schedule = Schedule::Shuffled) {
    Device d(fixture::serial(schedule));
    const SceneBuffers sb = SceneBuffers::upload(d, scene);
    const SceneLayout layout{scene.count(), scene.sh_degree()};
    VisibleSet vis(d, scene.count());
    const std::uint64_t n = scene.count();
    d.write_buffer(vis.splats, 0, std::vector<std::uint32_t>(n * kProjectedWords, 0xDEADBEEF));
    d.write_buffer(vis.source_index, 0, std::vector<std::uint32_t>(n, 0xDEADBEEF));
    Buffer keys = d.create_buffer("test.keys", std::max<std::uint64_t>(n, 1));
    Buffer payload = d.create_buffer("test.payload", std::max<std::uint64_t>(n, 1));
    Buffer uniforms = d.create_buffer("test.uniforms", uniform::kWords);
    d.write_buffer(uniforms, 0, make_uniforms(camera, layout, flags));
    CommandEncoder enc;
    encode_preprocess(enc, sb, uniforms, vis, keys, payload);
    d.submit(enc);
    Run r;
    r.count = d.read_buffer(vis.counter)[0];
    r.sources = d.read_buffer(vis.source_index);
    r.keys = d.read_buffer(keys, 0, r.count);
    r.payload = d.read_buffer(payload, 0, r.count);
    r.raw_splats = d.read_buffer(vis.splats);
    for (std::uint32_t i = 0; i < r.count; ++i) r.splats.push_back(load_projected(vis.splats.view(), i));
    return r;
}

} // namespace

TEST_CASE("uniform block layout") {
    const Camera cam = fixture::camera_at({1, 2, 3}, {0, 0, 0}, 640, 480);
    RenderFlags flags;
    flags.no_radius = true;
    flags.sh_direction = ShDirection::SplatToCamera;
    const auto u = make_uniforms(cam, {77, 2}, flags);
    REQUIRE(u.size() == uniform::kWords);
    CHECK(std::bit_cast<float>(u[uniform::kWidth]) == 640.0f);
    CHECK(std::bit_cast<float>(u[uniform::kHeight]) == 480.0f);
    CHECK(std::bit_cast<float>(u[uniform::kFx]) == static_cast<float>(focal(cam).fx));
    CHECK(std::bit_cast<float>(u[uniform::kView + 3]) == static_cast<float>(cam.view()(0, 3)));
    CHECK(std::bit_cast<float>(u[uniform::kCameraPosition + 1]) == doctest::Approx(2.0f));
    CHECK(u[uniform::kFlags] == (uniform::kFlagNoRadius | uniform::kFlagShSplatToCamera));
    CHECK(u[uniform::kCount] == 77);
    CHECK(u[uniform::kShDegree] == 2);
    CHECK(u[27] == 0);
}

TEST_CASE("projected splat record") {
    Device d(fixture::serial());
    Buffer b = d.create_buffer("test.splats", 2 * kProjectedWords);
    const ProjectedSplat s{{1.5f, -2.25f}, {0x11112222u, 0x33334444u}, 0xAABBCCDDu};
    store_projected(b.view(), 1, s);
    const auto w = d.read_buffer(b);
    CHECK(w[6] == std::bit_cast<std::uint32_t>(1.5f));
    CHECK(w[7] == std::bit_cast<std::uint32_t>(-2.25f));
    CHECK(w[8] == 0x11112222u);
    CHECK(w[9] == 0x33334444u);
    CHECK(w[10] == 0xAABBCCDDu);
    CHECK(w[11] == 0u);
    const ProjectedSplat back = load_projected(b.view(), 1);
    CHECK(back.center == s.center);
    CHECK(back.axes == s.axes);
    CHECK(back.color == s.color);
}

TEST_CASE("scene buffers") {
    Device d(fixture::serial());
    const Scene s = synth_scene(4, 1000, SynthSpec{.sh_degree = 3});
    {
        const SceneBuffers b = SceneBuffers::upload(d, s);
        CHECK(d.accounted_bytes() == SceneBuffers::bytes({1000, 3}));
        CHECK(SceneBuffers::bytes({1000, 3}) == 1000ull * (12 + 16 + 12 + 4 + 4 * 48));
        CHECK(b.sh().size_words() == 48000);
        CHECK(b.rotations().view().f32(4 * 999 + 2) == s.gaussians()[999].rotation[2]);
        CHECK(b.sh().view().f32(48 * 10 + 47) == s.gaussians()[10].sh[47]);
    }
    {
        const SceneBuffers empty = SceneBuffers::upload(d, Scene({}, 0));
        CHECK(d.accounted_bytes() == 0);
    }
    DeviceDesc small = fixture::serial();
    small.limits.max_buffer_size = 1 << 20;
    Device tiny(small);
    try {
        SceneBuffers(tiny, SceneLayout{1 << 20, 0});
        FAIL("expected ExceedsBufferLimit");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ExceedsBufferLimit);
    }
}

TEST_CASE("preprocess_splat matches the double-precision math") {
    fixture::Rng rng(21);
    const Scene s = synth_scene(21, 2000, SynthSpec{.scale_min = 0.005f, .scale_max = 0.2f, .sh_degree = 3});
    const Camera cam = fixture::camera_at({0.3, 0.2, 3.5}, {0, 0, 0}, 800, 600);
    const FrameConstants k = frame_constants(cam, {s.count(), 3}, {});
    int kept = 0;
    for (const Gaussian& g : s.gaussians()) {
        SplatMath m;
        const SplatInput in{g.position, g.rotation, g.scale, g.opacity, std::span<const float>(g.sh.data(), 48)};
        if (preprocess_splat(in, k, m) != CullResult::Kept) continue;
        ++kept;
        const Eigen::Vector3d p = Eigen::Vector3f(g.position.data()).cast<double>();
        const Eigen::Matrix3d sig = reference::covariance3d(Eigen::Vector4f(g.rotation.data()).cast<double>(),
                                                            Eigen::Vector3f(g.scale.data()).cast<double>());
        const reference::Projection pr = reference::project_covariance(sig, p, cam);
        const double scale2 = pr.cov.cwiseAbs().maxCoeff();
        CHECK(std::abs(m.cov2[0] - pr.cov(0, 0)) <= 1e-4 * scale2);
        CHECK(std::abs(m.cov2[1] - pr.cov(0, 1)) <= 1e-4 * scale2);
        CHECK(std::abs(m.cov2[2] - pr.cov(1, 1)) <= 1e-4 * scale2);
        CHECK(std::abs(m.center[0] - pr.center_px.x()) <= 1e-4 * std::max(1.0, std::abs(pr.center_px.x())));
        const reference::EllipseAxes ax = reference::eigen_axes(pr.cov);
        const double len = ax.major.norm();
        CHECK(std::abs(std::hypot(m.major[0], m.major[1]) - len) <= 1e-4 * len);
        const Eigen::Vector3d dir = (p - cam.position()).normalized();
        const Eigen::Vector3d rgb = oracle::sh_color(g.sh.data(), 3, dir);
        for (int c = 0; c < 3; ++c) CHECK(std::abs(m.rgb[c] - rgb[c]) < 1e-5);
    }
    CHECK(kept > 1000);
}

TEST_CASE("cull reasons") {
    const Camera cam = fixture::front_camera(100, 100);
    const FrameConstants k = frame_constants(cam, {1, 0}, {});
    auto run = [&](const Gaussian& g, const FrameConstants& kk) {
        SplatMath m;
        return preprocess_splat({g.position, g.rotation, g.scale, g.opacity, std::span<const float>(g.sh.data(), 3)},
                                kk, m);
    };
    CHECK(run(fixture::splat_at(0, 0, 0, 0.1f, 0.5f), k) == CullResult::Kept);
    CHECK(run(fixture::splat_at(0, 0, 6, 0.1f, 0.5f), k) == CullResult::Frustum);
    CHECK(run(fixture::splat_at(0, 0, 0, 0.1f, 1.0f / 512.0f), k) == CullResult::Opacity);
    CHECK(run(fixture::splat_at(0, 0, 0, 0.0f, 0.5f), k) == CullResult::Kept); // dilation keeps it PD
    CHECK(run(fixture::splat_at(50, 0, 0, 0.1f, 0.5f), k) == CullResult::Viewport);
    FrameConstants nc = frame_constants(cam, {1, 0}, RenderFlags{.no_cull = true});
    CHECK(run(fixture::splat_at(50, 0, 0, 0.1f, 0.5f), nc) == CullResult::Kept);
    CHECK(run(fixture::splat_at(0, 0, 6, 0.1f, 0.5f), nc) == CullResult::Frustum);
}

TEST_CASE("SH direction toggle") {
    Gaussian g = fixture::splat_at(0, 0, 0, 0.1f, 0.5f);
    g.sh[3 * 2 + 0] = 1.0f; // band-1 z term, red
    const Camera cam = fixture::front_camera(64, 64);
    SplatMath a, b;
    const SplatInput in{g.position, g.rotation, g.scale, g.opacity, std::span<const float>(g.sh.data(), 12)};
    preprocess_splat(in, frame_constants(cam, {1, 1}, {}), a);
    preprocess_splat(in, frame_constants(cam, {1, 1}, {.sh_direction = ShDirection::SplatToCamera}), b);
    // camera at +z looking at the origin: camera-to-splat direction is -z
    CHECK(a.rgb[0] == doctest::Approx(0.5 - 0.48860251190291992));
    CHECK(b.rgb[0] == doctest::Approx(0.5 + 0.48860251190291992));
}

TEST_CASE("preprocess kernel: compaction, keys and packing") {
    const Scene s = fixture::anisotropic_cloud(31, 5000);
    const Camera cam = fixture::camera_at({0.4, -0.2, 2.2}, {0.1, 0, 0}, 400, 300);
    const Run r = preprocess_once(s, cam);
    const auto want = reference::survivors_f32(s, cam, {});
    REQUIRE(r.count == want.size());
    std::vector<std::uint32_t> got(r.sources.begin(), r.sources.begin() + r.count);
    std::sort(got.begin(), got.end());
    CHECK(got == want);
    CHECK(std::adjacent_find(got.begin(), got.end()) == got.end());
    CHECK(std::all_of(r.sources.begin() + r.count, r.sources.end(), [](std::uint32_t x) { return x == 0xDEADBEEF; }));
    CHECK(std::all_of(r.raw_splats.begin() + r.count * kProjectedWords, r.raw_splats.end(),
                      [](std::uint32_t x) { return x == 0xDEADBEEF; }));

    const FrameConstants k = frame_constants(cam, {s.count(), s.sh_degree()}, {});
    for (std::uint32_t slot = 0; slot < r.count; ++slot) {
        CHECK(r.payload[slot] == slot);
        const Gaussian& g = s.gaussians()[r.sources[slot]];
        SplatMath m;
        preprocess_splat({g.position, g.rotation, g.scale, g.opacity, std::span<const float>(g.sh.data(), 27)}, k, m);
        CHECK(r.keys[slot] == depth_key(m.depth));
        CHECK(r.splats[slot].color == pack_rgba8(m.rgb[0], m.rgb[1], m.rgb[2], g.opacity));
        CHECK(r.splats[slot].center == m.center);
        // axes: within half-precision rounding of the double-precision reference
        const Eigen::Vector3d p = Eigen::Vector3f(g.position.data()).cast<double>();
        const auto ax = reference::eigen_axes(
            reference::project_covariance(reference::covariance3d(Eigen::Vector4f(g.rotation.data()).cast<double>(),
                                                                  Eigen::Vector3f(g.scale.data()).cast<double>()),
                                          p, cam)
                .cov);
        // eigenvectors of nearly isotropic ellipses are ill-conditioned in binary32
        if (ax.major.norm() < 1.01 * ax.minor.norm()) continue;
        for (int a = 0; a < 2; ++a) {
            const auto got_axis = unpack_half2(r.splats[slot].axes[a]);
            const Eigen::Vector2d ref_axis = a == 0 ? ax.major : ax.minor;
            for (int c = 0; c < 2; ++c) {
                const double ref = ref_axis[c];
                const double half_ulp = std::ldexp(1.0, std::max(std::ilogb(std::max(std::abs(ref), 1e-6)), -14) - 11);
                CHECK(std::abs(got_axis[c] - ref) <= half_ulp + 1e-4 * ref_axis.norm());
            }
        }
    }
}

TEST_CASE("preprocess edge cases") {
    const Scene s = fixture::anisotropic_cloud(5, 600);
    const Camera away = fixture::camera_at({0, 0, 5}, {0, 0, 10}, 64, 64);
    CHECK(preprocess_once(s, away).count == 0);
    CHECK(preprocess_once(Scene({}, 0), fixture::front_camera(8, 8)).count == 0);
    // order of compaction may change with the schedule, the set may not
    const Camera cam = fixture::front_camera(128, 128, 2.5);
    auto set_of = [](const Run& r) {
        std::vector<std::uint32_t> v(r.sources.begin(), r.sources.begin() + r.count);
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(set_of(preprocess_once(s, cam, {}, Schedule::Reverse)) == set_of(preprocess_once(s, cam, {}, Schedule::InOrder)));
    const Run full = preprocess_once(s, cam), nocull = preprocess_once(s, cam, {.no_cull = true});
    CHECK(nocull.count >= full.count);
}
