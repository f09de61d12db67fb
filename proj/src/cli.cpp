#include "splat/cli.hpp"

#include "splat/bench.hpp"
#include "splat/camera.hpp"
#include "splat/error.hpp"
#include "splat/gpu/sort.hpp"
#include "splat/pipeline.hpp"
#include "splat/reference.hpp"
#include "splat/scene.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>

namespace splat {

namespace {

struct SceneArgs {
    std::string ply;
    std::optional<std::size_t> synth;
    std::uint64_t seed = 1;
    int sh_degree = 0;
    bool skip_bad = false;
};

struct ViewArgs {
    std::string camera;
    std::uint32_t width = 512;
    std::uint32_t height = 512;
};

void add_scene_options(CLI::App& cmd, SceneArgs& s) {
    cmd.add_option("--ply", s.ply, "3DGS PLY scene (binary little-endian)");
    cmd.add_option("--synth", s.synth, "Use a synthetic scene with this many splats instead of --ply");
    cmd.add_option("--seed", s.seed, "Seed for --synth");
    cmd.add_option("--sh-degree", s.sh_degree, "SH degree for --synth")->check(CLI::Range(0, 3));
    cmd.add_flag("--skip-bad", s.skip_bad, "Drop records with non-finite fields instead of failing");
}

void add_view_options(CLI::App& cmd, ViewArgs& v) {
    cmd.add_option("--camera", v.camera, "Camera JSON (first keyframe is used)");
    cmd.add_option("--width", v.width, "Viewport width in pixels");
    cmd.add_option("--height", v.height, "Viewport height in pixels");
}

struct LoadedScene {
    Scene scene;
    std::string name;
    std::size_t skipped = 0;
};

LoadedScene load_scene(const SceneArgs& s) {
    if (!s.ply.empty() && s.synth) throw Error(Errc::InvalidSpec, "use either --ply or --synth, not both");
    if (s.synth) {
        SynthSpec spec;
        spec.sh_degree = s.sh_degree;
        return {synth_scene(s.seed, *s.synth, spec), "synth:" + std::to_string(*s.synth) + ":" + std::to_string(s.seed), 0};
    }
    if (s.ply.empty()) throw Error(Errc::InvalidSpec, "a scene is required (--ply FILE or --synth N)");
    PlyLoad load = read_ply_file(s.ply, PlyOptions{s.skip_bad});
    return {std::move(load.scene), s.ply, load.skipped};
}

Viewport viewport_of(const ViewArgs& v) {
    if (v.width == 0 || v.height == 0) throw Error(Errc::InvalidCamera, "--width and --height must be positive");
    return {v.width, v.height};
}

/// Front view of the scene bounds from +z.
Keyframe framing_keyframe(const Scene& scene) {
    Keyframe k;
    if (scene.empty()) return k;
    const auto& box = scene.world_aabb();
    Eigen::Vector3d lo(box.min[0], box.min[1], box.min[2]);
    Eigen::Vector3d hi(box.max[0], box.max[1], box.max[2]);
    const Eigen::Vector3d center = 0.5 * (lo + hi);
    const double radius = std::max(0.5 * (hi - lo).norm(), 1e-3);
    k.target = center;
    k.position = center + Eigen::Vector3d(0.0, 0.0, radius / std::tan(0.5 * k.fov_y_deg * M_PI / 180.0) * 1.1);
    return k;
}

CameraPath default_orbit(const Scene& scene, std::uint32_t frames) {
    const Keyframe front = framing_keyframe(scene);
    const Eigen::Vector3d offset = front.position - front.target;
    CameraPath path;
    path.frame_count = std::max(frames, 1u);
    for (int i = 0; i <= 4; ++i) {
        const double angle = 0.5 * M_PI * i;
        Keyframe k = front;
        k.position = front.target + Eigen::Vector3d(std::sin(angle) * offset.z(), offset.y(), std::cos(angle) * offset.z());
        path.keyframes.push_back(k);
    }
    return path;
}

Camera single_camera(const ViewArgs& v, const Scene& scene) {
    const Viewport vp = viewport_of(v);
    if (v.camera.empty()) {
        CameraPath path{{framing_keyframe(scene)}, 1};
        return sample_path(path, 0, vp);
    }
    return sample_path(read_camera_path_file(v.camera), 0, vp);
}

std::string stats_json(const FrameStats& s, const std::string& backend) {
    nlohmann::json j{{"backend", backend},          {"visible_count", s.visible_count},
                     {"preprocess_ms", s.preprocess_ms}, {"sort_ms", s.sort_ms},
                     {"render_ms", s.render_ms},     {"total_ms", s.total_ms},
                     {"timestamp_valid", s.timestamp_valid}};
    return j.dump();
}

int cmd_render(const SceneArgs& sa, const ViewArgs& va, const std::string& backend, const std::string& out_path,
               const std::string& float_out, bool no_cull, bool no_radius, std::ostream& out) {
    const LoadedScene loaded = load_scene(sa);
    const Camera camera = single_camera(va, loaded.scene);
    RenderFlags flags;
    flags.no_cull = no_cull;
    flags.no_radius = no_radius;
    if (backend == "cpu") {
        const auto start = std::chrono::steady_clock::now();
        reference::RasterOptions opts;
        opts.flags = flags;
        opts.axis_mode = reference::AxisMode::Half;
        const reference::ReferenceImage img = reference::rasterize_reference(loaded.scene, camera, opts);
        FrameStats stats;
        stats.visible_count = static_cast<std::uint32_t>(reference::preprocess(loaded.scene, camera, flags).size());
        if (!out_path.empty()) write_png(out_path, to_rgba8(img));
        if (!float_out.empty()) write_float_dump(float_out, img);
        stats.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        out << stats_json(stats, backend) << "\n";
        return kExitOk;
    }
    gpu::Device device(gpu::desc_from_environment());
    RendererOptions ro;
    ro.flags = flags;
    Renderer renderer(device, loaded.scene, camera.viewport(), ro);
    Image image;
    const FrameStats stats = renderer.render_frame(camera, &image);
    if (!out_path.empty()) write_png(out_path, image);
    out << stats_json(stats, backend) << "\n";
    return kExitOk;
}

struct FaultPlan {
    std::optional<std::uint32_t> lose_device_after;
    bool flip_sort_bit = false;
};

FaultPlan parse_fault(const std::string& text) {
    FaultPlan f;
    if (text.empty()) return f;
    if (text == "sort-bitflip") {
        f.flip_sort_bit = true;
    } else if (text.rfind("device-loss:", 0) == 0) {
        f.lose_device_after = static_cast<std::uint32_t>(std::stoul(text.substr(12)));
    } else {
        throw Error(Errc::InvalidSpec, "unknown fault '" + text + "'");
    }
    return f;
}

int cmd_bench(const SceneArgs& sa, const ViewArgs& va, const std::string& path_file, std::uint32_t frames,
              std::uint32_t warmup, bool no_cull, bool no_radius, const std::string& report_path,
              const FaultPlan& fault, std::ostream& out, std::ostream& err) {
    if (frames == 0) throw Error(Errc::InvalidSpec, "--frames must be at least 1");
    const LoadedScene loaded = load_scene(sa);
    const Viewport vp = viewport_of(va);
    CameraPath path;
    if (!path_file.empty()) {
        path = read_camera_path_file(path_file);
    } else if (!va.camera.empty()) {
        path = read_camera_path_file(va.camera);
        path.frame_count = 1;
    } else {
        path = default_orbit(loaded.scene, frames);
    }

    gpu::Device device(gpu::desc_from_environment());
    RendererOptions ro;
    ro.flags.no_cull = no_cull;
    ro.flags.no_radius = no_radius;
    Renderer renderer(device, loaded.scene, vp, ro);

    BenchReport report;
    report.adapter = device.adapter();
    report.scene = loaded.name;
    report.splat_count = loaded.scene.count();
    report.width = vp.width;
    report.height = vp.height;
    report.frames = frames;
    report.warmup = warmup;
    report.memory_total_bytes = renderer.memory_report().total_bytes;
    report.no_cull = no_cull;
    report.no_radius = no_radius;

    std::vector<FrameStats> measured;
    int code = kExitOk;
    const std::uint32_t total = warmup + frames;
    for (std::uint32_t i = 0; i < total; ++i) {
        if (fault.lose_device_after && i == *fault.lose_device_after) device.lose();
        const Camera camera = sample_path(path, i % path.frame_count, vp);
        try {
            const FrameStats s = renderer.render_frame(camera);
            if (i >= warmup) measured.push_back(s);
        } catch (const Error& e) {
            if (e.code() != Errc::DeviceLost) throw;
            err << "splat: " << e.what() << " after " << i << " frames; report is partial\n";
            report.partial = true;
            code = kExitDevice;
            break;
        }
    }
    fill_stats(report, measured);
    const std::string json = bench_report_json(report);
    if (!report_path.empty()) {
        std::ofstream f(report_path);
        if (!f) throw Error(Errc::FileError, "cannot write " + report_path);
        f << json << "\n";
    }
    out << json << "\n";
    return code;
}

int cmd_sort_test(std::size_t n, std::uint64_t seed, std::uint32_t iters, const FaultPlan& fault,
                  std::ostream& out, std::ostream& err) {
    if (iters == 0) throw Error(Errc::InvalidSpec, "--iters must be at least 1");
    gpu::Device device(gpu::desc_from_environment());
    gpu::RadixSorter sorter(device, n);
    bool all_ok = true;
    for (KeyDistribution dist : kAllDistributions) {
        const std::vector<std::uint32_t> keys = generate_keys(dist, n, seed);
        std::vector<std::uint32_t> payload(n);
        for (std::size_t i = 0; i < n; ++i) payload[i] = static_cast<std::uint32_t>(i);
        const auto expected = reference::stable_sort_oracle(keys, payload);

        std::vector<double> times;
        bool ok = true;
        for (std::uint32_t it = 0; it < iters; ++it) {
            std::vector<std::uint32_t> k = keys, p = payload;
            const auto start = std::chrono::steady_clock::now();
            sorter.sort(device, k, p);
            times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
            if (fault.flip_sort_bit && !k.empty()) k[k.size() / 2] ^= 1u;
            if (k != expected.first || p != expected.second) {
                std::size_t at = 0;
                while (at < n && k[at] == expected.first[at] && p[at] == expected.second[at]) ++at;
                err << "MISMATCH n=" << n << " seed=" << seed << " distribution=" << distribution_name(dist)
                    << " first_index=" << at << "\n"
                    << "reproduce: splat sort-test --n " << n << " --seed " << seed << " --iters 1\n";
                ok = false;
                break;
            }
        }
        all_ok = all_ok && ok;
        out << (ok ? "PASS " : "FAIL ") << distribution_name(dist) << " n=" << n << " median_ms=" << median(times)
            << "\n";
    }
    return all_ok ? kExitOk : kExitSortMismatch;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gaussian splatting renderer: render, benchmark and sort self-test"};
    app.name("splat");
    app.require_subcommand(1);

    SceneArgs render_scene;
    ViewArgs render_view;
    std::string backend = "gpu", out_path, float_out;
    bool render_no_cull = false, render_no_radius = false;
    CLI::App* render = app.add_subcommand("render", "Render one frame to PNG and print stats as JSON");
    add_scene_options(*render, render_scene);
    add_view_options(*render, render_view);
    render->add_option("--backend", backend, "gpu (device pipeline) or cpu (reference oracle)")
        ->check(CLI::IsMember({"gpu", "cpu"}));
    render->add_option("--out", out_path, "Output PNG path");
    render->add_option("--float-out", float_out, "Raw float32 dump of the reference image (cpu backend)");
    render->add_flag("--no-cull", render_no_cull, "-CULL ablation: frustum test only");
    render->add_flag("--no-radius", render_no_radius, "-RADIUS ablation: fixed quad size");

    SceneArgs bench_scene;
    ViewArgs bench_view;
    std::string camera_path, report_path, bench_fault;
    std::uint32_t frames = 200, warmup = 20;
    bool bench_no_cull = false, bench_no_radius = false;
    CLI::App* bench = app.add_subcommand("bench", "Time frames along a camera path and emit a BenchReport");
    add_scene_options(*bench, bench_scene);
    add_view_options(*bench, bench_view);
    bench->add_option("--camera-path", camera_path, "Camera path JSON");
    bench->add_option("--frames", frames, "Measured frames");
    bench->add_option("--warmup", warmup, "Warmup frames, excluded from statistics");
    bench->add_flag("--no-cull", bench_no_cull, "-CULL ablation");
    bench->add_flag("--no-radius", bench_no_radius, "-RADIUS ablation");
    bench->add_option("--report", report_path, "Also write the report to this file");
    bench->add_option("--inject-fault", bench_fault)->group("");

    std::size_t sort_n = 0;
    std::uint64_t sort_seed = 1;
    std::uint32_t iters = 3;
    std::string sort_fault;
    CLI::App* sort = app.add_subcommand("sort-test", "Check the device radix sort against the CPU oracle");
    sort->add_option("--n", sort_n, "Element count")->required();
    sort->add_option("--seed", sort_seed, "Key generator seed");
    sort->add_option("--iters", iters, "Timed repetitions per distribution");
    sort->add_option("--inject-fault", sort_fault)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "splat: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    for (auto [cmd, scene] : {std::pair{render, &render_scene}, std::pair{bench, &bench_scene}}) {
        if (cmd->parsed() && scene->ply.empty() && !scene->synth) {
            err << "splat: a scene is required (--ply FILE or --synth N)\n" << cmd->help();
            return kExitUsage;
        }
    }

    try {
        if (render->parsed()) {
            return cmd_render(render_scene, render_view, backend, out_path, float_out, render_no_cull,
                              render_no_radius, out);
        }
        if (bench->parsed()) {
            return cmd_bench(bench_scene, bench_view, camera_path, frames, warmup, bench_no_cull, bench_no_radius,
                             report_path, parse_fault(bench_fault), out, err);
        }
        return cmd_sort_test(sort_n, sort_seed, iters, parse_fault(sort_fault), out, err);
    } catch (const Error& e) {
        err << "splat: " << e.what() << "\n";
        return e.is_device_error() ? kExitDevice : kExitUsage;
    } catch (const std::exception& e) {
        err << "splat: " << e.what() << "\n";
        return kExitUsage;
    }
}

} // namespace splat
