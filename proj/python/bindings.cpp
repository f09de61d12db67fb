#include "splat/bench.hpp"
#include "splat/camera.hpp"
#include "splat/cli.hpp"
#include "splat/error.hpp"
#include "splat/gpu/device.hpp"
#include "splat/gpu/sort.hpp"
#include "splat/packing.hpp"
#include "splat/pipeline.hpp"
#include "splat/reference.hpp"
#include "splat/scene.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <sstream>

namespace py = pybind11;
using namespace splat;

namespace {

using U32Array = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<std::uint32_t> to_vector(const U32Array& a) {
    if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
    return {a.data(), a.data() + a.size()};
}

U32Array to_array(const std::vector<std::uint32_t>& v) {
    U32Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

/// RGBA8 image as an (H, W, 4) uint8 array.
py::array_t<std::uint8_t> image_array(const Image& image) {
    py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(image.height), static_cast<py::ssize_t>(image.width),
                                   py::ssize_t{4}});
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        const std::uint32_t p = image.pixels[i];
        std::uint8_t* px = out.mutable_data() + 4 * i;
        for (int c = 0; c < 4; ++c) px[c] = static_cast<std::uint8_t>(p >> (8 * c));
    }
    return out;
}

py::dict stats_dict(const FrameStats& s) {
    py::dict d;
    d["preprocess_ms"] = s.preprocess_ms;
    d["sort_ms"] = s.sort_ms;
    d["render_ms"] = s.render_ms;
    d["total_ms"] = s.total_ms;
    d["visible_count"] = s.visible_count;
    d["timestamp_valid"] = s.timestamp_valid;
    return d;
}

py::dict memory_dict(const gpu::MemoryReport& r) {
    py::dict entries;
    for (const auto& e : r.entries) entries[py::str(e.label)] = e.bytes;
    py::dict d;
    d["entries"] = entries;
    d["total_bytes"] = r.total_bytes;
    return d;
}

gpu::Schedule parse_schedule(const std::string& name) {
    if (name == "serial" || name == "in-order") return gpu::Schedule::InOrder;
    if (name == "reverse") return gpu::Schedule::Reverse;
    if (name == "shuffled") return gpu::Schedule::Shuffled;
    if (name == "parallel") return gpu::Schedule::Parallel;
    throw py::value_error("schedule must be serial, reverse, shuffled or parallel");
}

RenderFlags make_flags(bool no_cull, bool no_radius, const std::string& sh_direction) {
    RenderFlags f;
    f.no_cull = no_cull;
    f.no_radius = no_radius;
    if (sh_direction == "camera-to-splat") f.sh_direction = ShDirection::CameraToSplat;
    else if (sh_direction == "splat-to-camera") f.sh_direction = ShDirection::SplatToCamera;
    else throw py::value_error("sh_direction must be camera-to-splat or splat-to-camera");
    return f;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "3D Gaussian splatting: wait-free radix sort, preprocess, instanced-quad raster, CPU reference";

    py::register_exception<Error>(m, "SplatError", PyExc_RuntimeError);

    // --- scenes -----------------------------------------------------------
    py::class_<Scene>(m, "Scene")
        .def_property_readonly("count", &Scene::count)
        .def_property_readonly("sh_degree", &Scene::sh_degree)
        .def("__len__", &Scene::count)
        .def("positions",
             [](const Scene& s) {
                 py::array_t<float> out({static_cast<py::ssize_t>(s.count()), py::ssize_t{3}});
                 for (std::size_t i = 0; i < s.count(); ++i)
                     std::memcpy(out.mutable_data() + 3 * i, s.gaussians()[i].position.data(), 12);
                 return out;
             })
        .def("opacities",
             [](const Scene& s) {
                 py::array_t<float> out(static_cast<py::ssize_t>(s.count()));
                 for (std::size_t i = 0; i < s.count(); ++i) out.mutable_data()[i] = s.gaussians()[i].opacity;
                 return out;
             })
        .def("permuted", [](const Scene& s, const U32Array& order) { return s.permuted(to_vector(order)); });

    m.def(
        "synth_scene",
        [](std::uint64_t seed, std::size_t n, int sh_degree, float extent, float scale_min, float scale_max,
           float opacity_min, float opacity_max, float sh_amplitude) {
            SynthSpec spec;
            spec.extent_min = {-extent, -extent, -extent};
            spec.extent_max = {extent, extent, extent};
            spec.scale_min = scale_min;
            spec.scale_max = scale_max;
            spec.opacity_min = opacity_min;
            spec.opacity_max = opacity_max;
            spec.sh_amplitude = sh_amplitude;
            spec.sh_degree = sh_degree;
            return synth_scene(seed, n, spec);
        },
        py::arg("seed"), py::arg("n"), py::arg("sh_degree") = 0, py::arg("extent") = 1.0f,
        py::arg("scale_min") = 0.01f, py::arg("scale_max") = 0.05f, py::arg("opacity_min") = 0.05f,
        py::arg("opacity_max") = 0.95f, py::arg("sh_amplitude") = 1.0f,
        "Deterministic synthetic cloud in the cube [-extent, extent]^3.");
    m.def(
        "read_ply", [](const std::string& path, bool skip_bad) { return read_ply_file(path, {skip_bad}).scene; },
        py::arg("path"), py::arg("skip_bad") = false);
    m.def("write_ply", [](const Scene& scene, const std::string& path) { write_ply_file(path, scene); },
          py::arg("scene"), py::arg("path"));

    // --- camera -----------------------------------------------------------
    py::class_<Camera>(m, "Camera")
        .def(py::init([](const Eigen::Vector3d& position, const Eigen::Vector3d& target, std::uint32_t width,
                         std::uint32_t height, double fov_y_deg, const Eigen::Vector3d& up, double near_plane,
                         double far_plane) {
                 return Camera(look_at(position, target, up), fov_y_deg * M_PI / 180.0, Viewport{width, height},
                               near_plane, far_plane);
             }),
             py::arg("position"), py::arg("target"), py::arg("width"), py::arg("height"), py::arg("fov_y_deg") = 60.0,
             py::arg("up") = Eigen::Vector3d::UnitY(), py::arg("near") = 0.01, py::arg("far") = 1000.0)
        .def_property_readonly("view", &Camera::view)
        .def_property_readonly("fov_y", &Camera::fov_y)
        .def_property_readonly("width", [](const Camera& c) { return c.viewport().width; })
        .def_property_readonly("height", [](const Camera& c) { return c.viewport().height; })
        .def_property_readonly("position", &Camera::position);

    // --- device and renderer ----------------------------------------------
    py::class_<gpu::Device>(m, "Device")
        .def(py::init([](const std::string& schedule, std::uint32_t threads, bool timestamps,
                         std::uint64_t memory_budget) {
                 gpu::DeviceDesc d;
                 d.schedule = parse_schedule(schedule);
                 d.threads = threads;
                 d.timestamps = timestamps;
                 if (memory_budget) d.limits.memory_budget = memory_budget;
                 return std::make_unique<gpu::Device>(d);
             }),
             py::arg("schedule") = "parallel", py::arg("threads") = 0, py::arg("timestamps") = true,
             py::arg("memory_budget") = 0)
        .def_property_readonly("accounted_bytes", &gpu::Device::accounted_bytes)
        .def_property_readonly("adapter",
                               [](const gpu::Device& d) {
                                   const auto a = d.adapter();
                                   return py::dict(py::arg("name") = a.name, py::arg("backend") = a.backend,
                                                   py::arg("timestamps") = a.timestamps);
                               })
        .def_property_readonly("counters",
                               [](const gpu::Device& d) {
                                   const auto& c = d.counters();
                                   return py::dict(py::arg("dispatches") = c.dispatches,
                                                   py::arg("workgroups") = c.workgroups, py::arg("draws") = c.draws,
                                                   py::arg("vertices") = c.vertices,
                                                   py::arg("fragments") = c.fragments);
                               })
        .def("reset_counters", &gpu::Device::reset_counters)
        .def("memory_report", [](const gpu::Device& d) { return memory_dict(d.memory_report()); })
        .def("lose", &gpu::Device::lose, "Simulate device loss.");

    py::class_<Renderer>(m, "Renderer")
        .def(py::init([](gpu::Device& device, const Scene& scene, std::uint32_t width, std::uint32_t height,
                         bool no_cull, bool no_radius, const std::string& sh_direction,
                         std::array<float, 4> background) {
                 RendererOptions o;
                 o.flags = make_flags(no_cull, no_radius, sh_direction);
                 o.background = background;
                 return std::make_unique<Renderer>(device, scene, Viewport{width, height}, o);
             }),
             py::arg("device"), py::arg("scene"), py::arg("width"), py::arg("height"), py::kw_only(),
             py::arg("no_cull") = false, py::arg("no_radius") = false, py::arg("sh_direction") = "camera-to-splat",
             py::arg("background") = std::array<float, 4>{0, 0, 0, 0}, py::keep_alive<1, 2>())
        .def(
            "render",
            [](Renderer& r, const Camera& camera) {
                Image image;
                const FrameStats stats = r.render_frame(camera, &image);
                return py::make_tuple(image_array(image), stats_dict(stats));
            },
            py::arg("camera"), "Render one frame; returns (HxWx4 uint8 image, stats dict).")
        .def("set_ablation", &Renderer::set_ablation, py::arg("no_cull"), py::arg("no_radius"))
        .def("memory_report", [](const Renderer& r) { return memory_dict(r.memory_report()); })
        .def("reinitialize", &Renderer::reinitialize, py::arg("device"), py::keep_alive<1, 2>());

    m.def(
        "plan_memory",
        [](std::uint64_t count, int sh_degree, std::uint32_t width, std::uint32_t height) {
            return memory_dict(plan_memory(gpu::SceneLayout{count, sh_degree}, Viewport{width, height}));
        },
        py::arg("count"), py::arg("sh_degree"), py::arg("width"), py::arg("height"));

    m.def(
        "render_reference",
        [](const Scene& scene, const Camera& camera, const std::string& axis_mode, bool no_cull, bool no_radius,
           const std::string& sh_direction, std::array<float, 4> background) {
            reference::RasterOptions o;
            o.flags = make_flags(no_cull, no_radius, sh_direction);
            if (axis_mode == "half") o.axis_mode = reference::AxisMode::Half;
            else if (axis_mode != "exact") throw py::value_error("axis_mode must be exact or half");
            o.background = background;
            const reference::ReferenceImage img = reference::rasterize_reference(scene, camera, o);
            py::array_t<float> out(
                {static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width), py::ssize_t{4}});
            std::copy(img.rgba.begin(), img.rgba.end(), out.mutable_data());
            return out;
        },
        py::arg("scene"), py::arg("camera"), py::kw_only(), py::arg("axis_mode") = "exact",
        py::arg("no_cull") = false, py::arg("no_radius") = false, py::arg("sh_direction") = "camera-to-splat",
        py::arg("background") = std::array<float, 4>{0, 0, 0, 0},
        "Double-precision CPU reference; returns an HxWx4 float32 image.");
    m.def(
        "survivors", [](const Scene& scene, const Camera& camera, bool no_cull) {
            return to_array(reference::survivors_f32(scene, camera, make_flags(no_cull, false, "camera-to-splat")));
        },
        py::arg("scene"), py::arg("camera"), py::arg("no_cull") = false,
        "Scene indices the binary32 cull keeps, ascending.");
    m.def(
        "psnr",
        [](const F32Array& a, const F32Array& b) {
            return reference::psnr(std::span<const float>(a.data(), a.size()), std::span<const float>(b.data(), b.size()));
        },
        py::arg("a"), py::arg("b"), "PSNR over RGB of two RGBA float images on a [0, 1] scale.");

    // --- sort and scan ----------------------------------------------------
    m.def(
        "radix_sort",
        [](const U32Array& keys, std::optional<U32Array> payload, const std::string& schedule) {
            std::vector<std::uint32_t> k = to_vector(keys);
            std::vector<std::uint32_t> p;
            if (payload) {
                p = to_vector(*payload);
            } else {
                p.resize(k.size());
                for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<std::uint32_t>(i);
            }
            gpu::DeviceDesc d;
            d.schedule = parse_schedule(schedule);
            gpu::Device device(d);
            const gpu::RadixSorter sorter(device, std::max<std::size_t>(k.size(), 1));
            sorter.sort(device, k, p);
            return py::make_tuple(to_array(k), to_array(p));
        },
        py::arg("keys"), py::arg("payload") = py::none(), py::arg("schedule") = "parallel",
        "Stable device radix sort; payload defaults to the input index. Returns (keys, payload).");
    m.def(
        "stable_sort_oracle",
        [](const U32Array& keys, const U32Array& payload) {
            const auto [k, p] = reference::stable_sort_oracle(to_vector(keys), to_vector(payload));
            return py::make_tuple(to_array(k), to_array(p));
        },
        py::arg("keys"), py::arg("payload"));
    m.def(
        "exclusive_scan",
        [](const U32Array& values) {
            const std::vector<std::uint32_t> v = to_vector(values);
            gpu::Device device;
            const gpu::HierarchicalScan scan(device, std::max<std::size_t>(v.size(), 1), "python.scan");
            const gpu::Buffer data = device.create_buffer("python.scan.data", std::max<std::size_t>(v.size(), 1));
            device.write_buffer(data, 0, v);
            scan.run(device, data, v.size());
            return to_array(device.read_buffer(data, 0, v.size()));
        },
        py::arg("values"), "Hierarchical device exclusive scan (uint32, wrapping).");
    m.def(
        "generate_keys",
        [](const std::string& distribution, std::size_t n, std::uint64_t seed) {
            for (KeyDistribution d : kAllDistributions) {
                if (distribution == distribution_name(d)) return to_array(generate_keys(d, n, seed));
            }
            throw py::value_error("distribution must be uniform, duplicate-heavy, sorted or reverse-sorted");
        },
        py::arg("distribution"), py::arg("n"), py::arg("seed") = 0);

    // --- packing ----------------------------------------------------------
    m.def("float_to_half", &float_to_half, py::arg("value"));
    m.def("half_to_float", &half_to_float, py::arg("bits"));
    m.def("pack_rgba8", &pack_rgba8, py::arg("r"), py::arg("g"), py::arg("b"), py::arg("a"));
    m.def("depth_key", &depth_key, py::arg("view_depth"));

    // --- statistics and CLI -----------------------------------------------
    auto span_of = [](const F64Array& a) { return std::span<const double>(a.data(), a.size()); };
    m.def("median", [span_of](const F64Array& a) { return median(span_of(a)); }, py::arg("samples"));
    m.def(
        "percentile_nearest_rank", [span_of](const F64Array& a, double p) { return percentile_nearest_rank(span_of(a), p); },
        py::arg("samples"), py::arg("p"));
    m.def("stddev_population", [span_of](const F64Array& a) { return stddev_population(span_of(a)); },
          py::arg("samples"));
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv{"splat"};
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run `splat <args>` in-process; returns (exit_code, stdout, stderr).");
}
