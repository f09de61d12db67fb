#include "splat/pipeline.hpp"

#include "splat/error.hpp"
#include "splat/gpu/kernel.hpp"
#include "splat/gpu/raster.hpp"

#include <chrono>

namespace splat {

using gpu::Buffer;
using gpu::CommandEncoder;

std::uint32_t readback_row_pitch_bytes(std::uint32_t width) noexcept {
    const std::uint64_t bytes = static_cast<std::uint64_t>(width) * 4;
    return static_cast<std::uint32_t>(gpu::ceil_div(bytes, kRowPitchAlignment) * kRowPitchAlignment);
}

gpu::MemoryReport plan_memory(gpu::SceneLayout layout, Viewport viewport) {
    gpu::MemoryReport r;
    auto add = [&](std::string label, std::uint64_t bytes) {
        r.entries.push_back({std::move(label), bytes});
        r.total_bytes += bytes;
    };
    const std::uint64_t n = layout.count;
    const std::uint64_t sh = 3ull * sh_coeff_count(layout.sh_degree);
    add("scene.positions", 12 * n);
    add("scene.rotations", 16 * n);
    add("scene.scales", 12 * n);
    add("scene.opacities", 4 * n);
    add("scene.sh", 4 * sh * n);
    add("visible.splats", 4 * gpu::kProjectedWords * n);
    add("visible.source_index", 4 * n);
    add("visible.counter", 4);
    const gpu::SortPlan plan = gpu::plan_sort(n);
    const std::uint64_t p = plan.padded_capacity;
    add("sort.keys_a", 4 * p);
    add("sort.keys_b", 4 * p);
    add("sort.payload_a", 4 * p);
    add("sort.payload_b", 4 * p);
    add("sort.histogram", plan.histogram_bytes);
    const auto levels = gpu::scan_level_lengths(plan.max_tiles * gpu::kRadix);
    for (std::size_t l = 1; l < levels.size(); ++l) add("sort.scan.level" + std::to_string(l), 4 * levels[l]);
    add("sort.args", plan.args_bytes);
    add("sort.host_count", 4);
    add("frame.draw_args", 16);
    add("frame.uniforms", 4 * gpu::uniform::kWords);
    add("frame.timestamps", 8 * kTimestampQueries);
    add("frame.target", 4ull * viewport.width * viewport.height);
    add("frame.readback", static_cast<std::uint64_t>(readback_row_pitch_bytes(viewport.width)) * viewport.height);
    return r;
}

struct Renderer::Resources {
    gpu::SceneBuffers scene;
    gpu::VisibleSet visible;
    std::unique_ptr<gpu::RadixSorter> sorter;
    Buffer draw_args;
    Buffer uniforms;
    Buffer timestamps;
    gpu::Texture target;
    Buffer readback;
};

Renderer::Renderer(gpu::Device& device, Scene scene, Viewport viewport, RendererOptions options)
    : device_(&device), scene_(std::move(scene)), layout_{scene_->count(), scene_->sh_degree()},
      viewport_(viewport), options_(options) {
    allocate();
}

Renderer::Renderer(gpu::Device& device, gpu::SceneLayout layout, Viewport viewport, RendererOptions options)
    : device_(&device), layout_(layout), viewport_(viewport), options_(options) {
    allocate();
}

Renderer::~Renderer() = default;

void Renderer::allocate() {
    if (viewport_.width == 0 || viewport_.height == 0) throw Error(Errc::InvalidCamera, "viewport must be at least 1x1");
    if (layout_.sh_degree < 0 || layout_.sh_degree > kMaxShDegree)
        throw Error(Errc::UnsupportedLayout, "SH degree must be 0..3");
    if (device_->limits().max_storage_binding_size < 128ull << 20)
        throw Error(Errc::UnsupportedDevice, "adapter storage binding limit below 128 MiB");
    res_.reset();
    auto r = std::make_unique<Resources>();
    gpu::Device& d = *device_;
    r->scene = scene_ ? gpu::SceneBuffers::upload(d, *scene_) : gpu::SceneBuffers(d, layout_);
    r->visible = gpu::VisibleSet(d, layout_.count);
    r->sorter = std::make_unique<gpu::RadixSorter>(d, layout_.count);
    r->draw_args = d.create_buffer("frame.draw_args", 4);
    r->uniforms = d.create_buffer("frame.uniforms", gpu::uniform::kWords);
    r->timestamps = d.create_buffer("frame.timestamps", 2 * kTimestampQueries);
    r->target = d.create_texture("frame.target", viewport_.width, viewport_.height);
    r->readback = d.create_buffer("frame.readback",
                                  static_cast<std::uint64_t>(readback_row_pitch_bytes(viewport_.width) / 4) *
                                      viewport_.height);
    res_ = std::move(r);
}

void Renderer::reinitialize(gpu::Device& device) {
    if (!scene_) throw Error(Errc::InvalidSpec, "layout-only renderer has no scene to re-upload");
    res_.reset(); // release the old device's accounting first
    device_ = &device;
    allocate();
}

void Renderer::set_ablation(bool no_cull, bool no_radius) noexcept {
    options_.flags.no_cull = no_cull;
    options_.flags.no_radius = no_radius;
}

const gpu::VisibleSet& Renderer::visible() const noexcept { return res_->visible; }
const gpu::RadixSorter& Renderer::sorter() const noexcept { return *res_->sorter; }
const gpu::Buffer& Renderer::draw_args() const noexcept { return res_->draw_args; }

gpu::MemoryReport Renderer::memory_report() const {
    // Every allocation goes through the device ledger; pick the renderer's
    // entries out of it by label.
    gpu::MemoryReport r;
    const gpu::MemoryReport all = device_->memory_report();
    for (const auto& e : all.entries) {
        const bool ours = e.label.rfind("scene.", 0) == 0 || e.label.rfind("visible.", 0) == 0 ||
                          e.label.rfind("sort.", 0) == 0 || e.label.rfind("frame.", 0) == 0;
        if (!ours) continue;
        r.entries.push_back(e);
        r.total_bytes += e.bytes;
    }
    return r;
}

namespace {

double ns_to_ms(std::uint64_t a, std::uint64_t b) { return b > a ? static_cast<double>(b - a) * 1e-6 : 0.0; }

} // namespace

FrameStats Renderer::render_frame(const Camera& camera, Image* readback) {
    gpu::Device& d = *device_;
    if (d.is_lost()) throw Error(Errc::DeviceLost, "device lost; call reinitialize()");
    if (camera.viewport().width != viewport_.width || camera.viewport().height != viewport_.height)
        throw Error(Errc::InvalidCamera, "camera viewport does not match the renderer");
    const auto host_start = std::chrono::steady_clock::now();

    Resources& r = *res_;
    const gpu::RadixSorter& sorter = *r.sorter;
    const bool timestamps = d.desc().timestamps;
    gpu::QuerySet queries(kTimestampQueries);
    auto stamp = [&](CommandEncoder& enc, std::uint32_t i) {
        if (timestamps) enc.write_timestamp(queries, i);
    };

    CommandEncoder enc;
    enc.write_buffer(r.uniforms, 0, gpu::make_uniforms(camera, layout_, options_.flags));
    enc.write_buffer(r.visible.counter, 0, {0u});
    stamp(enc, 0);
    gpu::encode_preprocess(enc, r.scene, r.uniforms, r.visible, sorter.keys(), sorter.payload());
    stamp(enc, 1);

    // build_indirect_args: one workgroup turns the visible counter into
    // sort sizes and the instanced draw arguments.
    const gpu::BufferView counter = r.visible.counter.view();
    const gpu::BufferView draw = r.draw_args.view();
    const std::uint64_t capacity = layout_.count;
    enc.dispatch(
        "build_indirect_args",
        [&sorter, counter, draw, capacity](gpu::WorkgroupId) {
            gpu::lanes([&](std::uint32_t lid) {
                if (lid != 0) return;
                const std::uint32_t count =
                    static_cast<std::uint32_t>(std::min<std::uint64_t>(counter[0], capacity));
                sorter.write_args(count);
                draw[0] = 4;
                draw[1] = count;
                draw[2] = 0;
                draw[3] = 0;
            });
        },
        1);
    sorter.encode_pad(enc);
    for (std::uint32_t pass = 0; pass < gpu::kRadixPasses; ++pass) {
        sorter.encode_histogram(enc, pass);
        sorter.encode_scan(enc);
        sorter.encode_scatter(enc, pass);
    }
    stamp(enc, 2);

    enc.clear_texture(r.target, options_.background);
    enc.draw_indirect(r.target, gpu::make_splat_pipeline(r.visible, sorter.payload(), r.uniforms), r.draw_args, 0);
    stamp(enc, 3);
    const std::uint32_t pitch_words = readback_row_pitch_bytes(viewport_.width) / 4;
    if (readback) enc.copy_texture_to_buffer(r.target, r.readback, pitch_words);
    d.submit(enc);

    FrameStats stats;
    stats.visible_count = d.read_buffer(r.visible.counter, 0, 1)[0];
    if (readback) {
        const auto rows = d.read_buffer(r.readback);
        readback->width = viewport_.width;
        readback->height = viewport_.height;
        readback->pixels.resize(static_cast<std::size_t>(viewport_.width) * viewport_.height);
        for (std::uint32_t y = 0; y < viewport_.height; ++y) {
            std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(y) * pitch_words, viewport_.width,
                        readback->pixels.begin() + static_cast<std::ptrdiff_t>(y) * viewport_.width);
        }
    }
    if (timestamps) {
        std::vector<std::uint32_t> resolved(2 * kTimestampQueries);
        for (std::uint32_t i = 0; i < kTimestampQueries; ++i) {
            resolved[2 * i] = static_cast<std::uint32_t>(queries.value(i));
            resolved[2 * i + 1] = static_cast<std::uint32_t>(queries.value(i) >> 32);
        }
        d.write_buffer(r.timestamps, 0, resolved);
        stats.preprocess_ms = ns_to_ms(queries.value(0), queries.value(1));
        stats.sort_ms = ns_to_ms(queries.value(1), queries.value(2));
        stats.render_ms = ns_to_ms(queries.value(2), queries.value(3));
        stats.timestamp_valid = true;
    }
    stats.total_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - host_start).count();
    return stats;
}

} // namespace splat
