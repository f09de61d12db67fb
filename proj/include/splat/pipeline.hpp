#pragma once

#include "splat/camera.hpp"
#include "splat/gpu/device.hpp"
#include "splat/gpu/preprocess.hpp"
#include "splat/gpu/sort.hpp"
#include "splat/render_flags.hpp"
#include "splat/scene.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace splat {

struct FrameStats {
    double preprocess_ms = 0.0;
    double sort_ms = 0.0;
    double render_ms = 0.0;
    double total_ms = 0.0; // host wall clock around the whole frame
    std::uint32_t visible_count = 0;
    bool timestamp_valid = false;
};

/// RGBA8 frame, one word per pixel, R in the low byte, rows top to bottom.
struct Image {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint32_t> pixels;

    std::uint32_t at(std::uint32_t x, std::uint32_t y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct RendererOptions {
    RenderFlags flags{};
    std::array<float, 4> background{0.0f, 0.0f, 0.0f, 0.0f};
};

/// Readback rows are padded to this many bytes.
inline constexpr std::uint32_t kRowPitchAlignment = 256;
std::uint32_t readback_row_pitch_bytes(std::uint32_t width) noexcept;

/// Number of timestamp queries a frame writes (stage boundaries).
inline constexpr std::uint32_t kTimestampQueries = 4;

/// Buffers the renderer allocates for a scene layout and viewport, in
/// allocation order, with the byte count of each.
gpu::MemoryReport plan_memory(gpu::SceneLayout layout, Viewport viewport);

/// Three-stage frame: preprocess -> sort -> instanced-quad raster, sized
/// on the device through indirect dispatch and draw. One frame in flight;
/// not shareable across threads.
class Renderer {
  public:
    /// Uploads `scene`; keeps a host copy for re-initialisation.
    Renderer(gpu::Device& device, Scene scene, Viewport viewport, RendererOptions options = {});
    /// Allocates zero-filled scene buffers only (memory planning); frames
    /// render a zero scene.
    Renderer(gpu::Device& device, gpu::SceneLayout layout, Viewport viewport, RendererOptions options = {});
    ~Renderer();
    Renderer(const Renderer&) = delete;
    Renderer& operator=(const Renderer&) = delete;

    /// Renders one frame. The camera viewport must equal the renderer's.
    /// Throws Error(DeviceLost); call reinitialize() afterwards.
    FrameStats render_frame(const Camera& camera, Image* readback = nullptr);

    /// -CULL / -RADIUS ablations.
    void set_ablation(bool no_cull, bool no_radius) noexcept;
    const RenderFlags& flags() const noexcept { return options_.flags; }
    void set_flags(const RenderFlags& flags) noexcept { options_.flags = flags; }

    /// Recreate every resource on `device` from the retained host scene.
    void reinitialize(gpu::Device& device);

    gpu::MemoryReport memory_report() const;
    gpu::SceneLayout layout() const noexcept { return layout_; }
    Viewport viewport() const noexcept { return viewport_; }
    gpu::Device& device() noexcept { return *device_; }

    /// Device-side buffers exposed for tests.
    const gpu::VisibleSet& visible() const noexcept;
    const gpu::RadixSorter& sorter() const noexcept;
    const gpu::Buffer& draw_args() const noexcept;

  private:
    struct Resources;
    void allocate();

    gpu::Device* device_;
    std::optional<Scene> scene_;
    gpu::SceneLayout layout_;
    Viewport viewport_;
    RendererOptions options_;
    std::unique_ptr<Resources> res_;
};

} // namespace splat
