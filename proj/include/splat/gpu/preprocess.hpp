#pragma once

#include "splat/camera.hpp"
#include "splat/gpu/device.hpp"
#include "splat/render_flags.hpp"
#include "splat/scene.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace splat::gpu {

/// Packed per-frame splat, 6 words (24 bytes):
///   0-1 center_px (f32 x, f32 y)
///   2   major axis as half2, 3 minor axis as half2 (x in the low 16 bits)
///   4   RGBA8 color, A = quantized opacity
///   5   reserved, always 0 (keeps the record 8-byte aligned)
struct ProjectedSplat {
    std::array<float, 2> center{};
    std::array<std::uint32_t, 2> axes{};
    std::uint32_t color = 0;
};

inline constexpr std::uint32_t kProjectedWords = 6;

ProjectedSplat load_projected(const BufferView& buffer, std::uint64_t slot) noexcept;
void store_projected(const BufferView& buffer, std::uint64_t slot, const ProjectedSplat& splat) noexcept;

/// Splat count and SH degree, enough to size every buffer.
struct SceneLayout {
    std::uint64_t count = 0;
    int sh_degree = 0;
};

/// Structure-of-arrays scene storage, words per splat:
/// positions 3, rotations 4 (w,x,y,z), scales 3, opacities 1,
/// sh 3 * (degree+1)^2 (coefficient-major, only the declared degree).
class SceneBuffers {
  public:
    SceneBuffers() = default;
    /// Zero-filled buffers sized for `layout`.
    SceneBuffers(Device& device, SceneLayout layout);

    static SceneBuffers upload(Device& device, const Scene& scene);
    /// Bytes upload() accounts for `layout`.
    static std::uint64_t bytes(SceneLayout layout) noexcept;

    const SceneLayout& layout() const noexcept { return layout_; }
    const Buffer& positions() const noexcept { return positions_; }
    const Buffer& rotations() const noexcept { return rotations_; }
    const Buffer& scales() const noexcept { return scales_; }
    const Buffer& opacities() const noexcept { return opacities_; }
    const Buffer& sh() const noexcept { return sh_; }
    std::vector<Buffer> buffers() const { return {positions_, rotations_, scales_, opacities_, sh_}; }

  private:
    SceneLayout layout_{};
    Buffer positions_, rotations_, scales_, opacities_, sh_;
};

/// Per-frame uniform block, one 32-bit word each.
namespace uniform {
inline constexpr std::uint32_t kView = 0; // 16 words, row-major f32
inline constexpr std::uint32_t kFx = 16;
inline constexpr std::uint32_t kFy = 17;
inline constexpr std::uint32_t kWidth = 18;
inline constexpr std::uint32_t kHeight = 19;
inline constexpr std::uint32_t kNear = 20;
inline constexpr std::uint32_t kCameraPosition = 21; // 3 words f32
inline constexpr std::uint32_t kFlags = 24;
inline constexpr std::uint32_t kCount = 25;
inline constexpr std::uint32_t kShDegree = 26;
inline constexpr std::uint32_t kWords = 28;

inline constexpr std::uint32_t kFlagNoCull = 1u << 0;
inline constexpr std::uint32_t kFlagNoRadius = 1u << 1;
inline constexpr std::uint32_t kFlagShSplatToCamera = 1u << 2;
} // namespace uniform

std::vector<std::uint32_t> make_uniforms(const Camera& camera, SceneLayout layout, const RenderFlags& flags);

/// Binary32 copy of the uniform block as the kernel sees it.
struct FrameConstants {
    std::array<float, 16> view{}; // row-major
    float fx = 0, fy = 0, width = 0, height = 0, near_plane = 0;
    std::array<float, 3> camera{};
    std::uint32_t flags = 0;
    std::uint32_t count = 0;
    int sh_degree = 0;
};

FrameConstants read_frame_constants(const BufferView& uniforms) noexcept;
FrameConstants frame_constants(const Camera& camera, SceneLayout layout, const RenderFlags& flags);

/// Attributes of one splat as loaded from the scene buffers.
struct SplatInput {
    std::array<float, 3> position{};
    std::array<float, 4> rotation{1, 0, 0, 0}; // w, x, y, z
    std::array<float, 3> scale{1, 1, 1};
    float opacity = 1.0f;
    std::span<const float> sh; // 3 * (degree+1)^2, coefficient-major
};

/// Intermediate binary32 values of the per-splat math.
struct SplatMath {
    float depth = 0;
    std::array<float, 6> cov3{};   // xx, xy, xz, yy, yz, zz
    std::array<float, 3> cov2{};   // a, b, c of [[a, b], [b, c]] incl. dilation
    std::array<float, 2> center{}; // pixels
    std::array<float, 2> major{};
    std::array<float, 2> minor{};
    float radius = 0;
    std::array<float, 3> rgb{}; // unclamped
};

/// Which test removed a splat; Kept for survivors.
enum class CullResult { Kept, Frustum, Opacity, Degenerate, Viewport };

/// The per-splat body of the pre-processing kernel. Fills `out` as far as
/// the splat gets; rgb only for survivors.
CullResult preprocess_splat(const SplatInput& in, const FrameConstants& k, SplatMath& out) noexcept;

/// Real SH (degree <= 3) plus 0.5 in binary32; `dir` is a unit vector.
std::array<float, 3> eval_sh_f32(std::span<const float> sh, int degree, const std::array<float, 3>& dir) noexcept;

/// Output of the pre-processing kernel. The depth keys and slot payloads
/// go straight into the sorter's key/payload arrays.
struct VisibleSet {
    VisibleSet() = default;
    VisibleSet(Device& device, std::uint64_t capacity);

    Buffer splats;       // kProjectedWords per slot
    Buffer source_index; // slot -> scene index
    Buffer counter;      // 1 word, claimed with atomic_fetch_add
};

/// Record the pre-processing dispatch: one invocation per scene splat,
/// ceil(N / 256) workgroups. Survivors claim a slot from the counter and
/// write their ProjectedSplat, depth key (keys[slot]), payload[slot] = slot
/// and source index.
void encode_preprocess(CommandEncoder& encoder, const SceneBuffers& scene, const Buffer& uniforms,
                       const VisibleSet& visible, const Buffer& keys, const Buffer& payload);

} // namespace splat::gpu
