#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace splat {

constexpr int kMaxShDegree = 3;
constexpr int kMaxShCoeffs = (kMaxShDegree + 1) * (kMaxShDegree + 1);

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Number of f_rest_* properties for an SH degree: 3 * ((d+1)^2 - 1).
constexpr int sh_rest_count(int degree) { return 3 * (sh_coeff_count(degree) - 1); }

using Vec3f = std::array<float, 3>;
using Quatf = std::array<float, 4>; // w, x, y, z

/// One splat record exactly as stored in a 3DGS PLY file (pre-activation).
struct RawGaussian {
    Vec3f position{};
    Vec3f normal{};
    Vec3f f_dc{};
    std::vector<float> f_rest; // K entries, channel-major
    float opacity_raw = 0.0f;
    Vec3f scale_raw{};
    Quatf rot_raw{1.0f, 0.0f, 0.0f, 0.0f};
};

/// An activated splat. SH coefficients are coefficient-major:
/// sh[k * 3 + c] is coefficient k of channel c, k < (degree+1)^2.
struct Gaussian {
    Vec3f position{};
    Quatf rotation{1.0f, 0.0f, 0.0f, 0.0f};
    Vec3f scale{1.0f, 1.0f, 1.0f};
    float opacity = 0.5f;
    std::array<float, 3 * kMaxShCoeffs> sh{};
};

struct Aabb3 {
    Vec3f min{};
    Vec3f max{};
};

class Scene {
  public:
    Scene() = default;
    Scene(std::vector<Gaussian> gaussians, int sh_degree);

    std::span<const Gaussian> gaussians() const noexcept { return gaussians_; }
    std::size_t count() const noexcept { return gaussians_.size(); }
    bool empty() const noexcept { return gaussians_.empty(); }
    int sh_degree() const noexcept { return sh_degree_; }
    const Aabb3& world_aabb() const noexcept { return aabb_; }

    /// Scene with the gaussians reordered by `order` (a permutation of indices).
    Scene permuted(std::span<const std::uint32_t> order) const;

  private:
    std::vector<Gaussian> gaussians_;
    int sh_degree_ = 0;
    Aabb3 aabb_{};
};

Gaussian activate(const RawGaussian& raw, int sh_degree);

/// Inverse of activate(); used by write_ply.
RawGaussian deactivate(const Gaussian& g, int sh_degree);

struct PlyOptions {
    /// Drop records with non-finite fields instead of rejecting the file.
    bool skip_bad = false;
};

struct PlyLoad {
    Scene scene;
    std::size_t declared = 0;
    std::size_t skipped = 0;
};

PlyLoad load_ply(std::span<const std::byte> bytes, const PlyOptions& options = {});

inline Scene parse_ply(std::span<const std::byte> bytes, const PlyOptions& options = {}) {
    return load_ply(bytes, options).scene;
}

std::vector<std::byte> write_ply(const Scene& scene);

PlyLoad read_ply_file(const std::string& path, const PlyOptions& options = {});
void write_ply_file(const std::string& path, const Scene& scene);

struct SynthSpec {
    Vec3f extent_min{-1.0f, -1.0f, -1.0f};
    Vec3f extent_max{1.0f, 1.0f, 1.0f};
    float scale_min = 0.01f; // world units, sampled uniformly per axis
    float scale_max = 0.05f;
    float opacity_min = 0.05f;
    float opacity_max = 0.95f;
    float sh_amplitude = 1.0f;
    int sh_degree = 0;
};

/// Deterministic synthetic scene. Uses the counter-based generator below, so
/// the same (seed, n, spec) yields identical bytes on every platform.
Scene synth_scene(std::uint64_t seed, std::size_t n, const SynthSpec& spec = {});

/// SplitMix64 finalizer applied to (seed, stream, counter). Stateless, so any
/// element can be generated independently.
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;

/// Uniform float in [0, 1) built from the top 24 bits of counter_hash.
float counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;

} // namespace splat
