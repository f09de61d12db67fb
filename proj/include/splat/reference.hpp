#pragma once

#include "splat/camera.hpp"
#include "splat/render_flags.hpp"
#include "splat/scene.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

/// Double-precision CPU implementation of every pipeline stage. The GPU
/// kernels are tested against these functions.
namespace splat::reference {

using Covariance3 = Eigen::Matrix3d;
using Covariance2 = Eigen::Matrix2d;

struct EllipseAxes {
    Eigen::Vector2d major = Eigen::Vector2d::Zero();
    Eigen::Vector2d minor = Eigen::Vector2d::Zero();
};

struct ScreenAabb {
    Eigen::Vector2d min = Eigen::Vector2d::Zero();
    Eigen::Vector2d max = Eigen::Vector2d::Zero();
};

struct Projection {
    Covariance2 cov = Covariance2::Zero();
    Eigen::Vector2d center_px = Eigen::Vector2d::Zero();
    double view_depth = 0.0;
};

/// Low-pass dilation added to the projected covariance diagonal (px^2).
constexpr double kDilation = 0.3;
constexpr double kAlphaFloor = 1.0 / 255.0;

/// rotation is (w, x, y, z), unit length; returns R S S^T R^T.
Covariance3 covariance3d(const Eigen::Vector4d& rotation, const Eigen::Vector3d& scale);

/// EWA projection. Throws Error(BehindCamera) when the view depth <= near.
Projection project_covariance(const Covariance3& cov, const Eigen::Vector3d& position, const Camera& camera);

/// Axes scaled by sqrt(2 lambda): a point u*a1 + v*a2 has Mahalanobis
/// half-distance u^2 + v^2. Isotropic input yields major = +x.
/// Throws Error(NonPositiveDefinite).
EllipseAxes eigen_axes(const Covariance2& cov);

/// sqrt(ln(255 sigma)), or nullopt when sigma < 1/255 (culled).
std::optional<double> quad_radius(double sigma);

ScreenAabb screen_aabb(const Eigen::Vector2d& center, const EllipseAxes& axes, double r);

/// Closed-interval test against [0, w] x [0, h].
bool cull_keep(const ScreenAabb& box, Viewport viewport);

/// Real SH up to degree 3 plus the 0.5 offset, unclamped. coeffs is
/// coefficient-major (k * 3 + channel) with at least (degree+1)^2 entries.
Eigen::Vector3d eval_sh(std::span<const double> coeffs, const Eigen::Vector3d& direction, int degree);
Eigen::Vector3d eval_sh(std::span<const float> coeffs, const Eigen::Vector3d& direction, int degree);

struct Fragment {
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    double alpha = 0.0;
};

struct CompositeResult {
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    double alpha = 0.0;
};

/// Transmittance below which composite() stops early when enabled.
constexpr double kEarlyOutTransmittance = 1e-4;

/// Front-to-back sum C = sum c_i a_i prod_{j<i} (1 - a_j).
CompositeResult composite(std::span<const Fragment> front_to_back, bool early_out = false);

/// Stable ascending sort of (key, payload). Throws Error(LengthMismatch).
std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>
stable_sort_oracle(std::span<const std::uint32_t> keys, std::span<const std::uint32_t> payload);

enum class AxisMode { Exact, Half };

struct ReferenceImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<float> rgba; // row-major, 4 floats per pixel, linear

    float at(std::uint32_t x, std::uint32_t y, int channel) const {
        return rgba[(static_cast<std::size_t>(y) * width + x) * 4 + static_cast<std::size_t>(channel)];
    }
};

struct RasterOptions {
    RenderFlags flags{};
    AxisMode axis_mode = AxisMode::Exact;
    std::array<float, 4> background{0.0f, 0.0f, 0.0f, 0.0f};
};

/// Per-splat result of the reference pre-processing stage.
struct SplatGeometry {
    std::uint32_t source_index = 0;
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    EllipseAxes axes{};
    double depth = 0.0;
    std::uint32_t color_packed = 0; // RGBA8, A = quantized opacity
    double radius = 0.0;
};

/// Project, cull and shade every splat in double precision; survivors in
/// source order.
std::vector<SplatGeometry> preprocess(const Scene& scene, const Camera& camera, const RenderFlags& flags);

/// Full software render: preprocess, sort far-to-near, rasterize quads and
/// over-blend in double precision.
ReferenceImage rasterize_reference(const Scene& scene, const Camera& camera, const RasterOptions& options = {});

/// Survivor set of the pre-processing cull evaluated in binary32 with the
/// operation order documented in docs/LAYOUTS.md. Sorted source indices.
std::vector<std::uint32_t> survivors_f32(const Scene& scene, const Camera& camera, const RenderFlags& flags);

/// PSNR in dB over the RGB channels of two images on a [0, 1] scale.
double psnr(std::span<const float> a_rgba, std::span<const float> b_rgba);

} // namespace splat::reference
