#pragma once

namespace splat {

/// Which way the SH view direction points. The default follows the
/// camera-to-splat convention; the other is offered for comparison with
/// renderers that use splat-to-camera.
enum class ShDirection { CameraToSplat, SplatToCamera };

struct RenderFlags {
    /// -CULL ablation: keep only the center-depth frustum test.
    bool no_cull = false;
    /// -RADIUS ablation: every quad uses r_max = sqrt(ln 255).
    bool no_radius = false;
    ShDirection sh_direction = ShDirection::CameraToSplat;
};

} // namespace splat
