#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace splat {

struct Viewport {
    std::uint32_t width = 1;
    std::uint32_t height = 1;
};

/// Pinhole camera. World is right-handed; in view space the camera looks
/// down -z with +y up. Pixel coordinates put (0,0) at the top-left corner
/// and grow right/down; pixel centers sit at half-integers.
class Camera {
  public:
    Camera() = default;
    Camera(const Eigen::Matrix4d& view, double fov_y, Viewport viewport, double near_plane = 0.01,
           double far_plane = 1000.0);

    const Eigen::Matrix4d& view() const noexcept { return view_; }
    double fov_y() const noexcept { return fov_y_; }
    Viewport viewport() const noexcept { return viewport_; }
    double near_plane() const noexcept { return near_; }
    double far_plane() const noexcept { return far_; }

    /// Camera center in world coordinates.
    Eigen::Vector3d position() const;

  private:
    Eigen::Matrix4d view_ = Eigen::Matrix4d::Identity();
    double fov_y_ = 1.0;
    Viewport viewport_{};
    double near_ = 0.01;
    double far_ = 1000.0;
};

constexpr double kMinFovY = 1e-4;

/// World-to-view rigid transform; the target ends up on the -z axis.
Eigen::Matrix4d look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up);

struct Focal {
    double fx = 0.0;
    double fy = 0.0;
};

/// fy = height / (2 tan(fov_y / 2)), fx = fy.
Focal focal(const Camera& camera);

struct Keyframe {
    Eigen::Vector3d position = Eigen::Vector3d(0, 0, 5);
    Eigen::Vector3d target = Eigen::Vector3d::Zero();
    Eigen::Vector3d up = Eigen::Vector3d::UnitY();
    double fov_y_deg = 60.0;
};

struct CameraPath {
    std::vector<Keyframe> keyframes;
    std::uint32_t frame_count = 1;
};

/// Linear interpolation of position/target/up/fov across keyframes spread
/// evenly over [0, frame_count - 1]; the up vector is renormalized.
Camera sample_path(const CameraPath& path, std::uint32_t frame_index, Viewport viewport,
                   double near_plane = 0.01, double far_plane = 1000.0);

CameraPath parse_camera_path(const std::string& json_text);
CameraPath read_camera_path_file(const std::string& path);
std::string camera_path_to_json(const CameraPath& path);

} // namespace splat
