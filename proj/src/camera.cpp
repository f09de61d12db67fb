#include "splat/camera.hpp"

#include "splat/error.hpp"

#include <json.hpp>

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace splat {

Camera::Camera(const Eigen::Matrix4d& view, double fov_y, Viewport viewport, double near_plane,
               double far_plane)
    : view_(view), fov_y_(fov_y), viewport_(viewport), near_(near_plane), far_(far_plane) {
    if (!(near_ > 0.0 && near_ < far_)) throw Error(Errc::InvalidCamera, "require 0 < near < far");
    if (viewport.width < 1 || viewport.height < 1)
        throw Error(Errc::InvalidCamera, "viewport dimensions must be >= 1");
    if (!(fov_y_ >= kMinFovY && fov_y_ < std::numbers::pi))
        throw Error(Errc::InvalidCamera, "fov_y must lie in [1e-4, pi)");
    const Eigen::Matrix3d r = view_.topLeftCorner<3, 3>();
    if (!(r.transpose() * r).isApprox(Eigen::Matrix3d::Identity(), 1e-5) || !view_.allFinite())
        throw Error(Errc::InvalidCamera, "view matrix is not rigid");
}

Eigen::Vector3d Camera::position() const {
    const Eigen::Matrix3d r = view_.topLeftCorner<3, 3>();
    return -r.transpose() * view_.topRightCorner<3, 1>();
}

Eigen::Matrix4d look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up) {
    const Eigen::Vector3d dir = target - position;
    if (!(dir.norm() > 0.0)) throw Error(Errc::DegenerateFrame, "position equals target");
    const Eigen::Vector3d forward = dir.normalized();
    const Eigen::Vector3d side = forward.cross(up);
    if (!(side.norm() > 1e-9 * std::max(1.0, up.norm())))
        throw Error(Errc::DegenerateFrame, "up is parallel to the viewing direction");
    const Eigen::Vector3d right = side.normalized();
    const Eigen::Vector3d true_up = right.cross(forward);

    Eigen::Matrix4d view = Eigen::Matrix4d::Identity();
    view.block<1, 3>(0, 0) = right.transpose();
    view.block<1, 3>(1, 0) = true_up.transpose();
    view.block<1, 3>(2, 0) = -forward.transpose();
    view(0, 3) = -right.dot(position);
    view(1, 3) = -true_up.dot(position);
    view(2, 3) = forward.dot(position);
    return view;
}

Focal focal(const Camera& camera) {
    const double fy = camera.viewport().height / (2.0 * std::tan(camera.fov_y() / 2.0));
    return {fy, fy};
}

Camera sample_path(const CameraPath& path, std::uint32_t frame_index, Viewport viewport, double near_plane,
                   double far_plane) {
    if (path.keyframes.empty() || path.frame_count < 1)
        throw Error(Errc::InvalidCamera, "camera path needs >= 1 keyframe and frame_count >= 1");
    if (frame_index >= path.frame_count)
        throw Error(Errc::IndexOutOfRange, "frame " + std::to_string(frame_index) + " of " +
                                               std::to_string(path.frame_count));

    const auto& keys = path.keyframes;
    Keyframe k = keys.front();
    if (keys.size() > 1 && path.frame_count > 1) {
        // Keyframe j sits at frame j * (frame_count - 1) / (keys - 1).
        const double segments = static_cast<double>(keys.size() - 1);
        const double t = static_cast<double>(frame_index) * segments / static_cast<double>(path.frame_count - 1);
        auto seg = static_cast<std::size_t>(std::floor(t));
        if (seg >= keys.size() - 1) seg = keys.size() - 2;
        const double w = t - static_cast<double>(seg);
        const Keyframe& a = keys[seg];
        const Keyframe& b = keys[seg + 1];
        if (w == 0.0) {
            k = a;
        } else if (w == 1.0) {
            k = b;
        } else {
            k.position = a.position + w * (b.position - a.position);
            k.target = a.target + w * (b.target - a.target);
            k.up = a.up + w * (b.up - a.up);
            k.fov_y_deg = a.fov_y_deg + w * (b.fov_y_deg - a.fov_y_deg);
        }
    }
    const double up_norm = k.up.norm();
    if (!(up_norm > 0.0)) throw Error(Errc::DegenerateFrame, "interpolated up vector vanished");
    const Eigen::Matrix4d view = look_at(k.position, k.target, k.up / up_norm);
    return Camera(view, k.fov_y_deg * std::numbers::pi / 180.0, viewport, near_plane, far_plane);
}

namespace {

Eigen::Vector3d vec3_from(const nlohmann::json& j, const char* field) {
    const auto& v = j.at(field);
    if (!v.is_array() || v.size() != 3) throw Error(Errc::InvalidCamera, std::string(field) + " must be [x,y,z]");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

} // namespace

CameraPath parse_camera_path(const std::string& json_text) {
    CameraPath path;
    try {
        const auto j = nlohmann::json::parse(json_text);
        const auto frames = j.value("frame_count", 1);
        if (frames < 1) throw Error(Errc::InvalidCamera, "frame_count must be >= 1");
        path.frame_count = static_cast<std::uint32_t>(frames);
        for (const auto& kj : j.at("keyframes")) {
            Keyframe k;
            k.position = vec3_from(kj, "position");
            k.target = vec3_from(kj, "target");
            k.up = kj.contains("up") ? vec3_from(kj, "up") : Eigen::Vector3d::UnitY();
            k.fov_y_deg = kj.value("fov_y_deg", 60.0);
            path.keyframes.push_back(k);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidCamera, std::string("camera JSON: ") + e.what());
    }
    if (path.keyframes.empty()) throw Error(Errc::InvalidCamera, "camera path has no keyframes");
    return path;
}

CameraPath read_camera_path_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::FileError, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_camera_path(ss.str());
}

std::string camera_path_to_json(const CameraPath& path) {
    nlohmann::json j;
    j["frame_count"] = path.frame_count;
    j["keyframes"] = nlohmann::json::array();
    for (const auto& k : path.keyframes) {
        j["keyframes"].push_back({{"position", {k.position.x(), k.position.y(), k.position.z()}},
                                  {"target", {k.target.x(), k.target.y(), k.target.z()}},
                                  {"up", {k.up.x(), k.up.y(), k.up.z()}},
                                  {"fov_y_deg", k.fov_y_deg}});
    }
    return j.dump(2);
}

} // namespace splat
