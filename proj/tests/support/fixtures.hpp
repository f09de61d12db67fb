#pragma once

#include "splat/camera.hpp"
#include "splat/gpu/device.hpp"
#include "splat/scene.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fixture {

inline splat::Camera camera_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target, std::uint32_t w,
                               std::uint32_t h, double fov_y = M_PI / 3.0) {
    return splat::Camera(splat::look_at(position, target, Eigen::Vector3d::UnitY()), fov_y, splat::Viewport{w, h});
}

/// Camera on +z looking at the origin.
inline splat::Camera front_camera(std::uint32_t w = 512, std::uint32_t h = 512, double distance = 5.0) {
    return camera_at({0, 0, distance}, {0, 0, 0}, w, h);
}

inline splat::gpu::DeviceDesc serial(splat::gpu::Schedule schedule = splat::gpu::Schedule::InOrder) {
    splat::gpu::DeviceDesc d;
    d.schedule = schedule;
    d.threads = 1;
    return d;
}

inline splat::Gaussian splat_at(float x, float y, float z, float scale, float opacity) {
    splat::Gaussian g;
    g.position = {x, y, z};
    g.scale = {scale, scale, scale};
    g.opacity = opacity;
    return g;
}

/// Sets the band-0 coefficients so that eval gives `rgb` (before clamping).
inline void set_color(splat::Gaussian& g, float r, float gr, float b) {
    const float c0 = 0.28209479177387814f;
    g.sh[0] = (r - 0.5f) / c0;
    g.sh[1] = (gr - 0.5f) / c0;
    g.sh[2] = (b - 0.5f) / c0;
}

/// Cloud of elongated, randomly rotated splats.
inline splat::Scene anisotropic_cloud(std::uint64_t seed, std::size_t n) {
    splat::SynthSpec spec;
    spec.scale_min = 0.002f;
    spec.scale_max = 0.12f;
    spec.sh_degree = 2;
    return splat::synth_scene(seed, n, spec);
}

/// Uniform double in [lo, hi).
struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine); }
    std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine); }
    Eigen::Vector3d unit() {
        Eigen::Vector3d v;
        do {
            v = {uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)};
        } while (v.norm() < 1e-3 || v.norm() > 1.0);
        return v.normalized();
    }
    Eigen::Vector4d quaternion() {
        Eigen::Vector4d q;
        do {
            q = {uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)};
        } while (q.norm() < 1e-3);
        return q.normalized();
    }
};

} // namespace fixture
