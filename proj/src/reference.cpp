#include "splat/reference.hpp"

#include "splat/error.hpp"
#include "splat/packing.hpp"
#include "splat/sh_constants.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace splat::reference {

Covariance3 covariance3d(const Eigen::Vector4d& q, const Eigen::Vector3d& scale) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    const Eigen::Matrix3d m = r * scale.asDiagonal();
    Covariance3 cov = m * m.transpose();
    // exact symmetry
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) cov(j, i) = cov(i, j);
    }
    return cov;
}

Projection project_covariance(const Covariance3& cov, const Eigen::Vector3d& position, const Camera& camera) {
    const Eigen::Vector4d t = camera.view() * position.homogeneous();
    const double depth = -t.z();
    if (!(depth > camera.near_plane())) throw Error(Errc::BehindCamera, "view depth <= near plane");

    const Focal f = focal(camera);
    const double inv = 1.0 / depth;
    // Pixel coords: u = w/2 + fx x/d, v = h/2 - fy y/d with d = -z.
    Eigen::Matrix<double, 2, 3> jac;
    jac << f.fx * inv, 0.0, f.fx * t.x() * inv * inv, 0.0, -f.fy * inv, -f.fy * t.y() * inv * inv;
    const Eigen::Matrix<double, 2, 3> tm = jac * camera.view().topLeftCorner<3, 3>();

    Projection p;
    p.cov = tm * cov * tm.transpose();
    p.cov(1, 0) = p.cov(0, 1);
    p.cov(0, 0) += kDilation;
    p.cov(1, 1) += kDilation;
    p.center_px = {0.5 * camera.viewport().width + f.fx * t.x() * inv,
                   0.5 * camera.viewport().height - f.fy * t.y() * inv};
    p.view_depth = depth;
    return p;
}

EllipseAxes eigen_axes(const Covariance2& cov) {
    const double a = cov(0, 0), b = cov(0, 1), c = cov(1, 1);
    const double m = 0.5 * (a + c);
    const double det = a * c - b * b;
    const double disc = std::sqrt(std::max(m * m - det, 0.0));
    const double l1 = m + disc;
    const double l2 = m - disc;
    if (!(l2 > 0.0) || !std::isfinite(l1)) throw Error(Errc::NonPositiveDefinite, "covariance is not PD");

    Eigen::Vector2d e1;
    if (b == 0.0) {
        e1 = a >= c ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, 1.0);
    } else if (a >= c) {
        e1 = Eigen::Vector2d(l1 - c, b).normalized();
    } else {
        e1 = Eigen::Vector2d(b, l1 - a).normalized();
    }
    const Eigen::Vector2d e2(-e1.y(), e1.x());
    return {e1 * std::sqrt(2.0 * l1), e2 * std::sqrt(2.0 * l2)};
}

std::optional<double> quad_radius(double sigma) {
    if (!(sigma >= kAlphaFloor)) return std::nullopt;
    return std::sqrt(std::max(std::log(255.0 * sigma), 0.0));
}

ScreenAabb screen_aabb(const Eigen::Vector2d& center, const EllipseAxes& axes, double r) {
    const Eigen::Vector2d ext = r * (axes.major.cwiseAbs() + axes.minor.cwiseAbs());
    return {center - ext, center + ext};
}

bool cull_keep(const ScreenAabb& box, Viewport viewport) {
    return box.max.x() >= 0.0 && box.min.x() <= static_cast<double>(viewport.width) && box.max.y() >= 0.0 &&
           box.min.y() <= static_cast<double>(viewport.height);
}

namespace {

template <typename T>
Eigen::Vector3d eval_sh_impl(std::span<const T> sh, const Eigen::Vector3d& d, int degree) {
    if (degree < 0 || degree > kMaxShDegree) throw Error(Errc::InvalidSpec, "SH degree must be 0..3");
    if (sh.size() < static_cast<std::size_t>(3 * sh_coeff_count(degree)))
        throw Error(Errc::LengthMismatch, "too few SH coefficients for degree");
    auto k = [&](int idx) {
        return Eigen::Vector3d(static_cast<double>(sh[idx * 3]), static_cast<double>(sh[idx * 3 + 1]),
                               static_cast<double>(sh[idx * 3 + 2]));
    };
    Eigen::Vector3d result = kShC0 * k(0);
    if (degree >= 1) {
        const double x = d.x(), y = d.y(), z = d.z();
        result += -kShC1 * y * k(1) + kShC1 * z * k(2) - kShC1 * x * k(3);
        if (degree >= 2) {
            const double xx = x * x, yy = y * y, zz = z * z;
            const double xy = x * y, yz = y * z, xz = x * z;
            result += kShC2[0] * xy * k(4) + kShC2[1] * yz * k(5) + kShC2[2] * (2.0 * zz - xx - yy) * k(6) +
                      kShC2[3] * xz * k(7) + kShC2[4] * (xx - yy) * k(8);
            if (degree >= 3) {
                result += kShC3[0] * y * (3.0 * xx - yy) * k(9) + kShC3[1] * xy * z * k(10) +
                          kShC3[2] * y * (4.0 * zz - xx - yy) * k(11) +
                          kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * k(12) +
                          kShC3[4] * x * (4.0 * zz - xx - yy) * k(13) + kShC3[5] * z * (xx - yy) * k(14) +
                          kShC3[6] * x * (xx - 3.0 * yy) * k(15);
            }
        }
    }
    return result + Eigen::Vector3d::Constant(0.5);
}

} // namespace

Eigen::Vector3d eval_sh(std::span<const double> coeffs, const Eigen::Vector3d& direction, int degree) {
    return eval_sh_impl(coeffs, direction, degree);
}

Eigen::Vector3d eval_sh(std::span<const float> coeffs, const Eigen::Vector3d& direction, int degree) {
    return eval_sh_impl(coeffs, direction, degree);
}

CompositeResult composite(std::span<const Fragment> front_to_back, bool early_out) {
    CompositeResult out;
    double transmittance = 1.0;
    for (const auto& frag : front_to_back) {
        out.color += frag.color * frag.alpha * transmittance;
        transmittance *= 1.0 - frag.alpha;
        if (early_out && transmittance < kEarlyOutTransmittance) break;
    }
    out.alpha = 1.0 - transmittance;
    return out;
}

std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>
stable_sort_oracle(std::span<const std::uint32_t> keys, std::span<const std::uint32_t> payload) {
    if (keys.size() != payload.size()) throw Error(Errc::LengthMismatch, "keys and payload differ in length");
    std::vector<std::size_t> order(keys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> out;
    out.first.reserve(keys.size());
    out.second.reserve(keys.size());
    for (auto i : order) {
        out.first.push_back(keys[i]);
        out.second.push_back(payload[i]);
    }
    return out;
}

std::vector<SplatGeometry> preprocess(const Scene& scene, const Camera& camera, const RenderFlags& flags) {
    std::vector<SplatGeometry> out;
    const Eigen::Vector3d cam_pos = camera.position();
    const double r_max = std::sqrt(std::log(255.0));
    const auto gaussians = scene.gaussians();
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        const Gaussian& g = gaussians[i];
        const Eigen::Vector3d p(g.position[0], g.position[1], g.position[2]);
        const double depth = -(camera.view() * p.homogeneous()).z();
        if (!(depth > camera.near_plane())) continue;
        if (!quad_radius(g.opacity)) continue;

        const Covariance3 cov = covariance3d(
            Eigen::Vector4d(g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]),
            Eigen::Vector3d(g.scale[0], g.scale[1], g.scale[2]));
        const Projection proj = project_covariance(cov, p, camera);
        EllipseAxes axes;
        try {
            axes = eigen_axes(proj.cov);
        } catch (const Error&) {
            continue;
        }
        const std::uint32_t alpha_byte = quantize_unorm8(g.opacity);
        const double r = flags.no_radius ? r_max : std::sqrt(std::log(static_cast<double>(alpha_byte)));
        const ScreenAabb box = screen_aabb(proj.center_px, axes, r);
        if (!box.min.allFinite() || !box.max.allFinite()) continue;
        if (!flags.no_cull && !cull_keep(box, camera.viewport())) continue;

        Eigen::Vector3d dir = (p - cam_pos).normalized();
        if (flags.sh_direction == ShDirection::SplatToCamera) dir = -dir;
        const Eigen::Vector3d rgb = eval_sh(std::span<const float>(g.sh), dir, scene.sh_degree());

        SplatGeometry s;
        s.source_index = static_cast<std::uint32_t>(i);
        s.center = proj.center_px;
        s.axes = axes;
        s.depth = depth;
        s.color_packed = pack_rgba8(static_cast<float>(rgb.x()), static_cast<float>(rgb.y()),
                                    static_cast<float>(rgb.z()), g.opacity);
        s.radius = r;
        out.push_back(s);
    }
    return out;
}

namespace {

Eigen::Vector2d half_round(const Eigen::Vector2d& v) {
    const auto back = unpack_half2(pack_half2(static_cast<float>(v.x()), static_cast<float>(v.y())));
    return {back[0], back[1]};
}

} // namespace

ReferenceImage rasterize_reference(const Scene& scene, const Camera& camera, const RasterOptions& options) {
    const Viewport vp = camera.viewport();
    ReferenceImage img;
    img.width = vp.width;
    img.height = vp.height;

    std::vector<double> accum(static_cast<std::size_t>(vp.width) * vp.height * 4);
    for (std::size_t i = 0; i < accum.size(); i += 4) {
        for (int c = 0; c < 4; ++c) accum[i + c] = options.background[c];
    }

    const auto splats = preprocess(scene, camera, options.flags);
    std::vector<std::uint32_t> keys(splats.size());
    std::vector<std::uint32_t> slots(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        keys[i] = depth_key(static_cast<float>(splats[i].depth));
        slots[i] = static_cast<std::uint32_t>(i);
    }
    const auto order = stable_sort_oracle(keys, slots).second; // far to near

    for (auto slot : order) {
        const SplatGeometry& s = splats[slot];
        EllipseAxes axes = s.axes;
        Eigen::Vector2d center = s.center;
        if (options.axis_mode == AxisMode::Half) {
            axes.major = half_round(axes.major);
            axes.minor = half_round(axes.minor);
            center = center.cast<float>().cast<double>();
        }
        const double r = s.radius;
        Eigen::Matrix2d basis;
        basis.col(0) = axes.major;
        basis.col(1) = axes.minor;
        const double det = basis.determinant();
        if (r <= 0.0 || det == 0.0 || !std::isfinite(det)) continue;
        const Eigen::Matrix2d inv = basis.inverse();

        const auto rgba = unpack_rgba8(s.color_packed);
        const double sigma_q = static_cast<double>(s.color_packed >> 24) / 255.0;
        const ScreenAabb box = screen_aabb(center, axes, r);
        const double x0 = std::max(std::ceil(box.min.x() - 0.5), 0.0);
        const double x1 = std::min(std::floor(box.max.x() - 0.5), static_cast<double>(vp.width) - 1.0);
        const double y0 = std::max(std::ceil(box.min.y() - 0.5), 0.0);
        const double y1 = std::min(std::floor(box.max.y() - 0.5), static_cast<double>(vp.height) - 1.0);
        for (double py = y0; py <= y1; py += 1.0) {
            for (double px = x0; px <= x1; px += 1.0) {
                const Eigen::Vector2d local = inv * (Eigen::Vector2d(px + 0.5, py + 0.5) - center);
                if (std::abs(local.x()) > r || std::abs(local.y()) > r) continue;
                const double alpha = sigma_q * std::exp(-local.squaredNorm());
                if (alpha < kAlphaFloor) continue;
                const std::size_t idx =
                    (static_cast<std::size_t>(py) * vp.width + static_cast<std::size_t>(px)) * 4;
                for (int c = 0; c < 3; ++c) accum[idx + c] = rgba[c] * alpha + accum[idx + c] * (1.0 - alpha);
                accum[idx + 3] = alpha + accum[idx + 3] * (1.0 - alpha);
            }
        }
    }
    img.rgba.assign(accum.begin(), accum.end());
    return img;
}

double psnr(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size() || a.size() % 4 != 0) throw Error(Errc::LengthMismatch, "image sizes differ");
    if (a.empty()) return std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); i += 4) {
        for (int c = 0; c < 3; ++c) {
            const double d = static_cast<double>(a[i + c]) - static_cast<double>(b[i + c]);
            sum += d * d;
        }
    }
    const double mse = sum / static_cast<double>(a.size() / 4 * 3);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

} // namespace splat::reference
