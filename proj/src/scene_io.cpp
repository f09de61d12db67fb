#include "splat/scene.hpp"

#include "splat/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>

namespace splat {

namespace {

bool finite3(const Vec3f& v) {
    return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

int degree_from_rest_count(std::size_t k) {
    for (int d = 0; d <= kMaxShDegree; ++d) {
        if (static_cast<std::size_t>(sh_rest_count(d)) == k) return d;
    }
    return -1;
}

std::size_t scalar_size(std::string_view type) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
        type == "float32")
        return 4;
    if (type == "double" || type == "float64") return 8;
    return 0;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

float read_f32_le(const std::byte* p) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | std::to_integer<std::uint32_t>(p[b]);
    return std::bit_cast<float>(bits);
}

void append_f32_le(std::vector<std::byte>& out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::byte>((bits >> (8 * b)) & 0xFFu));
}

struct Layout {
    std::size_t stride = 0;
    std::size_t count = 0;
    std::size_t payload_offset = 0;
    int sh_degree = 0;
    // byte offset of each named float property inside a record
    std::unordered_map<std::string, std::size_t> offsets;
};

Layout parse_header(std::span<const std::byte> bytes) {
    auto text = std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    if (text.size() < 4 || text.substr(0, 3) != "ply" || (text[3] != '\n' && text[3] != '\r'))
        throw Error(Errc::MalformedHeader, "missing 'ply' magic");

    Layout layout;
    std::size_t pos = 0;
    bool saw_format = false;
    bool in_vertex = false;
    bool saw_vertex = false;
    bool done = false;
    std::size_t line_no = 0;
    while (!done) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            throw Error(Errc::MalformedHeader, "header not terminated by end_header");
        auto line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;
        ++line_no;
        if (line_no == 1) continue; // "ply"

        auto tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok[0] == "comment" || tok[0] == "obj_info") continue;
        if (tok[0] == "format") {
            if (tok.size() < 3) throw Error(Errc::MalformedHeader, "bad format line");
            if (tok[1] == "ascii" || tok[1] == "binary_big_endian")
                throw Error(Errc::UnsupportedLayout,
                            "only binary_little_endian is supported, got " + std::string(tok[1]));
            if (tok[1] != "binary_little_endian")
                throw Error(Errc::MalformedHeader, "unknown format " + std::string(tok[1]));
            saw_format = true;
        } else if (tok[0] == "element") {
            if (tok.size() != 3) throw Error(Errc::MalformedHeader, "bad element line");
            if (saw_vertex)
                throw Error(Errc::UnsupportedLayout,
                            "unexpected element '" + std::string(tok[1]) + "' after vertex");
            if (tok[1] != "vertex")
                throw Error(Errc::UnsupportedLayout, "first element must be vertex");
            std::uint64_t n = 0;
            auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), n);
            if (ec != std::errc{} || ptr != tok[2].data() + tok[2].size())
                throw Error(Errc::MalformedHeader, "bad vertex count");
            layout.count = static_cast<std::size_t>(n);
            saw_vertex = true;
            in_vertex = true;
        } else if (tok[0] == "property") {
            if (!in_vertex) throw Error(Errc::MalformedHeader, "property outside element");
            if (tok.size() != 3)
                throw Error(Errc::UnsupportedLayout, "list properties are not supported");
            auto size = scalar_size(tok[1]);
            if (size == 0)
                throw Error(Errc::MalformedHeader, "unknown property type " + std::string(tok[1]));
            std::string name(tok[2]);
            if (size == 4 && (tok[1] == "float" || tok[1] == "float32")) {
                if (!layout.offsets.emplace(name, layout.stride).second)
                    throw Error(Errc::UnsupportedLayout, "duplicate property " + name);
            }
            layout.stride += size;
        } else if (tok[0] == "end_header") {
            done = true;
        } else {
            throw Error(Errc::MalformedHeader, "unexpected header line '" + std::string(line) + "'");
        }
    }
    if (!saw_format) throw Error(Errc::MalformedHeader, "missing format line");
    if (!saw_vertex) throw Error(Errc::MalformedHeader, "missing vertex element");
    layout.payload_offset = pos;

    for (const char* req : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1",
                            "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        if (!layout.offsets.contains(req))
            throw Error(Errc::UnsupportedLayout, std::string("missing float property ") + req);
    }
    std::size_t rest = 0;
    while (layout.offsets.contains("f_rest_" + std::to_string(rest))) ++rest;
    for (const auto& [name, off] : layout.offsets) {
        if (name.starts_with("f_rest_")) {
            int idx = -1;
            std::from_chars(name.data() + 7, name.data() + name.size(), idx);
            if (idx < 0 || static_cast<std::size_t>(idx) >= rest)
                throw Error(Errc::UnsupportedLayout, "non-contiguous f_rest properties");
        }
    }
    layout.sh_degree = degree_from_rest_count(rest);
    if (layout.sh_degree < 0)
        throw Error(Errc::UnsupportedLayout, "illegal f_rest count " + std::to_string(rest));
    return layout;
}

} // namespace

Scene::Scene(std::vector<Gaussian> gaussians, int sh_degree)
    : gaussians_(std::move(gaussians)), sh_degree_(sh_degree) {
    if (sh_degree < 0 || sh_degree > kMaxShDegree)
        throw Error(Errc::InvalidSpec, "sh_degree must be in 0..3");
    if (gaussians_.empty()) return;
    aabb_.min = aabb_.max = gaussians_.front().position;
    for (const auto& g : gaussians_) {
        for (int a = 0; a < 3; ++a) {
            aabb_.min[a] = std::min(aabb_.min[a], g.position[a]);
            aabb_.max[a] = std::max(aabb_.max[a], g.position[a]);
        }
    }
}

Scene Scene::permuted(std::span<const std::uint32_t> order) const {
    if (order.size() != gaussians_.size())
        throw Error(Errc::LengthMismatch, "permutation length differs from scene size");
    std::vector<Gaussian> out;
    out.reserve(order.size());
    for (auto i : order) out.push_back(gaussians_.at(i));
    return Scene(std::move(out), sh_degree_);
}

Gaussian activate(const RawGaussian& raw, int sh_degree) {
    const auto rest = static_cast<std::size_t>(sh_rest_count(sh_degree));
    if (raw.f_rest.size() != rest)
        throw Error(Errc::UnsupportedLayout, "f_rest size does not match SH degree");

    Gaussian g;
    g.position = raw.position;
    g.opacity = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(raw.opacity_raw))));
    for (int a = 0; a < 3; ++a) g.scale[a] = std::exp(raw.scale_raw[a]);

    double norm2 = 0.0;
    for (float c : raw.rot_raw) norm2 += static_cast<double>(c) * c;
    const double norm = std::sqrt(norm2);
    if (!(norm >= 1e-12)) throw Error(Errc::DegenerateRotation, "quaternion norm below 1e-12");
    for (int c = 0; c < 4; ++c) g.rotation[c] = static_cast<float>(raw.rot_raw[c] / norm);

    const int coeffs = sh_coeff_count(sh_degree);
    for (int c = 0; c < 3; ++c) g.sh[c] = raw.f_dc[c];
    // f_rest is channel-major: all higher-band coefficients of R, then G, then B.
    for (int c = 0; c < 3; ++c) {
        for (int k = 1; k < coeffs; ++k) {
            g.sh[k * 3 + c] = raw.f_rest[static_cast<std::size_t>(c * (coeffs - 1) + (k - 1))];
        }
    }
    return g;
}

RawGaussian deactivate(const Gaussian& g, int sh_degree) {
    RawGaussian raw;
    raw.position = g.position;
    const double s = std::clamp(static_cast<double>(g.opacity), 1e-12, 1.0 - 1e-12);
    raw.opacity_raw = static_cast<float>(std::log(s / (1.0 - s)));
    for (int a = 0; a < 3; ++a) raw.scale_raw[a] = std::log(g.scale[a]);
    raw.rot_raw = g.rotation;
    const int coeffs = sh_coeff_count(sh_degree);
    raw.f_rest.resize(static_cast<std::size_t>(sh_rest_count(sh_degree)));
    for (int c = 0; c < 3; ++c) {
        raw.f_dc[c] = g.sh[c];
        for (int k = 1; k < coeffs; ++k) {
            raw.f_rest[static_cast<std::size_t>(c * (coeffs - 1) + (k - 1))] = g.sh[k * 3 + c];
        }
    }
    return raw;
}

PlyLoad load_ply(std::span<const std::byte> bytes, const PlyOptions& options) {
    const Layout layout = parse_header(bytes);
    const std::size_t available = bytes.size() - layout.payload_offset;
    if (layout.stride == 0 || available / layout.stride < layout.count) {
        throw Error(Errc::TruncatedPayload, "payload holds fewer than " + std::to_string(layout.count) +
                                                " records");
    }

    auto off = [&](const std::string& name) { return layout.offsets.at(name); };
    const std::size_t ox = off("x"), oy = off("y"), oz = off("z");
    const std::array<std::size_t, 3> odc{off("f_dc_0"), off("f_dc_1"), off("f_dc_2")};
    const std::array<std::size_t, 3> oscale{off("scale_0"), off("scale_1"), off("scale_2")};
    const std::array<std::size_t, 4> orot{off("rot_0"), off("rot_1"), off("rot_2"), off("rot_3")};
    const std::size_t oopacity = off("opacity");
    const auto rest = static_cast<std::size_t>(sh_rest_count(layout.sh_degree));
    std::vector<std::size_t> orest(rest);
    for (std::size_t k = 0; k < rest; ++k) orest[k] = off("f_rest_" + std::to_string(k));

    PlyLoad result;
    result.declared = layout.count;
    std::vector<Gaussian> gaussians;
    gaussians.reserve(layout.count);
    RawGaussian raw;
    raw.f_rest.resize(rest);
    const std::byte* base = bytes.data() + layout.payload_offset;
    for (std::size_t i = 0; i < layout.count; ++i) {
        const std::byte* rec = base + i * layout.stride;
        raw.position = {read_f32_le(rec + ox), read_f32_le(rec + oy), read_f32_le(rec + oz)};
        bool finite = finite3(raw.position);
        for (int c = 0; c < 3; ++c) {
            raw.f_dc[c] = read_f32_le(rec + odc[c]);
            raw.scale_raw[c] = read_f32_le(rec + oscale[c]);
        }
        for (int c = 0; c < 4; ++c) {
            raw.rot_raw[c] = read_f32_le(rec + orot[c]);
            finite = finite && std::isfinite(raw.rot_raw[c]);
        }
        raw.opacity_raw = read_f32_le(rec + oopacity);
        for (std::size_t k = 0; k < rest; ++k) {
            raw.f_rest[k] = read_f32_le(rec + orest[k]);
            finite = finite && std::isfinite(raw.f_rest[k]);
        }
        finite = finite && finite3(raw.f_dc) && finite3(raw.scale_raw) && std::isfinite(raw.opacity_raw);
        if (!finite) {
            if (!options.skip_bad)
                throw Error(Errc::NonFiniteRecord, "record " + std::to_string(i) + " has non-finite fields");
            ++result.skipped;
            continue;
        }
        gaussians.push_back(activate(raw, layout.sh_degree));
    }
    result.scene = Scene(std::move(gaussians), layout.sh_degree);
    return result;
}

std::vector<std::byte> write_ply(const Scene& scene) {
    const int degree = scene.sh_degree();
    const int rest = sh_rest_count(degree);
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.count() << '\n';
    for (const char* p : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"})
        header << "property float " << p << '\n';
    for (int k = 0; k < rest; ++k) header << "property float f_rest_" << k << '\n';
    header << "property float opacity\n";
    for (const char* p : {"scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"})
        header << "property float " << p << '\n';
    header << "end_header\n";

    const std::string text = header.str();
    std::vector<std::byte> out;
    const std::size_t stride = 4u * static_cast<std::size_t>(17 + rest);
    out.reserve(text.size() + stride * scene.count());
    for (char ch : text) out.push_back(static_cast<std::byte>(ch));
    for (const auto& g : scene.gaussians()) {
        const RawGaussian raw = deactivate(g, degree);
        for (float v : raw.position) append_f32_le(out, v);
        for (int c = 0; c < 3; ++c) append_f32_le(out, 0.0f);
        for (float v : raw.f_dc) append_f32_le(out, v);
        for (float v : raw.f_rest) append_f32_le(out, v);
        append_f32_le(out, raw.opacity_raw);
        for (float v : raw.scale_raw) append_f32_le(out, v);
        for (float v : raw.rot_raw) append_f32_le(out, v);
    }
    return out;
}

PlyLoad read_ply_file(const std::string& path, const PlyOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::FileError, "cannot open " + path);
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto bytes = std::as_bytes(std::span<const char>(data));
    return load_ply(bytes, options);
}

void write_ply_file(const std::string& path, const Scene& scene) {
    const auto bytes = write_ply(scene);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::FileError, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::FileError, "short write to " + path);
}

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    // SplitMix64 finalizer over a Weyl-sequence position derived from the key.
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + (stream << 40) + counter;
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

float counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    return static_cast<float>(counter_hash(seed, stream, counter) >> 40) * 0x1.0p-24f;
}

Scene synth_scene(std::uint64_t seed, std::size_t n, const SynthSpec& spec) {
    auto bad = [](const std::string& what) { throw Error(Errc::InvalidSpec, what); };
    for (int a = 0; a < 3; ++a) {
        if (!(spec.extent_min[a] <= spec.extent_max[a])) bad("extent range is empty or negative");
    }
    if (!(spec.scale_min > 0.0f && spec.scale_min <= spec.scale_max)) bad("scale range must be positive");
    if (!(spec.opacity_min > 0.0f && spec.opacity_min <= spec.opacity_max && spec.opacity_max <= 1.0f))
        bad("opacity range must lie in (0, 1]");
    if (spec.sh_degree < 0 || spec.sh_degree > kMaxShDegree) bad("sh_degree must be in 0..3");
    if (!(spec.sh_amplitude >= 0.0f) || !std::isfinite(spec.sh_amplitude)) bad("sh_amplitude must be >= 0");

    // Streams: 0-2 position, 3-5 scale, 6-9 rotation, 10 opacity, 16+ SH.
    // Only +, *, / and sqrt are used so results are bit-identical everywhere.
    std::vector<Gaussian> out(n);
    const int coeffs = sh_coeff_count(spec.sh_degree);
    for (std::size_t i = 0; i < n; ++i) {
        auto u = [&](std::uint64_t stream) { return counter_uniform(seed, stream, i); };
        Gaussian& g = out[i];
        for (int a = 0; a < 3; ++a) {
            g.position[a] = spec.extent_min[a] + u(a) * (spec.extent_max[a] - spec.extent_min[a]);
            g.scale[a] = spec.scale_min + u(3 + a) * (spec.scale_max - spec.scale_min);
        }
        Quatf q{};
        float norm2 = 0.0f;
        for (int c = 0; c < 4; ++c) {
            q[c] = 2.0f * u(6 + c) - 1.0f;
            norm2 += q[c] * q[c];
        }
        if (norm2 < 1e-6f) {
            q = {1.0f, 0.0f, 0.0f, 0.0f};
            norm2 = 1.0f;
        }
        const float inv = 1.0f / std::sqrt(norm2);
        for (int c = 0; c < 4; ++c) g.rotation[c] = q[c] * inv;
        g.opacity = spec.opacity_min + u(10) * (spec.opacity_max - spec.opacity_min);
        for (int k = 0; k < coeffs; ++k) {
            const float amp = k == 0 ? spec.sh_amplitude : 0.3f * spec.sh_amplitude;
            for (int c = 0; c < 3; ++c) {
                g.sh[k * 3 + c] = amp * (2.0f * u(16 + static_cast<std::uint64_t>(k * 3 + c)) - 1.0f);
            }
        }
    }
    return Scene(std::move(out), spec.sh_degree);
}

} // namespace splat
