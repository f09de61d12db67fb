#include "splat/bench.hpp"

#include "splat/error.hpp"
#include "splat/packing.hpp"
#include "splat/scene.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splat {

namespace {

std::vector<double> sorted_copy(std::span<const double> samples) {
    if (samples.empty()) throw Error(Errc::InvalidSpec, "statistics need at least one sample");
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

double median(std::span<const double> samples) {
    const auto v = sorted_copy(samples);
    return v[(v.size() - 1) / 2];
}

double percentile_nearest_rank(std::span<const double> samples, double p) {
    if (!(p > 0.0 && p <= 100.0)) throw Error(Errc::InvalidSpec, "percentile must be in (0, 100]");
    const auto v = sorted_copy(samples);
    // Integer rank arithmetic avoids 0.99 * 200 = 198.00000000000003 rounding up.
    const auto n = static_cast<std::uint64_t>(v.size());
    const auto p_milli = static_cast<std::uint64_t>(std::llround(p * 1000.0));
    const std::uint64_t rank = (p_milli * n + 100000 - 1) / 100000;
    return v[std::max<std::uint64_t>(rank, 1) - 1];
}

double mean(std::span<const double> samples) {
    if (samples.empty()) throw Error(Errc::InvalidSpec, "statistics need at least one sample");
    return std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
}

double stddev_population(std::span<const double> samples) {
    const double m = mean(samples);
    double sum = 0.0;
    for (double x : samples) sum += (x - m) * (x - m);
    return std::sqrt(sum / static_cast<double>(samples.size()));
}

SampleStats summarize(std::span<const double> samples) {
    return {median(samples), mean(samples), stddev_population(samples), percentile_nearest_rank(samples, 99.0)};
}

void fill_stats(BenchReport& report, std::span<const FrameStats> measured) {
    report.frames_completed = static_cast<std::uint32_t>(measured.size());
    if (measured.empty()) return;
    std::vector<double> pre, sort, render, total;
    bool valid = true;
    for (const auto& f : measured) {
        pre.push_back(f.preprocess_ms);
        sort.push_back(f.sort_ms);
        render.push_back(f.render_ms);
        total.push_back(f.total_ms);
        valid = valid && f.timestamp_valid;
    }
    report.preprocess = summarize(pre);
    report.sort = summarize(sort);
    report.render = summarize(render);
    report.total = summarize(total);
    report.timestamp_valid = valid;
}

std::string bench_report_json(const BenchReport& r, int indent) {
    auto stage = [](const SampleStats& s) {
        return nlohmann::json{{"median", s.median}, {"mean", s.mean}, {"stddev", s.stddev}, {"p99", s.p99}};
    };
    nlohmann::json j;
    j["schema_version"] = kBenchReportVersion;
    j["device"] = {{"adapter", r.adapter.name}, {"backend", r.adapter.backend}};
    j["scene"] = {{"path", r.scene}, {"splat_count", r.splat_count}};
    j["resolution"] = {{"width", r.width}, {"height", r.height}};
    j["frames"] = r.frames;
    j["warmup"] = r.warmup;
    j["frames_completed"] = r.frames_completed;
    j["stages_ms"] = {{"preprocess", stage(r.preprocess)}, {"sort", stage(r.sort)}, {"render", stage(r.render)}};
    j["total_ms"] = {{"median", r.total.median}, {"stddev", r.total.stddev}, {"p99", r.total.p99}};
    j["memory_total_bytes"] = r.memory_total_bytes;
    j["ablation"] = {{"no_cull", r.no_cull}, {"no_radius", r.no_radius}};
    j["timestamp_valid"] = r.timestamp_valid;
    j["partial"] = r.partial;
    j["timing_note"] = "headless offscreen frames; compute and raster only, no presentation or v-sync";
    return j.dump(indent);
}

const char* distribution_name(KeyDistribution d) noexcept {
    switch (d) {
    case KeyDistribution::Uniform: return "uniform";
    case KeyDistribution::DuplicateHeavy: return "duplicate-heavy";
    case KeyDistribution::Sorted: return "sorted";
    case KeyDistribution::ReverseSorted: return "reverse-sorted";
    }
    return "unknown";
}

std::vector<std::uint32_t> generate_keys(KeyDistribution d, std::size_t n, std::uint64_t seed) {
    std::vector<std::uint32_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = static_cast<std::uint32_t>(counter_hash(seed, 100, i) >> 32);
    switch (d) {
    case KeyDistribution::Uniform: break;
    case KeyDistribution::DuplicateHeavy:
        // 16 distinct values spread over all four digits.
        for (auto& k : keys) k = (k >> 28) * 0x11111111u;
        break;
    case KeyDistribution::Sorted: std::sort(keys.begin(), keys.end()); break;
    case KeyDistribution::ReverseSorted: std::sort(keys.begin(), keys.end(), std::greater<>()); break;
    }
    return keys;
}

Image to_rgba8(const reference::ReferenceImage& image) {
    Image out;
    out.width = image.width;
    out.height = image.height;
    out.pixels.resize(static_cast<std::size_t>(image.width) * image.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] = pack_rgba8(image.rgba[4 * i], image.rgba[4 * i + 1], image.rgba[4 * i + 2], image.rgba[4 * i + 3]);
    }
    return out;
}

std::vector<float> to_float_rgba(const Image& image) {
    std::vector<float> out;
    out.reserve(image.pixels.size() * 4);
    for (auto p : image.pixels) {
        const auto c = unpack_rgba8(p);
        out.insert(out.end(), c.begin(), c.end());
    }
    return out;
}

} // namespace splat
