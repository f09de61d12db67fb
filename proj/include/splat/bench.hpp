#pragma once

#include "splat/gpu/device.hpp"
#include "splat/pipeline.hpp"
#include "splat/reference.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace splat {

/// Lower-middle order statistic: sorted[(n - 1) / 2]. Throws on empty input.
double median(std::span<const double> samples);
/// Nearest-rank percentile: sorted[ceil(p/100 * n) - 1].
double percentile_nearest_rank(std::span<const double> samples, double p);
double mean(std::span<const double> samples);
/// Population standard deviation (divide by n).
double stddev_population(std::span<const double> samples);

struct SampleStats {
    double median = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    double p99 = 0.0;
};

SampleStats summarize(std::span<const double> samples);

inline constexpr int kBenchReportVersion = 1;

struct BenchReport {
    gpu::AdapterInfo adapter;
    std::string scene;
    std::uint64_t splat_count = 0;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t frames = 0;
    std::uint32_t warmup = 0;
    SampleStats preprocess, sort, render, total;
    std::uint64_t memory_total_bytes = 0;
    bool no_cull = false;
    bool no_radius = false;
    bool timestamp_valid = false;
    /// Set when the run stopped early (device loss); stats cover the
    /// frames measured so far.
    bool partial = false;
    std::uint32_t frames_completed = 0;
};

/// Aggregates measured (post-warmup) frames into a report.
void fill_stats(BenchReport& report, std::span<const FrameStats> measured);

std::string bench_report_json(const BenchReport& report, int indent = 2);

enum class KeyDistribution { Uniform, DuplicateHeavy, Sorted, ReverseSorted };

const char* distribution_name(KeyDistribution d) noexcept;
inline constexpr KeyDistribution kAllDistributions[] = {KeyDistribution::Uniform, KeyDistribution::DuplicateHeavy,
                                                        KeyDistribution::Sorted, KeyDistribution::ReverseSorted};

/// Keys for sort tests. DuplicateHeavy draws from 16 distinct values;
/// Sorted/ReverseSorted are non-decreasing/non-increasing with repeats.
std::vector<std::uint32_t> generate_keys(KeyDistribution d, std::size_t n, std::uint64_t seed);

/// 8-bit conversion of a float image: floor(clamp(x) * 255 + 0.5).
Image to_rgba8(const reference::ReferenceImage& image);
/// Float view of an RGBA8 image on a [0, 1] scale.
std::vector<float> to_float_rgba(const Image& image);

void write_png(const std::string& path, const Image& image);
/// Raw little-endian float32 dump: "SPLF", width, height (u32), then RGBA.
void write_float_dump(const std::string& path, const reference::ReferenceImage& image);

} // namespace splat
