#pragma once

#include "splat/gpu/device.hpp"

#include <array>
#include <cstdint>

// Helpers for writing compute kernels against the software device. A kernel
// body runs once per workgroup; each lanes() call is one barrier-delimited
// phase executed by all kWorkgroupSize invocations, so consecutive lanes()
// calls are separated by an implicit workgroupBarrier(). Workgroup-shared
// memory is a local array in the kernel body.
namespace splat::gpu {

using SharedArray = std::array<std::uint32_t, kWorkgroupSize>;

template <typename Body>
inline void lanes(Body&& body) {
    for (std::uint32_t lid = 0; lid < kWorkgroupSize; ++lid) body(lid);
}

/// Work-efficient (Blelloch) exclusive scan of one shared tile, in place.
/// Returns the tile total.
inline std::uint32_t workgroup_exclusive_scan(SharedArray& data) {
    for (std::uint32_t offset = 1; offset < kWorkgroupSize; offset <<= 1) {
        lanes([&](std::uint32_t lid) {
            if (lid < kWorkgroupSize / (2 * offset)) {
                const std::uint32_t ai = offset * (2 * lid + 1) - 1;
                const std::uint32_t bi = offset * (2 * lid + 2) - 1;
                data[bi] += data[ai];
            }
        });
    }
    const std::uint32_t total = data[kWorkgroupSize - 1];
    data[kWorkgroupSize - 1] = 0;
    for (std::uint32_t offset = kWorkgroupSize / 2; offset >= 1; offset >>= 1) {
        lanes([&](std::uint32_t lid) {
            if (lid < kWorkgroupSize / (2 * offset)) {
                const std::uint32_t ai = offset * (2 * lid + 1) - 1;
                const std::uint32_t bi = offset * (2 * lid + 2) - 1;
                const std::uint32_t t = data[ai];
                data[ai] = data[bi];
                data[bi] += t;
            }
        });
    }
    return total;
}

constexpr std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

} // namespace splat::gpu
