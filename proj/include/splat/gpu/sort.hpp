#pragma once

#include "splat/gpu/device.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace splat::gpu {

inline constexpr std::uint32_t kRadixBits = 8;
inline constexpr std::uint32_t kRadix = 1u << kRadixBits;
inline constexpr std::uint32_t kRadixPasses = 32 / kRadixBits;
inline constexpr std::uint32_t kSentinelKey = 0xFFFFFFFFu;
inline constexpr std::uint32_t kSentinelPayload = 0xFFFFFFFFu;
/// Largest element count a sorter accepts.
inline constexpr std::uint64_t kMaxSortCapacity = (1ull << 32) - kWorkgroupSize;

/// Level lengths of the hierarchical scan for an input of `length` words:
/// level 0 is the input, each next level holds one sum per 256-word tile,
/// and the last level fits in a single tile.
std::vector<std::uint64_t> scan_level_lengths(std::uint64_t length);

/// Multi-level Blelloch scan made of independent dispatches: an upsweep per
/// level (tile-local exclusive scan, tile totals to the next level) followed
/// by a downsweep per level (add the scanned parent value to every element
/// of the tile). Only intra-workgroup barriers are used.
class HierarchicalScan {
  public:
    /// Words of indirect arguments consumed per level: [length, groups, 1, 1].
    static constexpr std::uint32_t kArgsPerLevel = 4;

    HierarchicalScan() = default;
    HierarchicalScan(Device& device, std::uint64_t max_length, const std::string& label);

    std::uint64_t max_length() const noexcept { return max_length_; }
    std::uint32_t levels() const noexcept { return static_cast<std::uint32_t>(level_max_.size()); }
    std::uint32_t dispatch_count() const noexcept { return 2 * levels() - 1; }
    /// Auxiliary bytes (levels >= 1).
    std::uint64_t aux_bytes() const noexcept;

    /// Fill the per-level argument words for a runtime length. Callable from
    /// a kernel or the host.
    void write_args(const BufferView& args, std::uint64_t offset, std::uint64_t length) const;

    /// Scan data[0, length) in place; length is taken from the argument
    /// block at `args_offset` when the commands execute.
    void encode(CommandEncoder& encoder, Buffer data, Buffer args, std::uint64_t args_offset) const;

    /// One-shot host helper: owns an argument buffer, scans `length` words.
    void run(Device& device, const Buffer& data, std::uint64_t length) const;

  private:
    std::uint64_t max_length_ = 0;
    std::vector<std::uint64_t> level_max_;
    std::vector<Buffer> level_buffers_; // index l-1 holds level l
    std::string label_;
};

/// Static dispatch/storage plan for a given capacity.
struct SortPlan {
    std::uint64_t capacity = 0;
    std::uint64_t padded_capacity = 0;
    std::uint64_t max_tiles = 0;
    std::uint32_t scan_levels = 0;
    std::uint32_t dispatches_per_pass = 0; // histogram + scan + scatter
    std::uint32_t dispatches_total = 0;    // args + pad + 4 passes
    std::uint64_t key_payload_bytes = 0;   // keys_a/b + payload_a/b
    std::uint64_t histogram_bytes = 0;
    std::uint64_t scan_aux_bytes = 0;
    std::uint64_t args_bytes = 0;
};

SortPlan plan_sort(std::uint64_t capacity);

/// Wait-free LSD radix sort of 32-bit keys with 32-bit payloads: four 8-bit
/// passes of local histogram -> hierarchical scan -> scatter.
///
/// The histogram is digit-major (counter for digit d of tile t lives at
/// d * T + t), so one exclusive scan over it yields base_d + prefix_wg
/// for every (digit, tile) pair. The scatter computes rank_local with eight
/// stable 1-bit splits inside the tile.
class RadixSorter {
  public:
    RadixSorter(Device& device, std::uint64_t capacity);

    const SortPlan& plan() const noexcept { return plan_; }
    std::uint64_t capacity() const noexcept { return plan_.capacity; }

    /// Ping-pong pair A; sorted output lands here after four passes.
    const Buffer& keys() const noexcept { return keys_a_; }
    const Buffer& payload() const noexcept { return payload_a_; }
    const Buffer& histogram() const noexcept { return histogram_; }
    const Buffer& args() const noexcept { return args_; }
    const HierarchicalScan& scan() const noexcept { return scan_; }

    /// Argument block layout inside args().
    static constexpr std::uint64_t kArgCount = 0;
    static constexpr std::uint64_t kArgPadded = 1;
    static constexpr std::uint64_t kArgTiles = 2;
    static constexpr std::uint64_t kArgPadDispatch = 3;
    static constexpr std::uint64_t kArgTileDispatch = 6;
    static constexpr std::uint64_t kArgScan = 9;

    /// Derive every sort argument from the element count. Used by the
    /// single-workgroup argument kernel.
    void write_args(std::uint32_t count) const;

    /// Record the argument kernel reading the count from
    /// count_buffer[count_offset].
    void encode_args(CommandEncoder& encoder, Buffer count_buffer, std::uint64_t count_offset) const;
    void encode_pad(CommandEncoder& encoder) const;
    void encode_histogram(CommandEncoder& encoder, std::uint32_t pass) const;
    void encode_scan(CommandEncoder& encoder) const;
    void encode_scatter(CommandEncoder& encoder, std::uint32_t pass) const;

    /// Full sort for a count held in device memory (no host readback).
    void encode(CommandEncoder& encoder, Buffer count_buffer, std::uint64_t count_offset) const;

    /// Host convenience: upload, sort `keys.size()` elements, read back.
    void sort(Device& device, std::vector<std::uint32_t>& keys, std::vector<std::uint32_t>& payload) const;

  private:
    SortPlan plan_;
    Buffer keys_a_, keys_b_, payload_a_, payload_b_;
    Buffer histogram_;
    Buffer args_;
    Buffer host_count_;
    HierarchicalScan scan_;
};

} // namespace splat::gpu
