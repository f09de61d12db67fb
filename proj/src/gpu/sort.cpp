#include "splat/gpu/sort.hpp"

#include "splat/error.hpp"
#include "splat/gpu/kernel.hpp"

namespace splat::gpu {

std::vector<std::uint64_t> scan_level_lengths(std::uint64_t length) {
    std::vector<std::uint64_t> levels{length};
    for (std::uint64_t len = length; len > kWorkgroupSize; levels.push_back(len)) len = ceil_div(len, kWorkgroupSize);
    return levels;
}

HierarchicalScan::HierarchicalScan(Device& device, std::uint64_t max_length, const std::string& label)
    : max_length_(max_length), level_max_(scan_level_lengths(max_length)), label_(label) {
    for (std::size_t l = 1; l < level_max_.size(); ++l) {
        level_buffers_.push_back(device.create_buffer(label + ".level" + std::to_string(l), level_max_[l]));
    }
}

std::uint64_t HierarchicalScan::aux_bytes() const noexcept {
    std::uint64_t total = 0;
    for (std::size_t l = 1; l < level_max_.size(); ++l) total += level_max_[l] * 4;
    return total;
}

void HierarchicalScan::write_args(const BufferView& args, std::uint64_t offset, std::uint64_t length) const {
    std::uint64_t len = length;
    for (std::uint32_t l = 0; l < levels(); ++l) {
        if (l > 0) len = ceil_div(len, kWorkgroupSize);
        const std::uint64_t base = offset + static_cast<std::uint64_t>(l) * kArgsPerLevel;
        args[base + 0] = static_cast<std::uint32_t>(len);
        args[base + 1] = static_cast<std::uint32_t>(ceil_div(len, kWorkgroupSize));
        args[base + 2] = 1;
        args[base + 3] = 1;
    }
}

void HierarchicalScan::encode(CommandEncoder& encoder, Buffer data, Buffer args, std::uint64_t args_offset) const {
    const std::uint32_t top = levels() - 1;
    auto level_view = [&](std::uint32_t l) { return l == 0 ? data.view() : level_buffers_[l - 1].view(); };

    // Forward pass: tile-local exclusive scans, tile totals feed the next level.
    for (std::uint32_t l = 0; l <= top; ++l) {
        const BufferView values = level_view(l);
        const BufferView sums = l < top ? level_view(l + 1) : BufferView{};
        const bool has_parent = l < top;
        const BufferView a = args.view();
        const std::uint64_t arg = args_offset + static_cast<std::uint64_t>(l) * kArgsPerLevel;
        encoder.dispatch_indirect(
            label_ + ".upsweep",
            [values, sums, has_parent, a, arg](WorkgroupId wg) {
                const std::uint64_t length = a[arg];
                const std::uint64_t base = static_cast<std::uint64_t>(wg.index) * kWorkgroupSize;
                SharedArray tile{};
                lanes([&](std::uint32_t lid) { tile[lid] = base + lid < length ? values[base + lid] : 0u; });
                const std::uint32_t total = workgroup_exclusive_scan(tile);
                lanes([&](std::uint32_t lid) {
                    if (base + lid < length) values[base + lid] = tile[lid];
                });
                if (has_parent) sums[wg.index] = total;
            },
            args, arg + 1);
    }

    // Backward pass: scanned parent prefixes are added back to their tiles.
    for (std::uint32_t l = top; l-- > 0;) {
        const BufferView values = level_view(l);
        const BufferView prefixes = level_view(l + 1);
        const BufferView a = args.view();
        const std::uint64_t arg = args_offset + static_cast<std::uint64_t>(l) * kArgsPerLevel;
        encoder.dispatch_indirect(
            label_ + ".downsweep",
            [values, prefixes, a, arg](WorkgroupId wg) {
                const std::uint64_t length = a[arg];
                const std::uint64_t base = static_cast<std::uint64_t>(wg.index) * kWorkgroupSize;
                const std::uint32_t offset = prefixes[wg.index];
                lanes([&](std::uint32_t lid) {
                    if (base + lid < length) values[base + lid] += offset;
                });
            },
            args, arg + 1);
    }
}

void HierarchicalScan::run(Device& device, const Buffer& data, std::uint64_t length) const {
    if (length > max_length_ || length > data.size_words())
        throw Error(Errc::CapacityExceeded, "scan length exceeds capacity");
    Buffer args = device.create_buffer(label_ + ".args", static_cast<std::uint64_t>(levels()) * kArgsPerLevel);
    write_args(args.view(), 0, length);
    CommandEncoder encoder;
    encode(encoder, data, args, 0);
    device.submit(encoder);
}

SortPlan plan_sort(std::uint64_t capacity) {
    SortPlan p;
    p.capacity = capacity;
    p.max_tiles = ceil_div(capacity, kWorkgroupSize);
    p.padded_capacity = p.max_tiles * kWorkgroupSize;
    const auto levels = scan_level_lengths(p.max_tiles * kRadix);
    p.scan_levels = static_cast<std::uint32_t>(levels.size());
    p.dispatches_per_pass = 1 + (2 * p.scan_levels - 1) + 1;
    p.dispatches_total = 2 + kRadixPasses * p.dispatches_per_pass;
    p.key_payload_bytes = 4 * 4 * p.padded_capacity;
    p.histogram_bytes = 4 * p.max_tiles * kRadix;
    for (std::size_t l = 1; l < levels.size(); ++l) p.scan_aux_bytes += 4 * levels[l];
    p.args_bytes = 4 * (RadixSorter::kArgScan + HierarchicalScan::kArgsPerLevel * p.scan_levels);
    return p;
}

RadixSorter::RadixSorter(Device& device, std::uint64_t capacity) {
    if (capacity > kMaxSortCapacity)
        throw Error(Errc::CapacityExceeded, "sort capacity above 2^32 - " + std::to_string(kWorkgroupSize));
    plan_ = plan_sort(capacity);
    keys_a_ = device.create_buffer("sort.keys_a", plan_.padded_capacity);
    keys_b_ = device.create_buffer("sort.keys_b", plan_.padded_capacity);
    payload_a_ = device.create_buffer("sort.payload_a", plan_.padded_capacity);
    payload_b_ = device.create_buffer("sort.payload_b", plan_.padded_capacity);
    histogram_ = device.create_buffer("sort.histogram", plan_.max_tiles * kRadix);
    scan_ = HierarchicalScan(device, plan_.max_tiles * kRadix, "sort.scan");
    args_ = device.create_buffer("sort.args", plan_.args_bytes / 4);
    host_count_ = device.create_buffer("sort.host_count", 1);
}

void RadixSorter::write_args(std::uint32_t count) const {
    const BufferView a = args_.view();
    const std::uint64_t n = std::min<std::uint64_t>(count, plan_.capacity);
    const std::uint64_t tiles = ceil_div(n, kWorkgroupSize);
    const std::uint64_t padded = tiles * kWorkgroupSize;
    a[kArgCount] = static_cast<std::uint32_t>(n);
    a[kArgPadded] = static_cast<std::uint32_t>(padded);
    a[kArgTiles] = static_cast<std::uint32_t>(tiles);
    a[kArgPadDispatch + 0] = padded > n ? 1u : 0u;
    a[kArgPadDispatch + 1] = 1;
    a[kArgPadDispatch + 2] = 1;
    a[kArgTileDispatch + 0] = static_cast<std::uint32_t>(tiles);
    a[kArgTileDispatch + 1] = 1;
    a[kArgTileDispatch + 2] = 1;
    scan_.write_args(a, kArgScan, tiles * kRadix);
}

void RadixSorter::encode_args(CommandEncoder& encoder, Buffer count_buffer, std::uint64_t count_offset) const {
    const BufferView count = count_buffer.view();
    encoder.dispatch(
        "sort.args",
        [this, count, count_offset](WorkgroupId) {
            lanes([&](std::uint32_t lid) {
                if (lid == 0) write_args(count[count_offset]);
            });
        },
        1);
}

void RadixSorter::encode_pad(CommandEncoder& encoder) const {
    const BufferView a = args_.view();
    const BufferView keys = keys_a_.view();
    const BufferView payload = payload_a_.view();
    encoder.dispatch_indirect(
        "sort.pad",
        [a, keys, payload](WorkgroupId) {
            const std::uint64_t count = a[kArgCount];
            const std::uint64_t padded = a[kArgPadded];
            lanes([&](std::uint32_t lid) {
                const std::uint64_t i = count + lid;
                if (i < padded) {
                    keys[i] = kSentinelKey;
                    payload[i] = kSentinelPayload;
                }
            });
        },
        args_, kArgPadDispatch);
}

void RadixSorter::encode_histogram(CommandEncoder& encoder, std::uint32_t pass) const {
    const BufferView a = args_.view();
    const BufferView keys = (pass % 2 == 0 ? keys_a_ : keys_b_).view();
    const BufferView hist = histogram_.view();
    const std::uint32_t shift = pass * kRadixBits;
    encoder.dispatch_indirect(
        "sort.histogram",
        [a, keys, hist, shift](WorkgroupId wg) {
            const std::uint64_t tiles = a[kArgTiles];
            const std::uint64_t base = static_cast<std::uint64_t>(wg.index) * kWorkgroupSize;
            SharedArray counts{};
            lanes([&](std::uint32_t lid) {
                const std::uint32_t digit = (keys[base + lid] >> shift) & (kRadix - 1);
                ++counts[digit]; // workgroup-shared atomicAdd
            });
            lanes([&](std::uint32_t lid) { hist[static_cast<std::uint64_t>(lid) * tiles + wg.index] = counts[lid]; });
        },
        args_, kArgTileDispatch);
}

void RadixSorter::encode_scan(CommandEncoder& encoder) const { scan_.encode(encoder, histogram_, args_, kArgScan); }

void RadixSorter::encode_scatter(CommandEncoder& encoder, std::uint32_t pass) const {
    const BufferView a = args_.view();
    const BufferView src_keys = (pass % 2 == 0 ? keys_a_ : keys_b_).view();
    const BufferView src_payload = (pass % 2 == 0 ? payload_a_ : payload_b_).view();
    const BufferView dst_keys = (pass % 2 == 0 ? keys_b_ : keys_a_).view();
    const BufferView dst_payload = (pass % 2 == 0 ? payload_b_ : payload_a_).view();
    const BufferView hist = histogram_.view();
    const std::uint32_t shift = pass * kRadixBits;
    encoder.dispatch_indirect(
        "sort.scatter",
        [=](WorkgroupId wg) {
            const std::uint64_t tiles = a[kArgTiles];
            const std::uint64_t base = static_cast<std::uint64_t>(wg.index) * kWorkgroupSize;
            SharedArray key{}, value{}, flag{}, next_key{}, next_value{}, start{};
            auto digit_of = [shift](std::uint32_t k) { return (k >> shift) & (kRadix - 1); };
            lanes([&](std::uint32_t lid) {
                key[lid] = src_keys[base + lid];
                value[lid] = src_payload[base + lid];
            });

            // Stable in-tile reorder by digit: one split per digit bit.
            for (std::uint32_t bit = 0; bit < kRadixBits; ++bit) {
                lanes([&](std::uint32_t lid) { flag[lid] = ((digit_of(key[lid]) >> bit) & 1u) == 0 ? 1u : 0u; });
                SharedArray zeros_before = flag;
                const std::uint32_t zeros = workgroup_exclusive_scan(zeros_before);
                lanes([&](std::uint32_t lid) {
                    const std::uint32_t dst = flag[lid] ? zeros_before[lid] : zeros + (lid - zeros_before[lid]);
                    next_key[dst] = key[lid];
                    next_value[dst] = value[lid];
                });
                lanes([&](std::uint32_t lid) {
                    key[lid] = next_key[lid];
                    value[lid] = next_value[lid];
                });
            }

            // First local position of each digit run.
            lanes([&](std::uint32_t lid) {
                const std::uint32_t d = digit_of(key[lid]);
                if (lid == 0 || digit_of(key[lid - 1]) != d) start[d] = lid;
            });
            // pos = (base_d + prefix_wg) + rank_local
            lanes([&](std::uint32_t lid) {
                const std::uint32_t d = digit_of(key[lid]);
                const std::uint64_t pos = static_cast<std::uint64_t>(hist[static_cast<std::uint64_t>(d) * tiles + wg.index]) +
                                          (lid - start[d]);
                dst_keys[pos] = key[lid];
                dst_payload[pos] = value[lid];
            });
        },
        args_, kArgTileDispatch);
}

void RadixSorter::encode(CommandEncoder& encoder, Buffer count_buffer, std::uint64_t count_offset) const {
    encode_args(encoder, std::move(count_buffer), count_offset);
    encode_pad(encoder);
    for (std::uint32_t pass = 0; pass < kRadixPasses; ++pass) {
        encode_histogram(encoder, pass);
        encode_scan(encoder);
        encode_scatter(encoder, pass);
    }
}

void RadixSorter::sort(Device& device, std::vector<std::uint32_t>& keys, std::vector<std::uint32_t>& payload) const {
    if (keys.size() != payload.size()) throw Error(Errc::LengthMismatch, "keys and payload differ in length");
    if (keys.size() > plan_.capacity)
        throw Error(Errc::CapacityExceeded,
                    std::to_string(keys.size()) + " elements exceed capacity " + std::to_string(plan_.capacity));
    device.write_buffer(keys_a_, 0, keys);
    device.write_buffer(payload_a_, 0, payload);
    const std::uint32_t n = static_cast<std::uint32_t>(keys.size());
    device.write_buffer(host_count_, 0, std::span<const std::uint32_t>(&n, 1));
    CommandEncoder encoder;
    encode(encoder, host_count_, 0);
    device.submit(encoder);
    keys = device.read_buffer(keys_a_, 0, keys.size());
    payload = device.read_buffer(payload_a_, 0, payload.size());
}

} // namespace splat::gpu
