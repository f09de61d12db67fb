#include "splat/gpu/device.hpp"

#include "splat/error.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <random>
#include <string_view>
#include <thread>

namespace splat::gpu {

namespace detail {

struct Accounting {
    mutable std::mutex mutex;
    std::uint64_t budget = 0;
    std::uint64_t total = 0;
    std::uint64_t next_id = 0;
    std::map<std::uint64_t, MemoryEntry> live;
};

struct FreeDeleter {
    void operator()(std::uint32_t* p) const noexcept { std::free(p); }
};

struct BufferStorage {
    std::shared_ptr<Accounting> accounting;
    std::uint64_t id = 0;
    std::string label;
    std::uint64_t words = 0;
    std::uint64_t shard_words = 0;
    std::vector<std::unique_ptr<std::uint32_t, FreeDeleter>> shards;
    std::vector<std::uint32_t*> shard_ptrs;

    ~BufferStorage() {
        if (!accounting) return;
        std::lock_guard lock(accounting->mutex);
        accounting->total -= words * 4;
        accounting->live.erase(id);
    }
};

} // namespace detail

float BufferView::f32(std::uint64_t i) const noexcept { return std::bit_cast<float>((*this)[i]); }

void BufferView::set_f32(std::uint64_t i, float v) const noexcept { (*this)[i] = std::bit_cast<std::uint32_t>(v); }

std::uint32_t BufferView::atomic_fetch_add(std::uint64_t i, std::uint32_t value) const noexcept {
    return std::atomic_ref<std::uint32_t>((*this)[i]).fetch_add(value, std::memory_order_relaxed);
}

std::uint64_t Buffer::size_words() const noexcept { return storage_ ? storage_->words : 0; }

std::uint64_t Buffer::shard_count() const noexcept { return storage_ ? storage_->shards.size() : 0; }

const std::string& Buffer::label() const noexcept {
    static const std::string empty;
    return storage_ ? storage_->label : empty;
}

BufferView Buffer::view() const noexcept {
    BufferView v;
    if (!storage_) return v;
    v.size_ = storage_->words;
    v.shard_words_ = storage_->shard_words;
    if (storage_->shards.size() == 1) {
        v.single_ = storage_->shard_ptrs.front();
    } else {
        v.shards_ = storage_->shard_ptrs.data();
    }
    return v;
}

std::uint64_t device_clock_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

DeviceDesc desc_from_environment(DeviceDesc base) {
    const char* env = std::getenv("SPLAT_BACKEND_OVERRIDE");
    if (!env || !*env) return base;
    std::string_view value(env);
    std::string_view mode = value.substr(0, value.find(':'));
    if (mode == "serial") {
        base.schedule = Schedule::InOrder;
    } else if (mode == "reverse") {
        base.schedule = Schedule::Reverse;
    } else if (mode == "shuffled") {
        base.schedule = Schedule::Shuffled;
    } else if (mode == "parallel") {
        base.schedule = Schedule::Parallel;
    } else {
        throw Error(Errc::UnsupportedDevice, "unknown SPLAT_BACKEND_OVERRIDE '" + std::string(value) + "'");
    }
    if (auto colon = value.find(':'); colon != std::string_view::npos) {
        base.threads = static_cast<std::uint32_t>(std::strtoul(std::string(value.substr(colon + 1)).c_str(), nullptr, 10));
    }
    return base;
}

Device::Device(DeviceDesc desc) : desc_(desc), accounting_(std::make_shared<detail::Accounting>()) {
    accounting_->budget = desc_.limits.memory_budget;
    if (desc_.threads == 0) desc_.threads = std::max(1u, std::thread::hardware_concurrency());
}

Device::~Device() = default;

AdapterInfo Device::adapter() const {
    AdapterInfo info;
    info.timestamps = desc_.timestamps;
    switch (desc_.schedule) {
    case Schedule::InOrder: info.backend = "software-serial"; break;
    case Schedule::Reverse: info.backend = "software-serial-reverse"; break;
    case Schedule::Shuffled: info.backend = "software-serial-shuffled"; break;
    case Schedule::Parallel: info.backend = "software-parallel"; break;
    }
    info.name = "splat software adapter (" + info.backend + ", " + std::to_string(desc_.threads) + " threads)";
    return info;
}

Buffer Device::create_buffer(std::string label, std::uint64_t words, std::uint32_t stride_words) {
    if (stride_words == 0) stride_words = 1;
    const std::uint64_t bytes = words * 4;
    if (bytes > desc_.limits.max_buffer_size)
        throw Error(Errc::ExceedsBufferLimit, label + " needs " + std::to_string(bytes) + " bytes, limit " +
                                                  std::to_string(desc_.limits.max_buffer_size));
    const std::uint64_t binding_words = desc_.limits.max_storage_binding_size / 4;
    if (binding_words < stride_words)
        throw Error(Errc::ExceedsBufferLimit, label + ": element larger than a storage binding");

    auto storage = std::make_shared<detail::BufferStorage>();
    {
        std::lock_guard lock(accounting_->mutex);
        if (accounting_->total + bytes > accounting_->budget)
            throw Error(Errc::OutOfDeviceMemory, label + " would exceed the device memory budget");
        accounting_->total += bytes;
        storage->id = accounting_->next_id++;
        accounting_->live.emplace(storage->id, MemoryEntry{label, bytes});
    }
    // From here on the storage destructor owns the accounting entry.
    storage->accounting = accounting_;
    storage->label = std::move(label);
    storage->words = words;
    storage->shard_words = std::max<std::uint64_t>(binding_words / stride_words * stride_words, 1);

    const std::uint64_t shard_count = words == 0 ? 1 : (words + storage->shard_words - 1) / storage->shard_words;
    for (std::uint64_t s = 0; s < shard_count; ++s) {
        const std::uint64_t n = std::min(storage->shard_words, words - std::min(words, s * storage->shard_words));
        // calloc leaves untouched pages unbacked, so large accounted-only
        // buffers stay cheap.
        auto* p = static_cast<std::uint32_t*>(std::calloc(std::max<std::uint64_t>(n, 1), 4));
        if (!p) throw Error(Errc::OutOfDeviceMemory, storage->label + ": host allocation failed");
        storage->shards.emplace_back(p);
        storage->shard_ptrs.push_back(p);
    }
    return Buffer(std::move(storage));
}

Texture Device::create_texture(std::string label, std::uint32_t width, std::uint32_t height) {
    Texture t;
    t.width = width;
    t.height = height;
    t.pixels = create_buffer(std::move(label), static_cast<std::uint64_t>(width) * height);
    return t;
}

void Device::write_buffer(const Buffer& buffer, std::uint64_t word_offset, std::span<const std::uint32_t> words) {
    if (lost_) throw Error(Errc::DeviceLost, "device lost");
    if (word_offset + words.size() > buffer.size_words())
        throw Error(Errc::CapacityExceeded, "write past the end of " + buffer.label());
    const BufferView v = buffer.view();
    for (std::size_t i = 0; i < words.size(); ++i) v[word_offset + i] = words[i];
}

std::vector<std::uint32_t> Device::read_buffer(const Buffer& buffer, std::uint64_t word_offset,
                                               std::optional<std::uint64_t> count) {
    if (lost_) throw Error(Errc::DeviceLost, "device lost");
    const std::uint64_t n = count.value_or(buffer.size_words() - std::min(word_offset, buffer.size_words()));
    if (word_offset + n > buffer.size_words())
        throw Error(Errc::CapacityExceeded, "read past the end of " + buffer.label());
    const BufferView v = buffer.view();
    std::vector<std::uint32_t> out(n);
    for (std::uint64_t i = 0; i < n; ++i) out[i] = v[word_offset + i];
    return out;
}

void Device::submit(CommandEncoder& encoder) {
    if (lost_) throw Error(Errc::DeviceLost, "device lost");
    for (auto& cmd : encoder.commands_) cmd.run(*this);
    encoder.commands_.clear();
}

std::uint64_t Device::accounted_bytes() const {
    std::lock_guard lock(accounting_->mutex);
    return accounting_->total;
}

MemoryReport Device::memory_report() const {
    std::lock_guard lock(accounting_->mutex);
    MemoryReport r;
    for (const auto& [id, entry] : accounting_->live) r.entries.push_back(entry);
    r.total_bytes = accounting_->total;
    return r;
}

void Device::run_dispatch(const std::string& label, const ComputeKernel& kernel, std::uint64_t workgroups) {
    ++counters_.dispatches;
    counters_.workgroups += workgroups;
    ++dispatch_log_[label];
    const std::uint64_t serial = dispatch_serial_++;
    if (workgroups == 0) return;
    if (workgroups > 0xFFFFFFFFull) throw Error(Errc::UnsupportedDevice, label + ": too many workgroups");
    const auto count = static_cast<std::uint32_t>(workgroups);

    switch (desc_.schedule) {
    case Schedule::InOrder:
        for (std::uint32_t g = 0; g < count; ++g) kernel({g, count});
        return;
    case Schedule::Reverse:
        for (std::uint32_t g = count; g-- > 0;) kernel({g, count});
        return;
    case Schedule::Shuffled: {
        std::vector<std::uint32_t> order(count);
        std::iota(order.begin(), order.end(), 0u);
        std::mt19937_64 rng(desc_.shuffle_seed ^ (serial * 0x9E3779B97F4A7C15ull));
        std::shuffle(order.begin(), order.end(), rng);
        for (auto g : order) kernel({g, count});
        return;
    }
    case Schedule::Parallel: {
        const std::uint32_t threads = std::min<std::uint32_t>(desc_.threads, count);
        if (threads <= 1) {
            for (std::uint32_t g = 0; g < count; ++g) kernel({g, count});
            return;
        }
        std::atomic<std::uint32_t> next{0};
        auto worker = [&] {
            for (std::uint32_t g = next.fetch_add(1); g < count; g = next.fetch_add(1)) kernel({g, count});
        };
        std::vector<std::jthread> pool;
        pool.reserve(threads - 1);
        for (std::uint32_t t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
        return;
    }
    }
}

void CommandEncoder::dispatch(std::string label, ComputeKernel kernel, std::uint32_t workgroups) {
    commands_.push_back({label, [label, kernel = std::move(kernel), workgroups](Device& d) {
                             d.run_dispatch(label, kernel, workgroups);
                         }});
}

void CommandEncoder::dispatch_indirect(std::string label, ComputeKernel kernel, Buffer args, std::uint64_t offset) {
    if (offset + 3 > args.size_words()) throw Error(Errc::CapacityExceeded, label + ": indirect args out of range");
    commands_.push_back({label, [label, kernel = std::move(kernel), args = std::move(args), offset](Device& d) {
                             const BufferView a = args.view();
                             const std::uint64_t groups = static_cast<std::uint64_t>(a[offset]) * a[offset + 1] * a[offset + 2];
                             d.run_dispatch(label, kernel, groups);
                         }});
}

void CommandEncoder::write_buffer(Buffer buffer, std::uint64_t word_offset, std::vector<std::uint32_t> words) {
    if (word_offset + words.size() > buffer.size_words())
        throw Error(Errc::CapacityExceeded, "write past the end of " + buffer.label());
    commands_.push_back({"write_buffer", [buffer = std::move(buffer), word_offset, words = std::move(words)](Device&) {
                             const BufferView v = buffer.view();
                             for (std::size_t i = 0; i < words.size(); ++i) v[word_offset + i] = words[i];
                         }});
}

void CommandEncoder::write_timestamp(QuerySet& queries, std::uint32_t index) {
    if (index >= queries.count()) throw Error(Errc::CapacityExceeded, "timestamp index out of range");
    commands_.push_back({"timestamp", [q = &queries, index](Device& d) {
                             if (!d.desc().timestamps)
                                 throw Error(Errc::UnsupportedDevice, "adapter lacks timestamp queries");
                             q->ticks_[index] = device_clock_ns();
                         }});
}

void CommandEncoder::clear_texture(Texture target, std::array<float, 4> color) {
    commands_.push_back({"clear", [target = std::move(target), color](Device&) {
                             std::uint32_t word = 0;
                             for (int c = 0; c < 4; ++c) {
                                 const float x = std::clamp(color[c], 0.0f, 1.0f);
                                 word |= static_cast<std::uint32_t>(x * 255.0f + 0.5f) << (8 * c);
                             }
                             const BufferView v = target.pixels.view();
                             for (std::uint64_t i = 0; i < v.size(); ++i) v[i] = word;
                         }});
}

void CommandEncoder::draw(Texture target, RenderPipeline pipeline, std::uint32_t vertex_count,
                          std::uint32_t instance_count) {
    commands_.push_back({"draw", [target = std::move(target), pipeline = std::move(pipeline), vertex_count,
                                  instance_count](Device& d) { d.run_draw(target, pipeline, vertex_count, instance_count); }});
}

void CommandEncoder::draw_indirect(Texture target, RenderPipeline pipeline, Buffer args, std::uint64_t offset) {
    if (offset + 4 > args.size_words()) throw Error(Errc::CapacityExceeded, "draw args out of range");
    commands_.push_back({"draw_indirect", [target = std::move(target), pipeline = std::move(pipeline),
                                           args = std::move(args), offset](Device& d) {
                             const BufferView a = args.view();
                             d.run_draw(target, pipeline, a[offset], a[offset + 1]);
                         }});
}

void CommandEncoder::copy_texture_to_buffer(Texture src, Buffer dst, std::uint32_t row_pitch_words) {
    if (row_pitch_words < src.width ||
        static_cast<std::uint64_t>(row_pitch_words) * src.height > dst.size_words())
        throw Error(Errc::CapacityExceeded, "readback buffer too small");
    commands_.push_back({"copy", [src = std::move(src), dst = std::move(dst), row_pitch_words](Device&) {
                             const BufferView s = src.pixels.view();
                             const BufferView t = dst.view();
                             for (std::uint32_t y = 0; y < src.height; ++y) {
                                 for (std::uint32_t x = 0; x < src.width; ++x) {
                                     t[static_cast<std::uint64_t>(y) * row_pitch_words + x] =
                                         s[static_cast<std::uint64_t>(y) * src.width + x];
                                 }
                             }
                         }});
}

} // namespace splat::gpu
