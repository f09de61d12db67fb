#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

/// Software compute/graphics device.
///
/// Models the execution contract of a portable GPU API: storage buffers of
/// 32-bit words, compute dispatches made of independent workgroups with
/// shared memory and barriers, indirect dispatch/draw arguments read from
/// device buffers, command submission order, timestamp queries and an
/// instanced-draw rasterizer with fixed-function over blending.
///
/// Workgroups inside one dispatch may run in any order (or concurrently),
/// selected by Schedule. Nothing orders them except dispatch boundaries,
/// so kernels that are correct here do not depend on inter-workgroup
/// forward progress.
namespace splat::gpu {

inline constexpr std::uint32_t kWorkgroupSize = 256;

struct Limits {
    /// Largest logical buffer.
    std::uint64_t max_buffer_size = 4ull << 30;
    /// Largest single storage binding; bigger buffers are sharded.
    std::uint64_t max_storage_binding_size = 128ull << 20;
    /// Total bytes the device will account before OutOfDeviceMemory.
    std::uint64_t memory_budget = 8ull << 30;
};

enum class Schedule {
    InOrder,  // serial, workgroup 0 first
    Reverse,  // serial, last workgroup first
    Shuffled, // serial, seeded random order per dispatch
    Parallel, // worker threads pull workgroups concurrently
};

struct DeviceDesc {
    Schedule schedule = Schedule::Parallel;
    std::uint32_t threads = 0; // 0 = hardware concurrency
    std::uint64_t shuffle_seed = 1;
    bool timestamps = true;
    Limits limits{};
};

/// Reads SPLAT_BACKEND_OVERRIDE (serial|reverse|shuffled|parallel[:threads])
/// and applies it on top of `base`.
DeviceDesc desc_from_environment(DeviceDesc base = {});

struct AdapterInfo {
    std::string name;
    std::string backend;
    bool timestamps = false;
};

struct Counters {
    std::uint64_t dispatches = 0;
    std::uint64_t workgroups = 0;
    std::uint64_t draws = 0;
    std::uint64_t vertices = 0;
    std::uint64_t fragments = 0; // fragment shader invocations, including discards
};

struct MemoryEntry {
    std::string label;
    std::uint64_t bytes = 0;
};

struct MemoryReport {
    std::vector<MemoryEntry> entries;
    std::uint64_t total_bytes = 0;
};

class Device;
namespace detail {
struct Accounting;
struct BufferStorage;
} // namespace detail

/// Word-addressed view used inside kernels. Cheap to copy.
class BufferView {
  public:
    BufferView() = default;

    std::uint64_t size() const noexcept { return size_; }

    std::uint32_t& operator[](std::uint64_t i) const noexcept {
        if (single_) return single_[i];
        return shards_[i / shard_words_][i % shard_words_];
    }
    float f32(std::uint64_t i) const noexcept;
    void set_f32(std::uint64_t i, float v) const noexcept;

    /// The only read-modify-write available to kernels.
    std::uint32_t atomic_fetch_add(std::uint64_t i, std::uint32_t value) const noexcept;

  private:
    friend class Buffer;
    std::uint32_t* single_ = nullptr;
    std::uint32_t* const* shards_ = nullptr;
    std::uint64_t shard_words_ = 0;
    std::uint64_t size_ = 0;
};

/// Shared handle to device memory; accounting is released when the last
/// handle goes away.
class Buffer {
  public:
    Buffer() = default;

    bool valid() const noexcept { return storage_ != nullptr; }
    std::uint64_t size_words() const noexcept;
    std::uint64_t size_bytes() const noexcept { return size_words() * 4; }
    std::uint64_t shard_count() const noexcept;
    const std::string& label() const noexcept;
    BufferView view() const noexcept;

  private:
    friend class Device;
    explicit Buffer(std::shared_ptr<detail::BufferStorage> storage) : storage_(std::move(storage)) {}
    std::shared_ptr<detail::BufferStorage> storage_;
};

/// RGBA8 color target: one word per pixel, R in the low byte.
struct Texture {
    Buffer pixels;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
};

struct WorkgroupId {
    std::uint32_t index = 0;
    std::uint32_t count = 0;
};

using ComputeKernel = std::function<void(WorkgroupId)>;

struct VertexOutput {
    std::array<float, 4> position{}; // clip space
    std::array<float, 4> varyings{}; // linearly interpolated
    std::uint32_t flat = 0;          // passed through from the provoking vertex
};

struct FragmentInput {
    std::array<float, 4> varyings{};
    std::uint32_t flat = 0;
    std::uint32_t x = 0;
    std::uint32_t y = 0;
};

struct FragmentOutput {
    std::array<float, 4> rgba{};
    bool discard = false;
};

/// Triangle-strip pipeline with src-alpha / one-minus-src-alpha blending on
/// color and one / one-minus-src-alpha on alpha; no depth test.
struct RenderPipeline {
    std::function<VertexOutput(std::uint32_t vertex, std::uint32_t instance)> vertex;
    std::function<FragmentOutput(const FragmentInput&)> fragment;
};

class QuerySet {
  public:
    explicit QuerySet(std::uint32_t count) : ticks_(count, 0) {}
    std::uint32_t count() const noexcept { return static_cast<std::uint32_t>(ticks_.size()); }
    /// Nanoseconds on the device clock.
    std::uint64_t value(std::uint32_t index) const { return ticks_.at(index); }

  private:
    friend class CommandEncoder;
    std::vector<std::uint64_t> ticks_;
};

class CommandEncoder {
  public:
    void dispatch(std::string label, ComputeKernel kernel, std::uint32_t workgroups);
    /// Workgroup count = args[offset] * args[offset+1] * args[offset+2],
    /// read when the command executes.
    void dispatch_indirect(std::string label, ComputeKernel kernel, Buffer args, std::uint64_t word_offset);
    void write_buffer(Buffer buffer, std::uint64_t word_offset, std::vector<std::uint32_t> words);
    void write_timestamp(QuerySet& queries, std::uint32_t index);
    void clear_texture(Texture target, std::array<float, 4> color);
    /// Instance count and vertex count come from args
    /// [vertex_count, instance_count, first_vertex, first_instance].
    void draw_indirect(Texture target, RenderPipeline pipeline, Buffer args, std::uint64_t word_offset);
    void draw(Texture target, RenderPipeline pipeline, std::uint32_t vertex_count, std::uint32_t instance_count);
    /// Copies rows into `dst` with `row_pitch_words` stride.
    void copy_texture_to_buffer(Texture src, Buffer dst, std::uint32_t row_pitch_words);

    std::size_t size() const noexcept { return commands_.size(); }

  private:
    friend class Device;
    struct Command {
        std::string label;
        std::function<void(Device&)> run;
    };
    std::vector<Command> commands_;
};

class Device {
  public:
    explicit Device(DeviceDesc desc = {});
    ~Device();
    Device(const Device&) = delete;
    Device& operator=(const Device&) = delete;

    const DeviceDesc& desc() const noexcept { return desc_; }
    const Limits& limits() const noexcept { return desc_.limits; }
    AdapterInfo adapter() const;

    /// Zero-initialized buffer. `stride_words` keeps elements from
    /// straddling storage shards. Throws ExceedsBufferLimit or
    /// OutOfDeviceMemory.
    Buffer create_buffer(std::string label, std::uint64_t words, std::uint32_t stride_words = 1);
    Texture create_texture(std::string label, std::uint32_t width, std::uint32_t height);

    void write_buffer(const Buffer& buffer, std::uint64_t word_offset, std::span<const std::uint32_t> words);
    std::vector<std::uint32_t> read_buffer(const Buffer& buffer, std::uint64_t word_offset = 0,
                                           std::optional<std::uint64_t> count = std::nullopt);

    /// Executes the commands in order. Throws DeviceLost after lose().
    void submit(CommandEncoder& encoder);

    std::uint64_t accounted_bytes() const;
    MemoryReport memory_report() const;

    const Counters& counters() const noexcept { return counters_; }
    void reset_counters() noexcept {
        counters_ = {};
        dispatch_log_.clear();
    }
    /// Dispatch count per kernel label since the last reset.
    const std::map<std::string, std::uint64_t>& dispatch_log() const noexcept { return dispatch_log_; }

    /// Test hook: every later submit fails with DeviceLost.
    void lose() noexcept { lost_ = true; }
    bool is_lost() const noexcept { return lost_; }

  private:
    friend class CommandEncoder;
    void run_dispatch(const std::string& label, const ComputeKernel& kernel, std::uint64_t workgroups);
    void run_draw(const Texture& target, const RenderPipeline& pipeline, std::uint32_t vertex_count,
                  std::uint32_t instance_count);

    DeviceDesc desc_;
    std::shared_ptr<detail::Accounting> accounting_;
    Counters counters_{};
    std::map<std::string, std::uint64_t> dispatch_log_;
    std::uint64_t dispatch_serial_ = 0;
    bool lost_ = false;
};

/// Nanoseconds of the device clock (steady clock on the software device).
std::uint64_t device_clock_ns();

} // namespace splat::gpu
