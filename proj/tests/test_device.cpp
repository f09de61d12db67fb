#include "splat/error.hpp"
#include "splat/gpu/device.hpp"
#include "splat/gpu/kernel.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

#include <cstdlib>
#include <numeric>

using namespace splat;
using namespace splat::gpu;

namespace {

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::FileError;
}

/// Pipeline drawing an axis-aligned rectangle in pixel coordinates with a
/// constant color.
RenderPipeline rect(double x0, double y0, double x1, double y1, float w, float h, std::array<float, 4> rgba) {
    RenderPipeline p;
    p.vertex = [=](std::uint32_t v, std::uint32_t) {
        const double x = (v & 1) ? x1 : x0, y = (v & 2) ? y1 : y0;
        VertexOutput o;
        o.position = {static_cast<float>(2 * x / w - 1), static_cast<float>(1 - 2 * y / h), 0, 1};
        return o;
    };
    p.fragment = [=](const FragmentInput&) { return FragmentOutput{rgba, false}; };
    return p;
}

} // namespace

TEST_CASE("buffers are zeroed, sharded and accounted") {
    DeviceDesc desc = fixture::serial();
    desc.limits.max_storage_binding_size = 64; // 16 words per shard
    desc.limits.max_buffer_size = 4096;
    desc.limits.memory_budget = 8192;
    Device d(desc);
    {
        Buffer b = d.create_buffer("test.a", 100);
        CHECK(b.shard_count() == 7);
        CHECK(d.accounted_bytes() == 400);
        std::vector<std::uint32_t> words(100);
        std::iota(words.begin(), words.end(), 1u);
        CHECK(d.read_buffer(b) == std::vector<std::uint32_t>(100, 0));
        d.write_buffer(b, 0, words);
        CHECK(d.read_buffer(b) == words);
        CHECK(b.view()[17] == 18);

        Buffer strided = d.create_buffer("test.b", 30, 3); // 3-word elements never straddle shards
        CHECK(strided.shard_count() == 2); // 15-word shards
        CHECK(d.accounted_bytes() == 520);
        const MemoryReport r = d.memory_report();
        CHECK(r.entries.size() == 2);
        CHECK(r.entries[0].label == "test.a");
        CHECK(r.total_bytes == 520);

        CHECK(code_of([&] { d.create_buffer("too.big", 1025); }) == Errc::ExceedsBufferLimit);
        CHECK(code_of([&] { d.create_buffer("bad.stride", 32, 17); }) == Errc::ExceedsBufferLimit);
        Buffer c = d.create_buffer("test.c", 1024);
        CHECK(code_of([&] { d.create_buffer("test.d", 1024); }) == Errc::OutOfDeviceMemory);
        CHECK(code_of([&] { d.read_buffer(b, 90, 20); }) == Errc::CapacityExceeded);
    }
    CHECK(d.accounted_bytes() == 0);
    CHECK(d.memory_report().entries.empty());
}

TEST_CASE("schedules visit every workgroup once") {
    for (Schedule s : {Schedule::InOrder, Schedule::Reverse, Schedule::Shuffled, Schedule::Parallel}) {
        DeviceDesc desc = fixture::serial(s);
        desc.threads = 3;
        Device d(desc);
        Buffer hits = d.create_buffer("test.hits", 1000);
        Buffer order = d.create_buffer("test.order", 1000);
        Buffer next = d.create_buffer("test.next", 1);
        const BufferView h = hits.view(), o = order.view(), n = next.view();
        CommandEncoder enc;
        enc.dispatch(
            "visit",
            [=](WorkgroupId wg) {
                h.atomic_fetch_add(wg.index, 1);
                o[n.atomic_fetch_add(0, 1)] = wg.index;
            },
            1000);
        d.submit(enc);
        const auto hv = d.read_buffer(hits);
        CHECK(std::all_of(hv.begin(), hv.end(), [](std::uint32_t x) { return x == 1; }));
        const auto ov = d.read_buffer(order);
        if (s == Schedule::InOrder) CHECK(ov[0] == 0);
        if (s == Schedule::Reverse) CHECK(ov[0] == 999);
        CHECK(d.counters().workgroups == 1000);
        CHECK(d.dispatch_log().at("visit") == 1);
    }
}

TEST_CASE("indirect dispatch reads its arguments at execution time") {
    Device d(fixture::serial());
    Buffer args = d.create_buffer("test.args", 3);
    Buffer counter = d.create_buffer("test.counter", 1);
    const BufferView a = args.view(), c = counter.view();
    CommandEncoder enc;
    enc.dispatch(
        "write_args",
        [=](WorkgroupId) {
            a[0] = 4;
            a[1] = 3;
            a[2] = 2;
        },
        1);
    enc.dispatch_indirect("count", [=](WorkgroupId) { c.atomic_fetch_add(0, 1); }, args, 0);
    d.submit(enc);
    CHECK(d.read_buffer(counter)[0] == 24);
}

TEST_CASE("workgroup scan") {
    SharedArray data{};
    for (std::uint32_t i = 0; i < kWorkgroupSize; ++i) data[i] = i % 7;
    const SharedArray in = data;
    const std::uint32_t total = workgroup_exclusive_scan(data);
    std::uint32_t acc = 0;
    for (std::uint32_t i = 0; i < kWorkgroupSize; ++i) {
        CHECK(data[i] == acc);
        acc += in[i];
    }
    CHECK(total == acc);
}

TEST_CASE("rasterizer covers each pixel of a quad exactly once") {
    Device d(fixture::serial());
    const std::uint32_t w = 37, h = 23;
    Texture t = d.create_texture("test.target", w, h);
    CommandEncoder enc;
    enc.clear_texture(t, {0, 0, 0, 0});
    // half alpha: a pixel hit twice would come out at 191 instead of 128
    enc.draw(t, rect(0, 0, w, h, w, h, {1, 1, 1, 0.5f}), 4, 1);
    d.submit(enc);
    const auto px = d.read_buffer(t.pixels);
    CHECK(std::all_of(px.begin(), px.end(), [](std::uint32_t p) { return p == 0x80808080u; }));
    CHECK(d.counters().fragments == w * h);
    CHECK(d.counters().vertices == 4);
}

TEST_CASE("top-left rule on shared and half-pixel edges") {
    Device d(fixture::serial());
    Texture t = d.create_texture("test.target", 8, 8);
    CommandEncoder enc;
    enc.clear_texture(t, {0, 0, 0, 1});
    // two abutting rectangles; the shared edge x = 4 falls between centres
    enc.draw(t, rect(1.5, 1.5, 4.5, 4.5, 8, 8, {1, 0, 0, 1}), 4, 1);
    enc.draw(t, rect(4.5, 1.5, 6.5, 4.5, 8, 8, {0, 1, 0, 1}), 4, 1);
    d.submit(enc);
    const auto px = d.read_buffer(t.pixels);
    auto at = [&](int x, int y) { return px[y * 8 + x]; };
    // pixel centre (1.5, 1.5) lies on the left/top edges -> drawn
    CHECK(at(1, 1) == 0xFF0000FFu);
    // centre (4.5, y) sits on the shared edge: owned by the right rectangle
    CHECK(at(4, 2) == 0xFF00FF00u);
    // bottom/right edges at 4.5 exclude centre row 4
    CHECK(at(2, 4) == 0xFF000000u);
    CHECK(at(6, 2) == 0xFF000000u);
    CHECK(d.counters().fragments == 9 + 6);
}

TEST_CASE("draw_indirect, discard and readback pitch") {
    Device d(fixture::serial());
    Texture t = d.create_texture("test.target", 3, 2);
    Buffer args = d.create_buffer("test.args", 4);
    d.write_buffer(args, 0, std::vector<std::uint32_t>{4, 0, 0, 0});
    Buffer rb = d.create_buffer("test.readback", 64 * 2);
    RenderPipeline p = rect(0, 0, 3, 2, 3, 2, {1, 1, 1, 1});
    p.fragment = [](const FragmentInput& in) { return FragmentOutput{{1, 1, 1, 1}, in.x == 1}; };
    CommandEncoder enc;
    enc.clear_texture(t, {0, 0, 1, 1});
    enc.draw_indirect(t, p, args, 0); // zero instances: legal no-op
    enc.copy_texture_to_buffer(t, rb, 64);
    d.submit(enc);
    CHECK(d.read_buffer(rb)[64 + 2] == 0xFFFF0000u);
    CHECK(d.counters().fragments == 0);

    d.write_buffer(args, 0, std::vector<std::uint32_t>{4, 1, 0, 0});
    CommandEncoder again;
    again.draw_indirect(t, p, args, 0);
    again.copy_texture_to_buffer(t, rb, 64);
    d.submit(again);
    const auto out = d.read_buffer(rb);
    CHECK(out[0] == 0xFFFFFFFFu);
    CHECK(out[1] == 0xFFFF0000u); // discarded column keeps the clear color
    CHECK(out[64 + 2] == 0xFFFFFFFFu);
    CHECK(d.counters().fragments == 6);

    CommandEncoder small;
    CHECK_THROWS_AS(small.copy_texture_to_buffer(t, rb, 2), Error);
}

TEST_CASE("timestamps, device loss and environment override") {
    DeviceDesc no_ts = fixture::serial();
    no_ts.timestamps = false;
    Device d(no_ts);
    CHECK_FALSE(d.adapter().timestamps);
    QuerySet q(2);
    CommandEncoder enc;
    enc.write_timestamp(q, 0);
    CHECK(code_of([&] { d.submit(enc); }) == Errc::UnsupportedDevice);

    Device ok(fixture::serial());
    CommandEncoder e2;
    e2.write_timestamp(q, 0);
    e2.write_timestamp(q, 1);
    ok.submit(e2);
    CHECK(q.value(1) >= q.value(0));
    ok.lose();
    CommandEncoder e3;
    CHECK(code_of([&] { ok.submit(e3); }) == Errc::DeviceLost);

    ::setenv("SPLAT_BACKEND_OVERRIDE", "reverse", 1);
    CHECK(desc_from_environment().schedule == Schedule::Reverse);
    ::setenv("SPLAT_BACKEND_OVERRIDE", "parallel:3", 1);
    CHECK(desc_from_environment().threads == 3);
    ::setenv("SPLAT_BACKEND_OVERRIDE", "quantum", 1);
    CHECK(code_of([] { desc_from_environment(); }) == Errc::UnsupportedDevice);
    ::unsetenv("SPLAT_BACKEND_OVERRIDE");
    CHECK(desc_from_environment(fixture::serial(Schedule::Shuffled)).schedule == Schedule::Shuffled);
}
