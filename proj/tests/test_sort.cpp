#include "splat/bench.hpp"
#include "splat/error.hpp"
#include "splat/gpu/sort.hpp"
#include "splat/reference.hpp"

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <numeric>
#include <set>

using namespace splat;
using namespace splat::gpu;

namespace {

std::vector<std::uint32_t> iota(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    std::iota(v.begin(), v.end(), 0u);
    return v;
}

/// Runs the argument, pad and histogram kernels of pass `pass` on `keys`.
struct Staged {
    Device device{fixture::serial()};
    RadixSorter sorter;
    Buffer count;

    Staged(const std::vector<std::uint32_t>& keys, std::uint64_t capacity) : sorter(device, capacity) {
        count = device.create_buffer("test.count", 1);
        const std::uint32_t n = static_cast<std::uint32_t>(keys.size());
        device.write_buffer(count, 0, std::span<const std::uint32_t>(&n, 1));
        device.write_buffer(sorter.keys(), 0, keys);
        device.write_buffer(sorter.payload(), 0, iota(keys.size()));
        CommandEncoder enc;
        sorter.encode_args(enc, count, 0);
        sorter.encode_pad(enc);
        sorter.encode_histogram(enc, 0);
        device.submit(enc);
    }
};

} // namespace

TEST_CASE("scan_level_lengths") {
    CHECK(scan_level_lengths(0) == std::vector<std::uint64_t>{0});
    CHECK(scan_level_lengths(256) == std::vector<std::uint64_t>{256});
    CHECK(scan_level_lengths(257) == std::vector<std::uint64_t>{257, 2});
    CHECK(scan_level_lengths(256ull * 4097) == std::vector<std::uint64_t>{256ull * 4097, 4097, 17});
}

TEST_CASE("hierarchical scan") {
    Device device(fixture::serial());
    SUBCASE("hand example") {
        HierarchicalScan scan(device, 8, "test.scan");
        Buffer data = device.create_buffer("test.data", 8);
        device.write_buffer(data, 0, std::vector<std::uint32_t>{3, 1, 7, 0, 4, 1, 6, 3});
        scan.run(device, data, 8);
        CHECK(device.read_buffer(data) == std::vector<std::uint32_t>{0, 3, 4, 11, 11, 15, 16, 22});
    }
    SUBCASE("zeros stay zero") {
        HierarchicalScan scan(device, 100000, "test.scan");
        Buffer data = device.create_buffer("test.data", 100000);
        scan.run(device, data, 100000);
        const auto out = device.read_buffer(data);
        CHECK(std::all_of(out.begin(), out.end(), [](std::uint32_t x) { return x == 0; }));
    }
    SUBCASE("three levels, shorter runtime length, linearity") {
        const std::uint64_t len = 256ull * 4097;
        HierarchicalScan scan(device, len, "test.scan");
        CHECK(scan.levels() == 3);
        CHECK(scan.dispatch_count() == 5);
        CHECK(scan.aux_bytes() == 4 * (4097 + 17));
        fixture::Rng rng(1);
        std::vector<std::uint32_t> a(len), b(len), ab(len);
        for (std::size_t i = 0; i < len; ++i) {
            a[i] = static_cast<std::uint32_t>(rng.below(1000));
            b[i] = static_cast<std::uint32_t>(rng.below(1000));
            ab[i] = a[i] + b[i];
        }
        auto run = [&](const std::vector<std::uint32_t>& in, std::uint64_t n) {
            Buffer data = device.create_buffer("test.data", len);
            device.write_buffer(data, 0, in);
            scan.run(device, data, n);
            return device.read_buffer(data);
        };
        const auto sa = run(a, len), sb = run(b, len), sab = run(ab, len);
        CHECK(sa == oracle::exclusive_scan(a));
        for (std::size_t i = 0; i < len; ++i) REQUIRE(sab[i] == sa[i] + sb[i]);

        const std::uint64_t n = 70001; // elements beyond the runtime length are untouched
        const auto partial = run(a, n);
        const auto expect = oracle::exclusive_scan(std::vector<std::uint32_t>(a.begin(), a.begin() + n));
        CHECK(std::equal(expect.begin(), expect.end(), partial.begin()));
        CHECK(std::equal(a.begin() + n, a.end(), partial.begin() + n));
    }
    SUBCASE("length above capacity is rejected") {
        HierarchicalScan scan(device, 16, "test.scan");
        Buffer data = device.create_buffer("test.data", 32);
        CHECK_THROWS_AS(scan.run(device, data, 17), Error);
    }
}

TEST_CASE("sort plan and dispatch counts") {
    for (std::uint64_t n : {1ull, 256ull, 257ull, 65536ull, 65537ull, 1000000ull}) {
        const SortPlan p = plan_sort(n);
        const std::uint64_t tiles = (n + 255) / 256;
        CHECK(p.max_tiles == tiles);
        CHECK(p.padded_capacity == tiles * 256);
        std::uint32_t levels = 1;
        for (std::uint64_t len = tiles * 256; len > 256; len = (len + 255) / 256) ++levels;
        CHECK(p.scan_levels == levels);
        CHECK(p.dispatches_per_pass == 2 * levels + 1);
        CHECK(p.dispatches_total == 2 + 4 * (2 * levels + 1));
        CHECK(p.histogram_bytes == 1024 * tiles);

        Device device(fixture::serial());
        const RadixSorter sorter(device, n);
        std::vector<std::uint32_t> keys(std::min<std::uint64_t>(n, 3000)), pay(keys.size());
        device.reset_counters();
        sorter.sort(device, keys, pay);
        CHECK(device.counters().dispatches == p.dispatches_total);
        CHECK(device.dispatch_log().at("sort.scatter") == 4);
        CHECK(device.dispatch_log().at("sort.histogram") == 4);
        CHECK(device.dispatch_log().at("sort.scan.upsweep") == 4 * levels);
    }
    // linear work: workgroups per pass scale with tiles
    Device device(fixture::serial());
    const RadixSorter big(device, 1 << 20);
    std::vector<std::uint32_t> keys(1 << 16), pay(1 << 16);
    device.reset_counters();
    big.sort(device, keys, pay);
    const std::uint64_t tiles = (1 << 16) / 256;
    // The capacity fixes three scan levels (2^20, 4096, 16 entries); at runtime
    // they hold 256*tiles, tiles and 1 entries. Per pass: tiles (histogram) +
    // tiles (scatter) + upsweep (tiles + 1 + 1) + downsweep (1 + tiles).
    CHECK(device.counters().workgroups == 1 + 0 + 4 * (tiles + tiles + (tiles + 1 + 1) + (1 + tiles)));
}

TEST_CASE("build args from a device count") {
    Device device(fixture::serial());
    const RadixSorter sorter(device, 4096);
    Buffer count = device.create_buffer("test.count", 1);
    for (std::uint32_t n : {0u, 5u, 256u, 257u, 4096u, 9999u}) {
        device.write_buffer(count, 0, std::vector<std::uint32_t>{n});
        CommandEncoder enc;
        sorter.encode_args(enc, count, 0);
        device.submit(enc);
        const auto a = device.read_buffer(sorter.args());
        const std::uint32_t clamped = std::min(n, 4096u);
        const std::uint32_t tiles = (clamped + 255) / 256;
        CHECK(a[RadixSorter::kArgCount] == clamped);
        CHECK(a[RadixSorter::kArgTiles] == tiles);
        CHECK(a[RadixSorter::kArgPadded] == tiles * 256);
        CHECK(a[RadixSorter::kArgPadDispatch] == (tiles * 256 > clamped ? 1u : 0u));
        CHECK(a[RadixSorter::kArgTileDispatch] == tiles);
        CHECK(a[RadixSorter::kArgScan] == tiles * 256);
    }
}

TEST_CASE("pad writes sentinels only into the tail") {
    const std::vector<std::uint32_t> keys{9, 8, 7, 6, 5};
    Staged s(keys, 1024);
    const auto k = s.device.read_buffer(s.sorter.keys());
    CHECK(std::equal(keys.begin(), keys.end(), k.begin()));
    CHECK(std::count(k.begin(), k.end(), kSentinelKey) == 251);
    CHECK(std::all_of(k.begin() + 5, k.begin() + 256, [](std::uint32_t x) { return x == kSentinelKey; }));
    CHECK(std::all_of(k.begin() + 256, k.end(), [](std::uint32_t x) { return x == 0; }));

    Staged full(std::vector<std::uint32_t>(512, 3), 512);
    CHECK(full.device.dispatch_log().count("sort.pad") == 1);
    CHECK(full.device.counters().workgroups == 1 + 0 + 2); // args, no pad groups, 2 histogram tiles
}

TEST_CASE("digit-major histogram") {
    SUBCASE("single tile of digit 7") {
        Staged s(std::vector<std::uint32_t>(256, 0x07), 256);
        const auto h = s.device.read_buffer(s.sorter.histogram());
        CHECK(h[7] == 256);
        CHECK(std::accumulate(h.begin(), h.end(), 0ull) == 256);
    }
    SUBCASE("two tiles against a hand tally") {
        std::vector<std::uint32_t> keys(300, 0x100); // digit 0 in pass 0
        keys[0] = 3;
        keys[1] = 3;
        keys[2] = 0x1FF;
        keys[299] = 3;
        keys[298] = 0xFE;
        Staged s(keys, 512);
        const auto h = s.device.read_buffer(s.sorter.histogram());
        const std::uint32_t t = 2;
        CHECK(h[3 * t + 0] == 2);
        CHECK(h[3 * t + 1] == 1);
        CHECK(h[255 * t + 0] == 1);
        CHECK(h[254 * t + 1] == 1);
        CHECK(h[0 * t + 0] == 253);
        CHECK(h[0 * t + 1] == 42);
        CHECK(h[255 * t + 1] == 212); // sentinels
        CHECK(std::accumulate(h.begin(), h.end(), 0ull) == 512);
    }
    SUBCASE("scanned histogram equals base_d + prefix_wg") {
        fixture::Rng rng(9);
        for (std::size_t n : {1ull, 255ull, 600ull, 2048ull}) {
            std::vector<std::uint32_t> keys(n);
            for (auto& k : keys) k = static_cast<std::uint32_t>(rng.below(1ull << 32));
            Staged s(keys, 2048);
            const std::size_t tiles = (n + 255) / 256;
            std::vector<std::uint32_t> padded = keys;
            padded.resize(tiles * 256, kSentinelKey);
            const auto tally = oracle::digit_tally(padded, 0, tiles);
            auto h = s.device.read_buffer(s.sorter.histogram());
            for (std::uint32_t d = 0; d < 256; ++d)
                for (std::size_t t = 0; t < tiles; ++t) REQUIRE(h[d * tiles + t] == tally[d][t]);
            CommandEncoder enc;
            s.sorter.encode_scan(enc);
            s.device.submit(enc);
            h = s.device.read_buffer(s.sorter.histogram());
            const auto offsets = oracle::digit_offsets(padded, 0, tiles);
            for (std::uint32_t d = 0; d < 256; ++d)
                for (std::size_t t = 0; t < tiles; ++t) REQUIRE(h[d * tiles + t] == offsets[d][t]);
        }
    }
}

TEST_CASE("scatter examples") {
    Device device(fixture::serial());
    const RadixSorter sorter(device, 256);
    std::vector<std::uint32_t> keys{5, 3, 5, 1}, pay = iota(4);
    sorter.sort(device, keys, pay);
    CHECK(keys == std::vector<std::uint32_t>{1, 3, 5, 5});
    CHECK(pay == std::vector<std::uint32_t>{3, 1, 0, 2});

    // digits [1,0,1,1,0]: element 2 has base_1 = 2 and rank 1, so lands at 3
    keys = {1, 0, 1, 1, 0};
    pay = iota(5);
    sorter.sort(device, keys, pay);
    CHECK(pay[3] == 2);

    keys.assign(200, 42);
    pay = iota(200);
    sorter.sort(device, keys, pay);
    CHECK(pay == iota(200));

    keys = {77};
    pay = {0};
    sorter.sort(device, keys, pay);
    CHECK(keys == std::vector<std::uint32_t>{77});
}

TEST_CASE("sort matches the oracle under every schedule") {
    for (Schedule sched : {Schedule::InOrder, Schedule::Reverse, Schedule::Shuffled, Schedule::Parallel}) {
        DeviceDesc desc = fixture::serial(sched);
        desc.threads = 4;
        Device device(desc);
        const RadixSorter sorter(device, 20000);
        for (KeyDistribution d : kAllDistributions) {
            for (std::size_t n : {0ull, 1ull, 255ull, 256ull, 257ull, 4321ull, 20000ull}) {
                auto keys = generate_keys(d, n, 100 + n);
                auto pay = iota(n);
                const auto want = oracle::bucket_sort(keys, pay);
                sorter.sort(device, keys, pay);
                REQUIRE(keys == want.first);
                REQUIRE(pay == want.second);
            }
        }
    }
}

TEST_CASE("sorted tail holds sentinels") {
    Device device(fixture::serial());
    const RadixSorter sorter(device, 1024);
    std::vector<std::uint32_t> keys{0xFFFFFFFFu, 4, 0xFFFFFFFFu}, pay{0, 1, 2};
    sorter.sort(device, keys, pay);
    CHECK(pay == std::vector<std::uint32_t>{1, 0, 2}); // real max keys precede the padding
    const auto tail = device.read_buffer(sorter.payload(), 3, 253);
    CHECK(std::all_of(tail.begin(), tail.end(), [](std::uint32_t p) { return p == kSentinelPayload; }));
}

TEST_CASE("sorter errors") {
    Device device(fixture::serial());
    const RadixSorter sorter(device, 10);
    std::vector<std::uint32_t> k(11), p(11);
    CHECK_THROWS_AS(sorter.sort(device, k, p), Error);
    std::vector<std::uint32_t> k2(3), p2(2);
    CHECK_THROWS_AS(sorter.sort(device, k2, p2), Error);
    try {
        RadixSorter(device, kMaxSortCapacity + 1);
        FAIL("expected CapacityExceeded");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::CapacityExceeded);
    }
}

TEST_CASE("generate_keys") {
    for (KeyDistribution d : kAllDistributions) CHECK(generate_keys(d, 1000, 3) == generate_keys(d, 1000, 3));
    const auto dup = generate_keys(KeyDistribution::DuplicateHeavy, 5000, 1);
    CHECK(std::set<std::uint32_t>(dup.begin(), dup.end()).size() <= 16);
    const auto up = generate_keys(KeyDistribution::Sorted, 5000, 1);
    CHECK(std::is_sorted(up.begin(), up.end()));
    const auto down = generate_keys(KeyDistribution::ReverseSorted, 5000, 1);
    CHECK(std::is_sorted(down.rbegin(), down.rend()));
    CHECK(std::string(distribution_name(KeyDistribution::Uniform)) == "uniform");
}
