#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "pinch/rng.hpp"
#include "pinch/trace.hpp"

using namespace pinch;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    auto dir = fs::temp_directory_path() / "pinch_test_trace";
    fs::create_directories(dir);
    return dir / name;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

const MacAddr kRc = parse_mac("aa:00:00:00:00:01");
const MacAddr kDrone = parse_mac("bb:00:00:00:00:01");

RoleMap test_roles() {
    RoleMap roles;
    roles.rc_addrs = {kRc};
    roles.drone_addrs = {kDrone};
    return roles;
}

PacketRecord pkt(double t, MacAddr src, MacAddr dst, uint32_t size) {
    return {t, src, dst, size};
}

}  // namespace

TEST_CASE("mac parse and format round trip") {
    CHECK(format_mac(parse_mac("aa:bb:cc:dd:ee:ff")) == "aa:bb:cc:dd:ee:ff");
    CHECK(format_mac(parse_mac("AA:BB:CC:DD:EE:0F")) == "aa:bb:cc:dd:ee:0f");
    CHECK(parse_mac("ff:ff:ff:ff:ff:ff") == kBroadcastMac);
    CHECK_THROWS(parse_mac("aa:bb:cc:dd:ee"));
    CHECK_THROWS(parse_mac("aa:bb:cc:dd:ee:fg"));
    CHECK_THROWS(parse_mac("aabbccddeeff0011"));
}

TEST_CASE("load_trace rebases a well-formed file to t=0") {
    auto path = temp_file("basic.csv");
    write_file(path,
               "arrival_time_s,src_mac,dst_mac,size_bytes\n"
               "5.000000,aa:00:00:00:00:01,bb:00:00:00:00:01,156\n"
               "5.020000,bb:00:00:00:00:01,aa:00:00:00:00:01,300\n"
               "5.060000,aa:00:00:00:00:01,bb:00:00:00:00:01,156\n");
    auto records = load_trace(path);
    REQUIRE(records.size() == 3);
    CHECK(records[0].arrival_time == 0.0);
    CHECK(records[1].arrival_time == doctest::Approx(0.02).epsilon(1e-9));
    CHECK(records[2].arrival_time == doctest::Approx(0.06).epsilon(1e-9));
    CHECK(records[1].size == 300);
}

TEST_CASE("load_trace rejects a zero size with the line number") {
    auto path = temp_file("zero_size.csv");
    write_file(path,
               "arrival_time_s,src_mac,dst_mac,size_bytes\n"
               "0.000000,aa:00:00:00:00:01,bb:00:00:00:00:01,156\n"
               "0.020000,aa:00:00:00:00:01,bb:00:00:00:00:01,0\n");
    CHECK_THROWS_WITH_AS(load_trace(path), doctest::Contains(":3:"), std::runtime_error);
}

TEST_CASE("load_trace reports malformed rows with line numbers") {
    auto path = temp_file("malformed.csv");
    write_file(path,
               "arrival_time_s,src_mac,dst_mac,size_bytes\n"
               "0.000000,aa:00:00:00:00:01,bb:00:00:00:00:01,156\n"
               "0.020000,not-a-mac,bb:00:00:00:00:01,156\n");
    CHECK_THROWS_WITH_AS(load_trace(path), doctest::Contains(":3:"), std::runtime_error);

    write_file(path,
               "arrival_time_s,src_mac,dst_mac,size_bytes\n"
               "abc,aa:00:00:00:00:01,bb:00:00:00:00:01,156\n");
    CHECK_THROWS_AS(load_trace(path), std::runtime_error);

    write_file(path, "wrong,header\n");
    CHECK_THROWS_WITH_AS(load_trace(path), doctest::Contains("header"), std::runtime_error);
}

TEST_CASE("load_trace reorder tolerance") {
    auto path = temp_file("reorder.csv");
    write_file(path,
               "arrival_time_s,src_mac,dst_mac,size_bytes\n"
               "0.000000,aa:00:00:00:00:01,bb:00:00:00:00:01,156\n"
               "0.030000,aa:00:00:00:00:01,bb:00:00:00:00:01,156\n"
               "0.020000,aa:00:00:00:00:01,bb:00:00:00:00:01,200\n");
    SUBCASE("strict by default") { CHECK_THROWS_AS(load_trace(path), std::runtime_error); }
    SUBCASE("sorted when within tolerance") {
        auto records = load_trace(path, "canonical", 0.02);
        REQUIRE(records.size() == 3);
        CHECK(records[1].size == 200);
        CHECK(records[1].arrival_time <= records[2].arrival_time);
    }
}

TEST_CASE("load_trace rejects unknown formats") {
    CHECK_THROWS_AS(load_trace(temp_file("basic.csv"), "pcap"), std::invalid_argument);
}

TEST_CASE("save/load round trip is identity up to 1 us") {
    std::vector<PacketRecord> records;
    RngStream rng(7);
    double t = 0.0;
    for (int i = 0; i < 200; ++i) {
        records.push_back(pkt(t, i % 2 ? kRc : kDrone, i % 2 ? kDrone : kRc,
                              static_cast<uint32_t>(1 + rng.below(1500))));
        t += rng.next_double() * 0.05;
    }
    auto path = temp_file("roundtrip.csv");
    save_trace(path, records);
    auto loaded = load_trace(path);
    REQUIRE(loaded.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(std::abs(loaded[i].arrival_time - records[i].arrival_time) <= 5e-7);
        CHECK(loaded[i].src == records[i].src);
        CHECK(loaded[i].dst == records[i].dst);
        CHECK(loaded[i].size == records[i].size);
    }
}

TEST_CASE("role map validation") {
    RoleMap roles = test_roles();
    CHECK_NOTHROW(roles.validate());
    roles.drone_addrs.insert(kRc);
    CHECK_THROWS_AS(roles.validate(), std::invalid_argument);
    roles = test_roles();
    roles.rc_addrs.clear();
    CHECK_THROWS_AS(roles.validate(), std::invalid_argument);
}

TEST_CASE("role map loads from json") {
    auto path = temp_file("roles.json");
    write_file(path, R"({"rc": ["aa:00:00:00:00:01"], "drone": ["bb:00:00:00:00:01"]})");
    RoleMap roles = RoleMap::load(path);
    CHECK(roles.rc_addrs.count(kRc) == 1);
    CHECK(roles.drone_addrs.count(kDrone) == 1);
    CHECK(roles.broadcast_addr == kBroadcastMac);
}

TEST_CASE("split_flows partitions every record") {
    RngStream rng(11);
    const MacAddr stranger = parse_mac("cc:00:00:00:00:07");
    std::vector<PacketRecord> records;
    for (int i = 0; i < 1000; ++i) {
        double t = i * 0.001;
        switch (rng.below(5)) {
            case 0: records.push_back(pkt(t, kRc, kDrone, 156)); break;
            case 1: records.push_back(pkt(t, kDrone, kRc, 300)); break;
            case 2: records.push_back(pkt(t, kRc, kBroadcastMac, 289)); break;
            case 3: records.push_back(pkt(t, kDrone, kBroadcastMac, 100)); break;
            default: records.push_back(pkt(t, stranger, kRc, 64)); break;
        }
    }
    auto split = split_flows(records, test_roles());
    size_t classified = split.flow_count(FlowDirection::RcToDrone) +
                        split.flow_count(FlowDirection::DroneToRc) +
                        split.flow_count(FlowDirection::RcBroadcast) +
                        split.flow_count(FlowDirection::DroneBroadcast);
    CHECK(classified + split.discarded == records.size());
    CHECK(split.discarded > 0);

    // Link is the stable time-ordered merge of the two unicast flows.
    const auto& link = split.flows.at(FlowDirection::Link).packets;
    CHECK(link.size() == split.flow_count(FlowDirection::RcToDrone) +
                             split.flow_count(FlowDirection::DroneToRc));
    for (size_t i = 1; i < link.size(); ++i) {
        CHECK(link[i - 1].arrival_time <= link[i].arrival_time);
    }
    std::multiset<double> link_times, unicast_times;
    for (const auto& rec : link) link_times.insert(rec.arrival_time);
    for (const auto& rec : split.flows.at(FlowDirection::RcToDrone).packets)
        unicast_times.insert(rec.arrival_time);
    for (const auto& rec : split.flows.at(FlowDirection::DroneToRc).packets)
        unicast_times.insert(rec.arrival_time);
    CHECK(link_times == unicast_times);
}

TEST_CASE("split_flows on broadcast-only traffic leaves unicast flows empty") {
    std::vector<PacketRecord> records;
    for (int i = 0; i < 10; ++i) records.push_back(pkt(i * 0.1, kRc, kBroadcastMac, 289));
    auto split = split_flows(records, test_roles());
    CHECK(split.flow_count(FlowDirection::RcToDrone) == 0);
    CHECK(split.flow_count(FlowDirection::DroneToRc) == 0);
    CHECK(split.flow_count(FlowDirection::Link) == 0);
    CHECK(split.flow_count(FlowDirection::RcBroadcast) == 10);
}

TEST_CASE("flow fractions follow the per-flow share of all classified frames") {
    std::vector<PacketRecord> records;
    records.push_back(pkt(0.0, kRc, kDrone, 156));
    records.push_back(pkt(0.1, kRc, kDrone, 156));
    records.push_back(pkt(0.2, kDrone, kRc, 300));
    records.push_back(pkt(0.3, kRc, kBroadcastMac, 289));
    auto split = split_flows(records, test_roles());
    CHECK(split.flow_fraction(FlowDirection::RcToDrone) == doctest::Approx(0.5));
    CHECK(split.flow_fraction(FlowDirection::DroneToRc) == doctest::Approx(0.25));
    CHECK(split.flow_fraction(FlowDirection::RcBroadcast) == doctest::Approx(0.25));
    CHECK(split.flow_fraction(FlowDirection::DroneBroadcast) == 0.0);
}

TEST_CASE("mix_traces separate policy trims both traces to one duration") {
    FlowTrace drone, bg;
    drone.label = 0;
    bg.label = 1;
    for (int i = 0; i <= 1000; ++i) drone.packets.push_back(pkt(i * 0.01, kDrone, kRc, 300));
    for (int i = 0; i <= 400; ++i) bg.packets.push_back(pkt(i * 0.05, kRc, kDrone, 64));

    SUBCASE("explicit duration") {
        auto mixed = mix_traces(drone, bg, {MixPolicy::Kind::Separate, 5.0});
        CHECK(mixed.drone.duration() <= 5.0);
        CHECK(mixed.background.duration() <= 5.0);
        CHECK(mixed.drone.packets.size() == 501);
        CHECK(mixed.background.packets.size() == 101);
        CHECK(mixed.drone.label == 0);
        CHECK(mixed.background.label == 1);
        CHECK(mixed.interleaved.empty());
    }
    SUBCASE("default duration is the shorter trace") {
        auto mixed = mix_traces(drone, bg, {});
        CHECK(mixed.drone.duration() <= 10.0);
        CHECK(mixed.drone.packets.size() == 1001);  // drone trace is the shorter one
    }
    SUBCASE("interleave retains per-packet labels in time order") {
        auto mixed = mix_traces(drone, bg, {MixPolicy::Kind::Interleave, 5.0});
        REQUIRE(mixed.interleaved.size() ==
                mixed.drone.packets.size() + mixed.background.packets.size());
        size_t drone_packets = 0;
        for (size_t i = 0; i < mixed.interleaved.size(); ++i) {
            if (i > 0) {
                CHECK(mixed.interleaved[i - 1].first.arrival_time <=
                      mixed.interleaved[i].first.arrival_time);
            }
            if (mixed.interleaved[i].second == 0) ++drone_packets;
        }
        CHECK(drone_packets == mixed.drone.packets.size());
    }
}

TEST_CASE("mix_traces rejects empty inputs and duplicate labels") {
    FlowTrace drone, bg, empty;
    drone.label = 0;
    bg.label = 1;
    drone.packets.push_back(pkt(0.0, kDrone, kRc, 300));
    bg.packets.push_back(pkt(0.0, kRc, kDrone, 64));
    CHECK_THROWS_AS(mix_traces(drone, empty, {}), std::invalid_argument);
    CHECK_THROWS_AS(mix_traces(empty, bg, {}), std::invalid_argument);
    bg.label = 0;
    CHECK_THROWS_AS(mix_traces(drone, bg, {}), std::invalid_argument);
}
