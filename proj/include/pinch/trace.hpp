#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace pinch {

using MacAddr = std::array<uint8_t, 6>;

MacAddr parse_mac(const std::string& text);
std::string format_mac(const MacAddr& mac);
constexpr MacAddr kBroadcastMac = {0xff, 0xff, 0xff, 0xff, 0xff, 0xff};

// One eavesdropped frame. Times are seconds since trace start.
struct PacketRecord {
    double arrival_time = 0.0;
    MacAddr src{};
    MacAddr dst{};
    uint32_t size = 0;

    bool operator==(const PacketRecord&) const = default;
};

enum class FlowDirection { RcToDrone, DroneToRc, RcBroadcast, DroneBroadcast, Link };

const char* flow_name(FlowDirection dir);

// Maps link-layer addresses to the two endpoint roles.
struct RoleMap {
    std::set<MacAddr> rc_addrs;
    std::set<MacAddr> drone_addrs;
    MacAddr broadcast_addr = kBroadcastMac;

    void validate() const;  // throws if rc/drone sets overlap or are empty
    static RoleMap load(const std::filesystem::path& path);
};

constexpr int kUnlabeled = -1;

// Time-ordered packets of one directional flow, optionally carrying a class label.
struct FlowTrace {
    FlowDirection direction = FlowDirection::Link;
    std::vector<PacketRecord> packets;
    int label = kUnlabeled;

    double duration() const {
        return packets.empty() ? 0.0 : packets.back().arrival_time - packets.front().arrival_time;
    }
    bool operator==(const FlowTrace&) const = default;
};

// Canonical trace file io. Records come back sorted and rebased to t=0.
// reorder_tolerance: maximum backward time step repaired by a stable sort;
// anything larger is an error.
std::vector<PacketRecord> load_trace(const std::filesystem::path& path,
                                     const std::string& format = "canonical",
                                     double reorder_tolerance = 0.0);
void save_trace(const std::filesystem::path& path, const std::vector<PacketRecord>& records);

struct FlowSplit {
    std::map<FlowDirection, FlowTrace> flows;  // all five directions present
    size_t discarded = 0;                      // frames with unknown endpoints

    size_t flow_count(FlowDirection dir) const { return flows.at(dir).packets.size(); }
    // Fraction of all classified frames carried by one flow (Table 1 style).
    double flow_fraction(FlowDirection dir) const;
};

FlowSplit split_flows(const std::vector<PacketRecord>& records, const RoleMap& roles);

struct MixPolicy {
    enum class Kind { Separate, Interleave };
    Kind kind = Kind::Separate;
    double duration_s = 0.0;  // 0 = shorter of the two traces
};

struct MixResult {
    FlowTrace drone;
    FlowTrace background;
    // Populated only under the Interleave policy: time-ordered merge with
    // per-packet labels.
    std::vector<std::pair<PacketRecord, int>> interleaved;
};

// Pairs a drone trace with a background trace for detection experiments.
// Both traces keep their labels; windows are never built across the boundary.
MixResult mix_traces(const FlowTrace& drone, const FlowTrace& background,
                     const MixPolicy& policy = {});

}  // namespace pinch
