#include "pinch/trace.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "pinch/textio.hpp"

namespace pinch {

namespace {

constexpr char kTraceHeader[] = "arrival_time_s,src_mac,dst_mac,size_bytes";

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

MacAddr parse_mac(const std::string& text) {
    MacAddr mac{};
    if (text.size() != 17) {
        throw std::runtime_error("bad MAC address: '" + text + "'");
    }
    for (int i = 0; i < 6; ++i) {
        int hi = hex_nibble(text[i * 3]);
        int lo = hex_nibble(text[i * 3 + 1]);
        if (hi < 0 || lo < 0 || (i < 5 && text[i * 3 + 2] != ':')) {
            throw std::runtime_error("bad MAC address: '" + text + "'");
        }
        mac[i] = static_cast<uint8_t>(hi * 16 + lo);
    }
    return mac;
}

std::string format_mac(const MacAddr& mac) {
    char buf[18];
    std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2],
                  mac[3], mac[4], mac[5]);
    return buf;
}

const char* flow_name(FlowDirection dir) {
    switch (dir) {
        case FlowDirection::RcToDrone: return "rc_to_drone";
        case FlowDirection::DroneToRc: return "drone_to_rc";
        case FlowDirection::RcBroadcast: return "rc_broadcast";
        case FlowDirection::DroneBroadcast: return "drone_broadcast";
        case FlowDirection::Link: return "link";
    }
    return "?";
}

void RoleMap::validate() const {
    if (rc_addrs.empty() || drone_addrs.empty()) {
        throw std::invalid_argument("role map: rc and drone address sets must be non-empty");
    }
    for (const auto& mac : rc_addrs) {
        if (drone_addrs.count(mac)) {
            throw std::invalid_argument("role map: address " + format_mac(mac) +
                                        " assigned to both rc and drone");
        }
    }
}

RoleMap RoleMap::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read role map " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("role map " + path.string() + ": " + e.what());
    }
    RoleMap roles;
    for (const auto& mac : doc.at("rc")) roles.rc_addrs.insert(parse_mac(mac.get<std::string>()));
    for (const auto& mac : doc.at("drone"))
        roles.drone_addrs.insert(parse_mac(mac.get<std::string>()));
    if (doc.contains("broadcast")) {
        roles.broadcast_addr = parse_mac(doc["broadcast"].get<std::string>());
    }
    roles.validate();
    return roles;
}

std::vector<PacketRecord> load_trace(const std::filesystem::path& path, const std::string& format,
                                     double reorder_tolerance) {
    if (format != "canonical") {
        throw std::invalid_argument("unknown trace format '" + format + "'");
    }
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read trace " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader) {
        throw std::runtime_error(path.string() + ":1: expected header '" + kTraceHeader + "'");
    }

    std::vector<PacketRecord> records;
    size_t line_no = 1;
    double max_seen = 0.0;
    bool needs_sort = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv(line);
        auto fail = [&](const std::string& what) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
        };
        if (fields.size() != 4) fail("expected 4 fields, got " + std::to_string(fields.size()));
        PacketRecord rec;
        try {
            rec.arrival_time = parse_double(fields[0]);
            rec.src = parse_mac(fields[1]);
            rec.dst = parse_mac(fields[2]);
            size_t pos = 0;
            long size = std::stol(fields[3], &pos);
            if (pos != fields[3].size()) throw std::runtime_error("trailing garbage");
            rec.size = static_cast<uint32_t>(size);
            if (size < 1) fail("size must be >= 1, got " + fields[3]);
        } catch (const std::runtime_error& e) {
            if (std::string(e.what()).starts_with(path.string())) throw;
            fail(e.what());
        } catch (const std::exception&) {
            fail("malformed row");
        }
        if (rec.arrival_time < 0) fail("negative arrival time");
        if (!records.empty() && rec.arrival_time < max_seen) {
            if (max_seen - rec.arrival_time > reorder_tolerance) {
                fail("timestamp goes backward by " + format_double(max_seen - rec.arrival_time) +
                     " s (tolerance " + format_double(reorder_tolerance) + ")");
            }
            needs_sort = true;
        }
        max_seen = std::max(max_seen, rec.arrival_time);
        records.push_back(rec);
    }
    if (needs_sort) {
        std::stable_sort(records.begin(), records.end(),
                         [](const PacketRecord& a, const PacketRecord& b) {
                             return a.arrival_time < b.arrival_time;
                         });
    }
    if (!records.empty()) {
        double origin = records.front().arrival_time;
        if (origin != 0.0) {
            for (auto& rec : records) rec.arrival_time -= origin;
        }
    }
    return records;
}

void save_trace(const std::filesystem::path& path, const std::vector<PacketRecord>& records) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write trace " + path.string());
    }
    out << kTraceHeader << '\n';
    for (const auto& rec : records) {
        out << format_fixed(rec.arrival_time, 6) << ',' << format_mac(rec.src) << ','
            << format_mac(rec.dst) << ',' << rec.size << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

double FlowSplit::flow_fraction(FlowDirection dir) const {
    size_t classified = 0;
    for (const auto& [d, trace] : flows) {
        if (d != FlowDirection::Link) classified += trace.packets.size();
    }
    if (classified == 0) return 0.0;
    return static_cast<double>(flow_count(dir)) / static_cast<double>(classified);
}

FlowSplit split_flows(const std::vector<PacketRecord>& records, const RoleMap& roles) {
    roles.validate();
    FlowSplit split;
    for (FlowDirection dir : {FlowDirection::RcToDrone, FlowDirection::DroneToRc,
                              FlowDirection::RcBroadcast, FlowDirection::DroneBroadcast,
                              FlowDirection::Link}) {
        split.flows[dir].direction = dir;
    }
    for (const auto& rec : records) {
        bool from_rc = roles.rc_addrs.count(rec.src) > 0;
        bool from_drone = roles.drone_addrs.count(rec.src) > 0;
        if (rec.dst == roles.broadcast_addr) {
            if (from_rc) {
                split.flows[FlowDirection::RcBroadcast].packets.push_back(rec);
            } else if (from_drone) {
                split.flows[FlowDirection::DroneBroadcast].packets.push_back(rec);
            } else {
                ++split.discarded;
            }
        } else if (from_rc && roles.drone_addrs.count(rec.dst)) {
            split.flows[FlowDirection::RcToDrone].packets.push_back(rec);
            split.flows[FlowDirection::Link].packets.push_back(rec);
        } else if (from_drone && roles.rc_addrs.count(rec.dst)) {
            split.flows[FlowDirection::DroneToRc].packets.push_back(rec);
            split.flows[FlowDirection::Link].packets.push_back(rec);
        } else {
            ++split.discarded;
        }
    }
    // Link is appended in input order, which is time order already.
    return split;
}

namespace {

FlowTrace trim_to_duration(const FlowTrace& trace, double duration) {
    FlowTrace out;
    out.direction = trace.direction;
    out.label = trace.label;
    double start = trace.packets.front().arrival_time;
    for (const auto& rec : trace.packets) {
        if (rec.arrival_time - start > duration) break;
        out.packets.push_back(rec);
    }
    return out;
}

}  // namespace

MixResult mix_traces(const FlowTrace& drone, const FlowTrace& background,
                     const MixPolicy& policy) {
    if (drone.packets.empty() || background.packets.empty()) {
        throw std::invalid_argument("mix_traces: empty input trace");
    }
    if (drone.label == background.label) {
        throw std::invalid_argument("mix_traces: traces must carry distinct labels");
    }
    double duration = policy.duration_s > 0
                          ? policy.duration_s
                          : std::min(drone.duration(), background.duration());

    MixResult result;
    result.drone = trim_to_duration(drone, duration);
    result.background = trim_to_duration(background, duration);

    if (policy.kind == MixPolicy::Kind::Interleave) {
        auto& merged = result.interleaved;
        merged.reserve(result.drone.packets.size() + result.background.packets.size());
        for (const auto& rec : result.drone.packets) merged.emplace_back(rec, drone.label);
        for (const auto& rec : result.background.packets)
            merged.emplace_back(rec, background.label);
        std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
            return a.first.arrival_time < b.first.arrival_time;
        });
    }
    return result;
}

}  // namespace pinch
