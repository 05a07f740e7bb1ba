#include "pinch/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "pinch/rng.hpp"

namespace pinch {

namespace {

// Locally administered addresses for synthetic endpoints.
constexpr MacAddr kSynthSrc = {0x02, 0x00, 0x00, 0x00, 0x00, 0x01};
constexpr MacAddr kSynthDst = {0x02, 0x00, 0x00, 0x00, 0x00, 0x02};

// Tolerance for the duration cutoff: one nanosecond, far below the 1 us
// timestamp precision, so a constant 20 ms profile over 10 s emits the 500th
// packet despite accumulated rounding.
constexpr double kDurationSlack = 1e-9;

}  // namespace

void ProfileSpec::validate() const {
    if (duration_s <= 0.0) throw std::invalid_argument("profile spec: duration must be > 0");
    switch (gap.kind) {
        case Gap::Kind::Constant:
        case Gap::Kind::Exponential:
            if (gap.value_s <= 0.0) {
                throw std::invalid_argument("profile spec: gap parameter must be > 0");
            }
            break;
        case Gap::Kind::BimodalConstant:
            if (gap.value_s <= 0.0 || gap.second_s <= 0.0) {
                throw std::invalid_argument("profile spec: both gap periods must be > 0");
            }
            break;
    }
    if (size.kind == Size::Kind::Constant) {
        if (size.bytes < 1) throw std::invalid_argument("profile spec: size must be >= 1 byte");
    } else {
        if (size.categories.empty()) {
            throw std::invalid_argument("profile spec: categorical sizes need categories");
        }
        double weight_sum = 0.0;
        for (const auto& [bytes, weight] : size.categories) {
            if (bytes < 1) throw std::invalid_argument("profile spec: size must be >= 1 byte");
            if (weight <= 0.0) {
                throw std::invalid_argument("profile spec: category weights must be > 0");
            }
            weight_sum += weight;
        }
        if (weight_sum <= 0.0) {
            throw std::invalid_argument("profile spec: degenerate category weights");
        }
    }
}

FlowTrace generate(const ProfileSpec& spec, int label) {
    spec.validate();
    RngStream rng(spec.seed);

    double weight_sum = 0.0;
    for (const auto& [bytes, weight] : spec.size.categories) weight_sum += weight;

    auto draw_gap = [&](size_t n) {
        switch (spec.gap.kind) {
            case ProfileSpec::Gap::Kind::Constant:
                return spec.gap.value_s;
            case ProfileSpec::Gap::Kind::Exponential: {
                double u;
                do {
                    u = rng.next_double();
                } while (u == 0.0);  // keep gaps strictly positive
                return -spec.gap.value_s * std::log(u);
            }
            case ProfileSpec::Gap::Kind::BimodalConstant:
                return n % 2 == 0 ? spec.gap.value_s : spec.gap.second_s;
        }
        return spec.gap.value_s;
    };
    auto draw_size = [&]() -> uint32_t {
        if (spec.size.kind == ProfileSpec::Size::Kind::Constant) return spec.size.bytes;
        double u = rng.next_double() * weight_sum;
        for (const auto& [bytes, weight] : spec.size.categories) {
            if (u < weight) return bytes;
            u -= weight;
        }
        return spec.size.categories.back().first;
    };

    FlowTrace trace;
    trace.direction = FlowDirection::Link;
    trace.label = label;
    double t = 0.0;
    for (size_t n = 0;; ++n) {
        t += draw_gap(n);
        if (t > spec.duration_s + kDurationSlack) break;
        trace.packets.push_back({t, kSynthSrc, kSynthDst, draw_size()});
    }
    return trace;
}

}  // namespace pinch
