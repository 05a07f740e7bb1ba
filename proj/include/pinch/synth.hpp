#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pinch/trace.hpp"

namespace pinch {

// Controllable synthetic traffic profile. Interarrival and size distributions
// are modeled on command-link behavior: strictly periodic, alternating
// two-period, or memoryless gaps; fixed or categorical sizes.
struct ProfileSpec {
    struct Gap {
        enum class Kind { Constant, Exponential, BimodalConstant };
        Kind kind = Kind::Constant;
        double value_s = 0.02;   // Constant period / Exponential mean / first period
        double second_s = 0.04;  // BimodalConstant alternating period
    };
    struct Size {
        enum class Kind { Constant, Categorical };
        Kind kind = Kind::Constant;
        uint32_t bytes = 156;
        std::vector<std::pair<uint32_t, double>> categories;  // (bytes, weight)
    };

    Gap gap;
    Size size;
    double duration_s = 10.0;
    uint64_t seed = 0;

    void validate() const;
};

// Seed-deterministic trace matching the spec; arrival times accumulate from
// t=0 with the first packet one gap in, so a constant 20 ms profile over 10 s
// yields exactly 500 packets.
FlowTrace generate(const ProfileSpec& spec, int label);

}  // namespace pinch
