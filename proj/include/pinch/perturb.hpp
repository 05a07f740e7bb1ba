#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pinch/forest.hpp"
#include "pinch/trace.hpp"

namespace pinch {

struct LossSpec {
    double p = 0.0;  // i.i.d. drop probability
    uint64_t seed = 0;

    enum class Model { Iid, GilbertElliott };
    Model model = Model::Iid;
    // Gilbert-Elliott burst-loss parameters (Model::GilbertElliott); the good
    // state never drops, p is ignored.
    double ge_enter_bad = 0.05;
    double ge_exit_bad = 0.3;
    double ge_drop_bad = 0.9;

    void validate() const;
};

struct EvasionSpec {
    double delta_max = 0.0;  // uniform delay bound, <= 10 s sanity cap
    uint64_t seed = 0;

    void validate() const;
};

struct LossResult {
    FlowTrace trace;
    double achieved_loss = 0.0;
};

// Drops packets independently; survivors keep their original timestamps so
// interarrival gaps grow implicitly. Dropping everything is an error.
LossResult apply_loss(const FlowTrace& trace, const LossSpec& spec);

// Adds i.i.d. Uniform[0, delta_max] delays to every interarrival gap and
// rebuilds arrival times by cumulative sum from the first packet. Sizes,
// count, and order are preserved; no output gap shrinks below its input.
FlowTrace apply_evasion(const FlowTrace& trace, const EvasionSpec& spec);

struct FnrPoint {
    double delta = 0.0;
    double fnr = 0.0;  // fraction of drone windows predicted non-drone
};

// Evasion sweep against a model trained on unperturbed traffic. Per-delta
// perturbation seeds derive from (seed, index).
std::vector<FnrPoint> fnr_sweep(const FlowTrace& drone_trace, const ForestModel& model,
                                std::span<const double> deltas, uint64_t seed);

struct LossPoint {
    double p = 0.0;
    double achieved_loss = 0.0;
    double detection_rate = 0.0;  // fraction of degraded drone windows still flagged
};

// Train-clean / test-degraded protocol: the model learns the unperturbed
// drone+background mix, then each p degrades the drone trace before scoring.
// Output is sorted ascending by p.
std::vector<LossPoint> loss_sweep(const FlowTrace& drone_trace, const FlowTrace& background_trace,
                                  const ForestParams& params, std::span<const double> p_list,
                                  int window, uint64_t seed);

}  // namespace pinch
