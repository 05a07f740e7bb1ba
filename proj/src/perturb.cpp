#include "pinch/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pinch/rng.hpp"

namespace pinch {

void LossSpec::validate() const {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("loss spec: p outside [0,1]");
    if (model == Model::GilbertElliott) {
        for (double v : {ge_enter_bad, ge_exit_bad, ge_drop_bad}) {
            if (v < 0.0 || v > 1.0) {
                throw std::invalid_argument("loss spec: Gilbert-Elliott probabilities outside [0,1]");
            }
        }
    }
}

void EvasionSpec::validate() const {
    if (delta_max < 0.0) throw std::invalid_argument("evasion spec: delta must be >= 0");
    if (delta_max > 10.0) throw std::invalid_argument("evasion spec: delta over 10 s sanity bound");
}

LossResult apply_loss(const FlowTrace& trace, const LossSpec& spec) {
    spec.validate();
    if (trace.packets.empty()) throw std::invalid_argument("apply_loss: empty trace");

    RngStream rng(spec.seed);
    LossResult result;
    result.trace.direction = trace.direction;
    result.trace.label = trace.label;
    result.trace.packets.reserve(trace.packets.size());

    if (spec.model == LossSpec::Model::Iid) {
        for (const auto& rec : trace.packets) {
            if (rng.next_double() >= spec.p) result.trace.packets.push_back(rec);
        }
    } else {
        bool bad = false;
        for (const auto& rec : trace.packets) {
            bad = rng.next_double() < (bad ? 1.0 - spec.ge_exit_bad : spec.ge_enter_bad);
            bool drop = bad && rng.next_double() < spec.ge_drop_bad;
            if (!drop) result.trace.packets.push_back(rec);
        }
    }
    if (result.trace.packets.empty()) {
        throw std::runtime_error("apply_loss: every packet dropped, nothing left to analyze");
    }
    result.achieved_loss = 1.0 - static_cast<double>(result.trace.packets.size()) /
                                     static_cast<double>(trace.packets.size());
    return result;
}

FlowTrace apply_evasion(const FlowTrace& trace, const EvasionSpec& spec) {
    spec.validate();
    if (trace.packets.size() < 2) {
        throw std::invalid_argument("apply_evasion: need at least 2 packets");
    }
    if (spec.delta_max == 0.0) return trace;

    RngStream rng(spec.seed);
    FlowTrace out = trace;
    double t = trace.packets.front().arrival_time;
    for (size_t n = 1; n < trace.packets.size(); ++n) {
        double gap = trace.packets[n].arrival_time - trace.packets[n - 1].arrival_time;
        double delayed = gap + rng.next_double() * spec.delta_max;
        double next = t + delayed;
        // Cumulative-sum rounding must not shrink a delivered gap below the
        // drawn one.
        while (next - t < delayed) next = std::nextafter(next, INFINITY);
        out.packets[n].arrival_time = next;
        t = next;
    }
    return out;
}

std::vector<FnrPoint> fnr_sweep(const FlowTrace& drone_trace, const ForestModel& model,
                                std::span<const double> deltas, uint64_t seed) {
    if (drone_trace.label == kUnlabeled) {
        throw std::invalid_argument("fnr_sweep: drone trace must carry its class label");
    }
    std::vector<FnrPoint> points;
    points.reserve(deltas.size());
    for (size_t i = 0; i < deltas.size(); ++i) {
        EvasionSpec spec{deltas[i], derive_seed(seed, i)};
        FlowTrace perturbed = apply_evasion(drone_trace, spec);
        FeatureMatrix features = build_features(perturbed, model.window);
        int64_t missed = 0;
        for (const auto& row : features.rows) {
            if (predict(model, row.x).label != drone_trace.label) ++missed;
        }
        points.push_back(
            {deltas[i], static_cast<double>(missed) / static_cast<double>(features.rows.size())});
    }
    return points;
}

std::vector<LossPoint> loss_sweep(const FlowTrace& drone_trace, const FlowTrace& background_trace,
                                  const ForestParams& params, std::span<const double> p_list,
                                  int window, uint64_t seed) {
    if (drone_trace.label == kUnlabeled || background_trace.label == kUnlabeled ||
        drone_trace.label == background_trace.label) {
        throw std::invalid_argument("loss_sweep: traces must carry distinct class labels");
    }
    std::vector<FeatureMatrix> matrices;
    matrices.push_back(build_features(drone_trace, window));
    matrices.push_back(build_features(background_trace, window));
    FeatureMatrix matrix = assemble(matrices);
    ForestModel model = train_forest(matrix, params, derive_seed(seed, 0x10551));

    std::vector<double> ps(p_list.begin(), p_list.end());
    std::sort(ps.begin(), ps.end());

    std::vector<LossPoint> points;
    points.reserve(ps.size());
    for (size_t i = 0; i < ps.size(); ++i) {
        LossSpec spec;
        spec.p = ps[i];
        spec.seed = derive_seed(seed, i + 1);
        LossResult degraded = apply_loss(drone_trace, spec);
        FeatureMatrix features = build_features(degraded.trace, window);
        int64_t detected = 0;
        for (const auto& row : features.rows) {
            if (predict(model, row.x).label == drone_trace.label) ++detected;
        }
        points.push_back({ps[i], degraded.achieved_loss,
                          static_cast<double>(detected) /
                              static_cast<double>(features.rows.size())});
    }
    return points;
}

}  // namespace pinch
