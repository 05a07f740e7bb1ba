#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "pinch/features.hpp"
#include "pinch/trace.hpp"

namespace pinch {

struct ForestParams;  // forest.hpp

// Per (true, predicted) label pair counts. Binary orientation: label 0 is the
// positive class (drone / target).
struct ConfusionCounts {
    std::vector<int> labels;      // sorted ascending
    std::vector<int64_t> counts;  // row-major [true][predicted]

    int64_t total() const;
    int64_t at(int true_label, int predicted_label) const;
    int64_t correct() const;  // main diagonal

    // One-vs-rest with label 0 as positive; equals the usual binary counts
    // when there are exactly two labels.
    int64_t tp() const;
    int64_t fp() const;
    int64_t fn() const;
    int64_t tn() const;

    void add(const ConfusionCounts& other);  // pool counts (same label sets)
};

struct RocPoint {
    int window = 0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct DelayQuantiles {
    double q05 = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
};

struct EvalReport {
    ConfusionCounts confusion;
    double tpr = 0.0, fpr = 0.0, fnr = 0.0, tnr = 0.0;
    double sr = 0.0;
    std::vector<RocPoint> roc_points;
    std::map<int, DelayQuantiles> delay_quantiles;  // window → quantiles
    std::array<double, kFeatureCount> importances{};
};

// Confusion counts and derived rates from parallel label sequences.
// Complement rates are formed by subtraction so tpr+fnr == 1 exactly.
EvalReport score(std::span<const int> truth, std::span<const int> predicted);

// Empirical quantile with linear interpolation between order statistics
// (type 7). Input need not be sorted.
double quantile(std::vector<double> samples, double q);

// Wall-clock span of every W consecutive packets, a[n+W-1] - a[n], reported
// as the 0.05 / 0.5 / 0.95 empirical quantiles.
DelayQuantiles detection_delay(const FlowTrace& trace, int window);

// Normalized frequency distributions of packet size (1-byte bins) and
// interarrival time (logarithmic bins, 100 per decade over [1 us, 10 s]).
struct TraceProfile {
    std::map<uint32_t, double> size_freq;
    std::vector<double> gap_freq;
};

constexpr int kGapBinsPerDecade = 100;
constexpr double kGapBinMin = 1e-6;
constexpr double kGapBinMax = 10.0;
constexpr int kGapBinCount = 700;

TraceProfile profile(const FlowTrace& trace);

double pearson(std::span<const double> a, std::span<const double> b);
double size_correlation(const TraceProfile& a, const TraceProfile& b);
double gap_correlation(const TraceProfile& a, const TraceProfile& b);

// One cross-validated operating point (FPR, TPR) per window size, features
// rebuilt from the source traces for each W.
std::vector<RocPoint> roc_sweep(const std::vector<FlowTrace>& traces, const ForestParams& params,
                                const std::vector<int>& windows, uint64_t seed);

// Plot-data emission (canonical text tables).
void emit_plot_data(const EvalReport& report, const std::filesystem::path& path);
void write_delay_table(const std::filesystem::path& path,
                       const std::map<int, DelayQuantiles>& quantiles);
void write_size_profile_table(const std::filesystem::path& path, const TraceProfile& profile);
void write_gap_profile_table(const std::filesystem::path& path, const TraceProfile& profile);

}  // namespace pinch
