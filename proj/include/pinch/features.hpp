#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pinch/trace.hpp"

namespace pinch {

// Feature indices (0-based) into FeatureRow::x.
enum Feature : int {
    kSize = 0,          // x1: packet size [B]
    kGap = 1,           // x2: interarrival time [s]
    kSizeMean = 2,      // x3: windowed mean size
    kGapMean = 3,       // x4: windowed mean interarrival
    kSizeStd = 4,       // x5: windowed std of size (population)
    kGapStd = 5,        // x6: windowed std of interarrival (population)
};
constexpr int kFeatureCount = 6;

struct FeatureRow {
    std::array<double, kFeatureCount> x{};
    int y = kUnlabeled;
};

struct FeatureMatrix {
    std::vector<FeatureRow> rows;
    int window = 0;
    std::string source;

    size_t size() const { return rows.size(); }
};

// One (interarrival, size) sample per consecutive packet pair: gap n is
// a[n+1]-a[n] and carries the size of packet n.
struct GapSample {
    double gap = 0.0;
    double size = 0.0;
};

std::vector<GapSample> interarrivals(const FlowTrace& trace);

// Sliding window of `window` gap samples, advancing by `stride`. A row takes
// x1/x2 from the newest sample of its window and x3..x6 over the whole window
// (std with divisor W). Label copied from the trace.
FeatureMatrix build_features(const FlowTrace& trace, int window, int stride = 1);

// Row-concatenation of matrices sharing the same window size.
FeatureMatrix assemble(std::span<const FeatureMatrix> matrices);

std::map<int, size_t> class_counts(const FeatureMatrix& matrix);

// Text-table export/import, header "x1,x2,x3,x4,x5,x6,y".
void save_matrix(const std::filesystem::path& path, const FeatureMatrix& matrix);
FeatureMatrix load_matrix(const std::filesystem::path& path);

}  // namespace pinch
