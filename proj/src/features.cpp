#include "pinch/features.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "pinch/textio.hpp"

namespace pinch {

std::vector<GapSample> interarrivals(const FlowTrace& trace) {
    if (trace.packets.size() < 2) {
        throw std::invalid_argument("interarrivals: need at least 2 packets, got " +
                                    std::to_string(trace.packets.size()));
    }
    std::vector<GapSample> samples;
    samples.reserve(trace.packets.size() - 1);
    for (size_t n = 0; n + 1 < trace.packets.size(); ++n) {
        samples.push_back({trace.packets[n + 1].arrival_time - trace.packets[n].arrival_time,
                           static_cast<double>(trace.packets[n].size)});
    }
    return samples;
}

FeatureMatrix build_features(const FlowTrace& trace, int window, int stride) {
    if (window < 2) {
        throw std::invalid_argument("build_features: window must be >= 2");
    }
    if (stride < 1) {
        throw std::invalid_argument("build_features: stride must be >= 1");
    }
    if (trace.packets.size() <= static_cast<size_t>(window)) {
        throw std::invalid_argument("build_features: trace of " +
                                    std::to_string(trace.packets.size()) +
                                    " packets is too short for window " + std::to_string(window));
    }
    auto samples = interarrivals(trace);
    size_t w = static_cast<size_t>(window);

    FeatureMatrix matrix;
    matrix.window = window;
    matrix.source = std::string(flow_name(trace.direction));
    matrix.rows.reserve((samples.size() - w) / stride + 1);

    // Direct per-window evaluation. Sizes sum exactly in int64; the time
    // attribute uses a two-pass mean/deviation computation per window, which
    // keeps every row independent of trace length (no rolling drift).
    for (size_t k = 0; k + w <= samples.size(); k += stride) {
        const GapSample* win = samples.data() + k;
        int64_t size_sum = 0;
        double gap_sum = 0.0;
        for (size_t i = 0; i < w; ++i) {
            size_sum += static_cast<int64_t>(win[i].size);
            gap_sum += win[i].gap;
        }
        double size_mean = static_cast<double>(size_sum) / static_cast<double>(w);
        double gap_mean = gap_sum / static_cast<double>(w);
        double size_sq = 0.0;
        double gap_sq = 0.0;
        for (size_t i = 0; i < w; ++i) {
            double ds = win[i].size - size_mean;
            double dg = win[i].gap - gap_mean;
            size_sq += ds * ds;
            gap_sq += dg * dg;
        }
        FeatureRow row;
        row.x[kSize] = win[w - 1].size;
        row.x[kGap] = win[w - 1].gap;
        row.x[kSizeMean] = size_mean;
        row.x[kGapMean] = gap_mean;
        row.x[kSizeStd] = std::sqrt(size_sq / static_cast<double>(w));
        row.x[kGapStd] = std::sqrt(gap_sq / static_cast<double>(w));
        row.y = trace.label;
        matrix.rows.push_back(row);
    }
    return matrix;
}

FeatureMatrix assemble(std::span<const FeatureMatrix> matrices) {
    if (matrices.empty()) {
        throw std::invalid_argument("assemble: no matrices");
    }
    FeatureMatrix out;
    out.window = matrices.front().window;
    out.source = "assembled";
    size_t total = 0;
    for (const auto& m : matrices) {
        if (m.window != out.window) {
            throw std::invalid_argument("assemble: window mismatch (" + std::to_string(out.window) +
                                        " vs " + std::to_string(m.window) + ")");
        }
        total += m.rows.size();
    }
    out.rows.reserve(total);
    for (const auto& m : matrices) {
        out.rows.insert(out.rows.end(), m.rows.begin(), m.rows.end());
    }
    return out;
}

std::map<int, size_t> class_counts(const FeatureMatrix& matrix) {
    std::map<int, size_t> counts;
    for (const auto& row : matrix.rows) ++counts[row.y];
    return counts;
}

void save_matrix(const std::filesystem::path& path, const FeatureMatrix& matrix) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "x1,x2,x3,x4,x5,x6,y\n";
    for (const auto& row : matrix.rows) {
        for (double v : row.x) out << format_double(v) << ',';
        out << row.y << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

FeatureMatrix load_matrix(const std::filesystem::path& path) {
    auto table = read_table(path);
    if (table.columns != std::vector<std::string>{"x1", "x2", "x3", "x4", "x5", "x6", "y"}) {
        throw std::runtime_error(path.string() + ": unexpected header");
    }
    FeatureMatrix matrix;
    matrix.source = path.filename().string();
    for (const auto& fields : table.rows) {
        if (fields.size() != 7) {
            throw std::runtime_error(path.string() + ": expected 7 fields per row");
        }
        FeatureRow row;
        for (int i = 0; i < kFeatureCount; ++i) row.x[i] = fields[i];
        row.y = static_cast<int>(fields[6]);
        matrix.rows.push_back(row);
    }
    return matrix;
}

}  // namespace pinch
