#include "pinch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pinch/forest.hpp"
#include "pinch/textio.hpp"

namespace pinch {

namespace {

size_t slot_of(const std::vector<int>& labels, int label) {
    auto it = std::lower_bound(labels.begin(), labels.end(), label);
    if (it == labels.end() || *it != label) {
        throw std::invalid_argument("label " + std::to_string(label) + " not in confusion matrix");
    }
    return static_cast<size_t>(it - labels.begin());
}

}  // namespace

int64_t ConfusionCounts::total() const {
    int64_t sum = 0;
    for (int64_t c : counts) sum += c;
    return sum;
}

int64_t ConfusionCounts::at(int true_label, int predicted_label) const {
    size_t l = labels.size();
    return counts[slot_of(labels, true_label) * l + slot_of(labels, predicted_label)];
}

int64_t ConfusionCounts::correct() const {
    int64_t sum = 0;
    size_t l = labels.size();
    for (size_t i = 0; i < l; ++i) sum += counts[i * l + i];
    return sum;
}

int64_t ConfusionCounts::tp() const {
    size_t pos = slot_of(labels, 0);
    return counts[pos * labels.size() + pos];
}

int64_t ConfusionCounts::fn() const {
    size_t l = labels.size();
    size_t pos = slot_of(labels, 0);
    int64_t sum = 0;
    for (size_t j = 0; j < l; ++j) {
        if (j != pos) sum += counts[pos * l + j];
    }
    return sum;
}

int64_t ConfusionCounts::fp() const {
    size_t l = labels.size();
    size_t pos = slot_of(labels, 0);
    int64_t sum = 0;
    for (size_t i = 0; i < l; ++i) {
        if (i != pos) sum += counts[i * l + pos];
    }
    return sum;
}

int64_t ConfusionCounts::tn() const { return total() - tp() - fp() - fn(); }

void ConfusionCounts::add(const ConfusionCounts& other) {
    if (labels != other.labels) {
        throw std::invalid_argument("cannot pool confusion counts over different label sets");
    }
    for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

EvalReport score(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) {
        throw std::invalid_argument("score: got " + std::to_string(truth.size()) +
                                    " truth labels vs " + std::to_string(predicted.size()) +
                                    " predictions");
    }
    if (truth.empty()) throw std::invalid_argument("score: empty label sequences");

    EvalReport report;
    auto& confusion = report.confusion;
    confusion.labels.assign(truth.begin(), truth.end());
    confusion.labels.insert(confusion.labels.end(), predicted.begin(), predicted.end());
    std::sort(confusion.labels.begin(), confusion.labels.end());
    confusion.labels.erase(std::unique(confusion.labels.begin(), confusion.labels.end()),
                           confusion.labels.end());
    size_t l = confusion.labels.size();
    confusion.counts.assign(l * l, 0);
    for (size_t i = 0; i < truth.size(); ++i) {
        ++confusion.counts[slot_of(confusion.labels, truth[i]) * l +
                           slot_of(confusion.labels, predicted[i])];
    }

    report.sr = static_cast<double>(confusion.correct()) / static_cast<double>(confusion.total());
    // One-vs-rest rates with label 0 as positive, when present. Complements
    // come from subtraction so tpr+fnr and tnr+fpr are exactly 1.
    if (std::binary_search(confusion.labels.begin(), confusion.labels.end(), 0)) {
        int64_t tp = confusion.tp(), fn = confusion.fn();
        int64_t fp = confusion.fp(), tn = confusion.tn();
        if (tp + fn > 0) {
            report.tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
            report.fnr = 1.0 - report.tpr;
        }
        if (fp + tn > 0) {
            report.fpr = static_cast<double>(fp) / static_cast<double>(fp + tn);
            report.tnr = 1.0 - report.fpr;
        }
    }
    return report;
}

double quantile(std::vector<double> samples, double q) {
    if (samples.empty()) throw std::invalid_argument("quantile: no samples");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q outside [0,1]");
    std::sort(samples.begin(), samples.end());
    double h = (static_cast<double>(samples.size()) - 1.0) * q;
    size_t lo = static_cast<size_t>(h);
    if (lo + 1 >= samples.size()) return samples.back();
    double frac = h - static_cast<double>(lo);
    return samples[lo] + frac * (samples[lo + 1] - samples[lo]);
}

DelayQuantiles detection_delay(const FlowTrace& trace, int window) {
    if (window < 2) throw std::invalid_argument("detection_delay: window must be >= 2");
    size_t w = static_cast<size_t>(window);
    if (trace.packets.size() <= w) {
        throw std::invalid_argument("detection_delay: trace of " +
                                    std::to_string(trace.packets.size()) +
                                    " packets is too short for window " + std::to_string(window));
    }
    std::vector<double> spans;
    spans.reserve(trace.packets.size() - w + 1);
    for (size_t n = 0; n + w - 1 < trace.packets.size(); ++n) {
        spans.push_back(trace.packets[n + w - 1].arrival_time - trace.packets[n].arrival_time);
    }
    DelayQuantiles out;
    out.q05 = quantile(spans, 0.05);
    out.q50 = quantile(spans, 0.50);
    out.q95 = quantile(spans, 0.95);
    return out;
}

TraceProfile profile(const FlowTrace& trace) {
    if (trace.packets.empty()) throw std::invalid_argument("profile: empty trace");
    TraceProfile out;
    std::map<uint32_t, int64_t> size_counts;
    for (const auto& rec : trace.packets) ++size_counts[rec.size];
    double n = static_cast<double>(trace.packets.size());
    for (const auto& [size, count] : size_counts) {
        out.size_freq[size] = static_cast<double>(count) / n;
    }

    out.gap_freq.assign(kGapBinCount, 0.0);
    if (trace.packets.size() >= 2) {
        auto gaps = interarrivals(trace);
        const double bins_per_decade = kGapBinsPerDecade;
        for (const auto& sample : gaps) {
            int bin = 0;
            if (sample.gap >= kGapBinMax) {
                bin = kGapBinCount - 1;
            } else if (sample.gap > kGapBinMin) {
                bin = static_cast<int>(std::log10(sample.gap / kGapBinMin) * bins_per_decade);
                bin = std::clamp(bin, 0, kGapBinCount - 1);
            }
            out.gap_freq[bin] += 1.0;
        }
        for (double& v : out.gap_freq) v /= static_cast<double>(gaps.size());
    }
    return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("pearson: mismatched or empty inputs");
    }
    double n = static_cast<double>(a.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double da = a[i] - mean_a;
        double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) {
        // Degenerate profile (all mass in one bin): equal inputs correlate
        // perfectly, anything else not at all.
        return std::equal(a.begin(), a.end(), b.begin()) ? 1.0 : 0.0;
    }
    double r = cov / std::sqrt(var_a * var_b);
    return std::clamp(r, -1.0, 1.0);
}

double size_correlation(const TraceProfile& a, const TraceProfile& b) {
    if (a.size_freq.empty() || b.size_freq.empty()) {
        throw std::invalid_argument("size_correlation: empty profile");
    }
    uint32_t lo = std::min(a.size_freq.begin()->first, b.size_freq.begin()->first);
    uint32_t hi = std::max(a.size_freq.rbegin()->first, b.size_freq.rbegin()->first);
    std::vector<double> va(hi - lo + 1, 0.0), vb(hi - lo + 1, 0.0);
    for (const auto& [size, freq] : a.size_freq) va[size - lo] = freq;
    for (const auto& [size, freq] : b.size_freq) vb[size - lo] = freq;
    return pearson(va, vb);
}

double gap_correlation(const TraceProfile& a, const TraceProfile& b) {
    return pearson(a.gap_freq, b.gap_freq);
}

std::vector<RocPoint> roc_sweep(const std::vector<FlowTrace>& traces, const ForestParams& params,
                                const std::vector<int>& windows, uint64_t seed) {
    if (traces.size() < 2) throw std::invalid_argument("roc_sweep: need >= 2 labeled traces");
    std::vector<RocPoint> points;
    points.reserve(windows.size());
    for (int w : windows) {
        std::vector<FeatureMatrix> matrices;
        matrices.reserve(traces.size());
        for (const auto& trace : traces) matrices.push_back(build_features(trace, w));
        FeatureMatrix matrix = assemble(matrices);
        CrossValReport cv =
            cross_validate(matrix, params, 10, derive_seed(seed, static_cast<uint64_t>(w)));
        points.push_back({w, cv.aggregate.fpr, cv.aggregate.tpr});
    }
    return points;
}

void emit_plot_data(const EvalReport& report, const std::filesystem::path& path) {
    Table table;
    table.columns = {"window", "fpr", "tpr"};
    for (const auto& point : report.roc_points) {
        table.rows.push_back({static_cast<double>(point.window), point.fpr, point.tpr});
    }
    write_table(path, table);
}

void write_delay_table(const std::filesystem::path& path,
                       const std::map<int, DelayQuantiles>& quantiles) {
    Table table;
    table.columns = {"window", "q05", "q50", "q95"};
    for (const auto& [w, dq] : quantiles) {
        table.rows.push_back({static_cast<double>(w), dq.q05, dq.q50, dq.q95});
    }
    write_table(path, table);
}

void write_size_profile_table(const std::filesystem::path& path, const TraceProfile& profile) {
    Table table;
    table.columns = {"size_bytes", "frequency"};
    for (const auto& [size, freq] : profile.size_freq) {
        table.rows.push_back({static_cast<double>(size), freq});
    }
    write_table(path, table);
}

void write_gap_profile_table(const std::filesystem::path& path, const TraceProfile& profile) {
    Table table;
    table.columns = {"gap_bin_low_s", "frequency"};
    for (int bin = 0; bin < kGapBinCount; ++bin) {
        double low = kGapBinMin * std::pow(10.0, static_cast<double>(bin) / kGapBinsPerDecade);
        table.rows.push_back({low, profile.gap_freq[bin]});
    }
    write_table(path, table);
}

}  // namespace pinch
