#include "pinch/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace pinch {

namespace {

constexpr int kModelVersion = 1;
constexpr char kModelFormat[] = "pinch-forest";

// H = log2(n) - (1/n)·sum(c·log2 c); exact 0 for pure sets, log2 L for
// uniform ones, and never negative.
double entropy_of(const int64_t* counts, size_t label_count, int64_t total) {
    if (total <= 0) return 0.0;
    double acc = 0.0;
    for (size_t l = 0; l < label_count; ++l) {
        if (counts[l] > 0) {
            acc += static_cast<double>(counts[l]) * std::log2(static_cast<double>(counts[l]));
        }
    }
    double h = std::log2(static_cast<double>(total)) - acc / static_cast<double>(total);
    return h > 0.0 ? h : 0.0;
}

double gain_of(const int64_t* total_counts, const int64_t* left_counts, size_t label_count,
               int64_t n_left, int64_t n_total) {
    int64_t n_right = n_total - n_left;
    if (n_left == 0 || n_right == 0) return 0.0;
    double h = entropy_of(total_counts, label_count, n_total);
    double h_left = entropy_of(left_counts, label_count, n_left);
    double h_right;
    {
        // right counts derived by subtraction
        int64_t right[64];
        for (size_t l = 0; l < label_count; ++l) right[l] = total_counts[l] - left_counts[l];
        h_right = entropy_of(right, label_count, n_right);
    }
    double wl = static_cast<double>(n_left) / static_cast<double>(n_total);
    double wr = static_cast<double>(n_right) / static_cast<double>(n_total);
    double gain = h - wl * h_left - wr * h_right;
    return gain > 0.0 ? gain : 0.0;
}

// Best threshold for one feature: scans midpoints between consecutive
// distinct sorted values, keeping the lowest threshold on gain ties. Sides
// smaller than min_leaf are not considered.
std::optional<std::pair<double, double>> best_threshold(
    std::vector<std::pair<double, int32_t>>& values, const int64_t* total_counts,
    size_t label_count, int64_t min_leaf) {
    std::sort(values.begin(), values.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    int64_t n = static_cast<int64_t>(values.size());
    int64_t left_counts[64] = {0};
    std::optional<std::pair<double, double>> best;  // (threshold, gain)
    for (int64_t i = 0; i + 1 < n; ++i) {
        ++left_counts[values[i].second];
        if (values[i].first == values[i + 1].first) continue;
        int64_t n_left = i + 1;
        if (n_left < min_leaf || n - n_left < min_leaf) continue;
        double gain = gain_of(total_counts, left_counts, label_count, n_left, n);
        if (gain > 0.0 && (!best || gain > best->second)) {
            best = {(values[i].first + values[i + 1].first) / 2.0, gain};
        }
    }
    return best;
}

// Column view of a feature matrix with labels compacted to slots 0..L-1.
struct Dataset {
    std::array<std::vector<double>, kFeatureCount> col;
    std::vector<int32_t> slot;
    size_t label_count = 0;
};

Dataset make_dataset(std::span<const FeatureRow> rows, const std::vector<int>& labels) {
    Dataset data;
    data.label_count = labels.size();
    for (auto& c : data.col) c.reserve(rows.size());
    data.slot.reserve(rows.size());
    for (const auto& row : rows) {
        for (int f = 0; f < kFeatureCount; ++f) data.col[f].push_back(row.x[f]);
        auto it = std::lower_bound(labels.begin(), labels.end(), row.y);
        data.slot.push_back(static_cast<int32_t>(it - labels.begin()));
    }
    return data;
}

struct PendingNode {
    int32_t node = 0;
    uint32_t begin = 0;
    uint32_t end = 0;
    int depth = 0;
};

int32_t make_leaf(Tree& tree, int32_t node, const int64_t* counts, size_t label_count) {
    TreeNode& leaf = tree.nodes[node];
    leaf.feature = -1;
    leaf.votes_at = static_cast<int32_t>(tree.votes.size());
    int32_t best_slot = 0;
    for (size_t l = 0; l < label_count; ++l) {
        tree.votes.push_back(counts[l]);
        if (counts[l] > counts[best_slot]) best_slot = static_cast<int32_t>(l);
    }
    leaf.predicted_slot = best_slot;
    return node;
}

// Iterative growth over an index range that is partitioned in place; avoids
// deep recursion on unlimited-depth trees.
Tree grow_tree(const Dataset& data, std::vector<uint32_t>& indices, const ForestParams& params,
               RngStream& rng, std::array<double, kFeatureCount>* importance_raw) {
    Tree tree;
    tree.nodes.reserve(indices.size() * 2);
    tree.nodes.emplace_back();
    std::vector<PendingNode> stack;
    stack.push_back({0, 0, static_cast<uint32_t>(indices.size()), 0});

    std::vector<std::pair<double, int32_t>> values;
    std::array<int, kFeatureCount> feature_pool{};
    const size_t label_count = data.label_count;

    while (!stack.empty()) {
        PendingNode work = stack.back();
        stack.pop_back();
        const uint32_t n = work.end - work.begin;

        int64_t counts[64] = {0};
        for (uint32_t i = work.begin; i < work.end; ++i) ++counts[data.slot[indices[i]]];
        int64_t majority = 0;
        for (size_t l = 0; l < label_count; ++l) majority = std::max(majority, counts[l]);

        bool pure = majority == static_cast<int64_t>(n);
        bool depth_capped = params.max_depth > 0 && work.depth >= params.max_depth;
        bool too_small = static_cast<int64_t>(n) < 2 * static_cast<int64_t>(params.min_leaf_size);
        if (pure || depth_capped || too_small || n < 2) {
            make_leaf(tree, work.node, counts, label_count);
            continue;
        }

        // Candidate features: uniform subset of size features_per_split,
        // scanned in ascending order so ties resolve to the lowest index.
        int m = std::min(params.features_per_split, kFeatureCount);
        for (int f = 0; f < kFeatureCount; ++f) feature_pool[f] = f;
        if (m < kFeatureCount) {
            for (int i = 0; i < m; ++i) {
                int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(kFeatureCount - i)));
                std::swap(feature_pool[i], feature_pool[j]);
            }
            std::sort(feature_pool.begin(), feature_pool.begin() + m);
        }

        SplitChoice best{};
        bool found = false;
        for (int fi = 0; fi < m; ++fi) {
            int f = feature_pool[fi];
            values.clear();
            for (uint32_t i = work.begin; i < work.end; ++i) {
                values.emplace_back(data.col[f][indices[i]], data.slot[indices[i]]);
            }
            auto cand = best_threshold(values, counts, label_count, params.min_leaf_size);
            if (cand && (!found || cand->second > best.gain)) {
                best = {f, cand->first, cand->second};
                found = true;
            }
        }
        if (!found) {
            make_leaf(tree, work.node, counts, label_count);
            continue;
        }

        if (importance_raw) {
            (*importance_raw)[best.feature] += best.gain * static_cast<double>(n);
        }

        auto mid_it = std::partition(indices.begin() + work.begin, indices.begin() + work.end,
                                     [&](uint32_t idx) {
                                         return data.col[best.feature][idx] < best.threshold;
                                     });
        uint32_t mid = static_cast<uint32_t>(mid_it - indices.begin());

        int32_t left = static_cast<int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        int32_t right = static_cast<int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        TreeNode& node = tree.nodes[work.node];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left;
        node.right = right;
        stack.push_back({right, mid, work.end, work.depth + 1});
        stack.push_back({left, work.begin, mid, work.depth + 1});
    }
    return tree;
}

void run_parallel(size_t jobs, const std::function<void(size_t)>& fn) {
    unsigned workers = std::min<size_t>(std::thread::hardware_concurrency(), jobs);
    if (workers <= 1) {
        for (size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        threads.emplace_back([&] {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

void ForestParams::validate() const {
    if (tree_count < 1) throw std::invalid_argument("forest params: tree_count must be >= 1");
    if (max_depth < 0) throw std::invalid_argument("forest params: max_depth must be >= 0");
    if (min_leaf_size < 1) throw std::invalid_argument("forest params: min_leaf_size must be >= 1");
    if (features_per_split < 1 || features_per_split > kFeatureCount) {
        throw std::invalid_argument("forest params: features_per_split must be in 1..6");
    }
}

double entropy(std::span<const int64_t> counts) {
    int64_t total = 0;
    for (int64_t c : counts) {
        if (c < 0) throw std::invalid_argument("entropy: negative count");
        total += c;
    }
    if (total == 0) throw std::invalid_argument("entropy: empty counts");
    if (counts.size() > 64) throw std::invalid_argument("entropy: too many labels");
    int64_t buf[64];
    std::copy(counts.begin(), counts.end(), buf);
    return entropy_of(buf, counts.size(), total);
}

std::vector<int> distinct_labels(std::span<const FeatureRow> rows) {
    std::vector<int> labels;
    for (const auto& row : rows) labels.push_back(row.y);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    return labels;
}

double information_gain(std::span<const FeatureRow> rows, int feature, double threshold) {
    if (rows.empty()) throw std::invalid_argument("information_gain: no rows");
    if (feature < 0 || feature >= kFeatureCount) {
        throw std::invalid_argument("information_gain: feature index out of range");
    }
    auto labels = distinct_labels(rows);
    if (labels.size() > 64) throw std::invalid_argument("information_gain: too many labels");
    int64_t total_counts[64] = {0};
    int64_t left_counts[64] = {0};
    int64_t n_left = 0;
    for (const auto& row : rows) {
        auto slot = std::lower_bound(labels.begin(), labels.end(), row.y) - labels.begin();
        ++total_counts[slot];
        if (row.x[feature] < threshold) {
            ++left_counts[slot];
            ++n_left;
        }
    }
    return gain_of(total_counts, left_counts, labels.size(), n_left,
                   static_cast<int64_t>(rows.size()));
}

std::optional<SplitChoice> best_split(std::span<const FeatureRow> rows,
                                      std::span<const int> candidate_features) {
    if (rows.size() < 2) return std::nullopt;
    auto labels = distinct_labels(rows);
    if (labels.size() < 2) return std::nullopt;
    if (labels.size() > 64) throw std::invalid_argument("best_split: too many labels");

    int64_t total_counts[64] = {0};
    for (const auto& row : rows) {
        auto slot = std::lower_bound(labels.begin(), labels.end(), row.y) - labels.begin();
        ++total_counts[slot];
    }

    std::vector<int> features(candidate_features.begin(), candidate_features.end());
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());

    SplitChoice best{};
    bool found = false;
    std::vector<std::pair<double, int32_t>> values;
    for (int f : features) {
        if (f < 0 || f >= kFeatureCount) {
            throw std::invalid_argument("best_split: feature index out of range");
        }
        values.clear();
        for (const auto& row : rows) {
            auto slot = std::lower_bound(labels.begin(), labels.end(), row.y) - labels.begin();
            values.emplace_back(row.x[f], static_cast<int32_t>(slot));
        }
        auto cand = best_threshold(values, total_counts, labels.size(), 1);
        if (cand && (!found || cand->second > best.gain)) {
            best = {f, cand->first, cand->second};
            found = true;
        }
    }
    return found ? std::optional(best) : std::nullopt;
}

Tree train_tree(std::span<const FeatureRow> rows, const ForestParams& params, RngStream& rng) {
    if (rows.empty()) throw std::invalid_argument("train_tree: no rows");
    params.validate();
    auto labels = distinct_labels(rows);
    if (labels.size() > 64) throw std::invalid_argument("train_tree: too many labels");
    Dataset data = make_dataset(rows, labels);
    std::vector<uint32_t> indices(rows.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<uint32_t>(i);
    return grow_tree(data, indices, params, rng, nullptr);
}

int predict_tree(const Tree& tree, std::span<const double> x) {
    const TreeNode* node = &tree.nodes[0];
    while (!node->is_leaf()) {
        node = &tree.nodes[x[node->feature] < node->threshold ? node->left : node->right];
    }
    return node->predicted_slot;
}

ForestModel train_forest(const FeatureMatrix& matrix, const ForestParams& params, uint64_t seed) {
    params.validate();
    const auto& rows = matrix.rows;
    auto labels = distinct_labels(rows);
    if (labels.size() < 2) {
        throw std::invalid_argument("train_forest: need >= 2 classes, got " +
                                    std::to_string(labels.size()));
    }
    if (labels.size() > 64) throw std::invalid_argument("train_forest: too many labels");
    if (rows.size() < 2 * static_cast<size_t>(params.min_leaf_size)) {
        throw std::invalid_argument("train_forest: too few rows");
    }

    Dataset data = make_dataset(rows, labels);
    const size_t row_count = rows.size();
    const size_t tree_count = static_cast<size_t>(params.tree_count);

    ForestModel model;
    model.params = params;
    model.seed = seed;
    model.window = matrix.window;
    model.labels = labels;
    model.trees.resize(tree_count);

    std::vector<std::array<double, kFeatureCount>> raw_importance(tree_count);
    run_parallel(tree_count, [&](size_t k) {
        RngStream rng = RngStream::derive(seed, k);
        std::vector<uint32_t> indices(row_count);
        if (params.bootstrap) {
            for (auto& idx : indices) idx = static_cast<uint32_t>(rng.below(row_count));
        } else {
            for (size_t i = 0; i < row_count; ++i) indices[i] = static_cast<uint32_t>(i);
        }
        raw_importance[k] = {};
        model.trees[k] = grow_tree(data, indices, params, rng, &raw_importance[k]);
    });

    // Mean decrease in impurity, summed in tree order and normalized to 1.
    std::array<double, kFeatureCount> total{};
    for (size_t k = 0; k < tree_count; ++k) {
        for (int f = 0; f < kFeatureCount; ++f) total[f] += raw_importance[k][f];
    }
    double sum = 0.0;
    for (double v : total) sum += v;
    if (sum > 0.0) {
        for (int f = 0; f < kFeatureCount; ++f) model.feature_importances[f] = total[f] / sum;
    } else {
        model.feature_importances.fill(1.0 / kFeatureCount);
    }
    return model;
}

Prediction predict(const ForestModel& model, std::span<const double> x) {
    if (model.trees.empty()) throw std::invalid_argument("predict: model has no trees");
    if (x.size() != static_cast<size_t>(kFeatureCount)) {
        throw std::invalid_argument("predict: expected 6 features");
    }
    std::vector<int64_t> votes(model.labels.size(), 0);
    for (const auto& tree : model.trees) ++votes[predict_tree(tree, x)];
    size_t best = 0;
    for (size_t l = 1; l < votes.size(); ++l) {
        if (votes[l] > votes[best]) best = l;
    }
    Prediction out;
    out.label = model.labels[best];
    out.vote_fractions.reserve(votes.size());
    for (int64_t v : votes) {
        out.vote_fractions.push_back(static_cast<double>(v) /
                                     static_cast<double>(model.trees.size()));
    }
    return out;
}

std::vector<int> stratified_folds(std::span<const int> row_labels, int folds, RngStream& rng) {
    if (folds < 2) throw std::invalid_argument("stratified_folds: need >= 2 folds");
    std::map<int, std::vector<uint32_t>> by_class;
    for (size_t i = 0; i < row_labels.size(); ++i) {
        by_class[row_labels[i]].push_back(static_cast<uint32_t>(i));
    }
    for (const auto& [label, members] : by_class) {
        if (members.size() < static_cast<size_t>(folds)) {
            throw std::invalid_argument("stratified_folds: class " + std::to_string(label) +
                                        " has " + std::to_string(members.size()) +
                                        " rows, fewer than " + std::to_string(folds) + " folds");
        }
    }
    std::vector<int> assignment(row_labels.size(), 0);
    // The fold cursor keeps advancing across classes so per-class remainders
    // land on consecutive folds: per-class spread <= 1 and global spread <= 1.
    int cursor = 0;
    for (auto& [label, members] : by_class) {
        rng.shuffle(members);
        for (size_t i = 0; i < members.size(); ++i) {
            assignment[members[i]] = (cursor + static_cast<int>(i % folds)) % folds;
        }
        cursor = (cursor + static_cast<int>(members.size() % folds)) % folds;
    }
    return assignment;
}

CrossValReport cross_validate(const FeatureMatrix& matrix, const ForestParams& params, int folds,
                              uint64_t seed) {
    std::vector<int> row_labels;
    row_labels.reserve(matrix.rows.size());
    for (const auto& row : matrix.rows) row_labels.push_back(row.y);
    RngStream fold_rng = RngStream::derive(seed, 0xF01D5EEDULL);
    auto assignment = stratified_folds(row_labels, folds, fold_rng);

    CrossValReport report;
    std::vector<int> all_truth, all_pred;
    all_truth.reserve(matrix.rows.size());
    all_pred.reserve(matrix.rows.size());
    for (int f = 0; f < folds; ++f) {
        FeatureMatrix train;
        train.window = matrix.window;
        train.source = matrix.source;
        std::vector<const FeatureRow*> test;
        for (size_t i = 0; i < matrix.rows.size(); ++i) {
            if (assignment[i] == f) {
                test.push_back(&matrix.rows[i]);
            } else {
                train.rows.push_back(matrix.rows[i]);
            }
        }
        ForestModel model = train_forest(train, params, derive_seed(seed, static_cast<uint64_t>(f)));
        std::vector<int> truth, pred;
        truth.reserve(test.size());
        pred.reserve(test.size());
        for (const FeatureRow* row : test) {
            truth.push_back(row->y);
            pred.push_back(predict(model, row->x).label);
        }
        report.folds.push_back(score(truth, pred));
        all_truth.insert(all_truth.end(), truth.begin(), truth.end());
        all_pred.insert(all_pred.end(), pred.begin(), pred.end());
    }
    report.aggregate = score(all_truth, all_pred);
    return report;
}

void save_model(const ForestModel& model, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["format"] = kModelFormat;
    doc["version"] = kModelVersion;
    doc["seed"] = model.seed;
    doc["window"] = model.window;
    doc["labels"] = model.labels;
    doc["params"] = {{"trees", model.params.tree_count},
                     {"max_depth", model.params.max_depth},
                     {"min_leaf_size", model.params.min_leaf_size},
                     {"features_per_split", model.params.features_per_split},
                     {"bootstrap", model.params.bootstrap}};
    doc["importances"] = model.feature_importances;

    nlohmann::json trees = nlohmann::json::array();
    const size_t label_count = model.labels.size();
    for (const auto& tree : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& node : tree.nodes) {
            if (node.is_leaf()) {
                nlohmann::json votes = nlohmann::json::array();
                for (size_t l = 0; l < label_count; ++l) {
                    votes.push_back(tree.votes[node.votes_at + l]);
                }
                nodes.push_back(nlohmann::json::array({-1, std::move(votes)}));
            } else {
                nodes.push_back(
                    nlohmann::json::array({node.feature, node.threshold, node.left, node.right}));
            }
        }
        trees.push_back(std::move(nodes));
    }
    doc["trees"] = std::move(trees);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model " + path.string());
    out << doc.dump() << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ForestModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read model " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt model file " + path.string() + ": " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != kModelFormat) {
            throw std::runtime_error("not a forest model file");
        }
        int version = doc.at("version").get<int>();
        if (version != kModelVersion) {
            throw std::runtime_error("unsupported model file version " + std::to_string(version) +
                                     " (this build reads version " +
                                     std::to_string(kModelVersion) + ")");
        }
        ForestModel model;
        model.seed = doc.at("seed").get<uint64_t>();
        model.window = doc.at("window").get<int>();
        model.labels = doc.at("labels").get<std::vector<int>>();
        const auto& params = doc.at("params");
        model.params.tree_count = params.at("trees").get<int>();
        model.params.max_depth = params.at("max_depth").get<int>();
        model.params.min_leaf_size = params.at("min_leaf_size").get<int>();
        model.params.features_per_split = params.at("features_per_split").get<int>();
        model.params.bootstrap = params.at("bootstrap").get<bool>();
        auto imp = doc.at("importances").get<std::vector<double>>();
        if (imp.size() != kFeatureCount) throw std::runtime_error("bad importances");
        std::copy(imp.begin(), imp.end(), model.feature_importances.begin());

        const size_t label_count = model.labels.size();
        for (const auto& tree_doc : doc.at("trees")) {
            Tree tree;
            tree.nodes.reserve(tree_doc.size());
            for (const auto& node_doc : tree_doc) {
                TreeNode node;
                int feature = node_doc.at(0).get<int>();
                if (feature < 0) {
                    auto votes = node_doc.at(1).get<std::vector<int64_t>>();
                    if (votes.size() != label_count) throw std::runtime_error("bad leaf votes");
                    node.feature = -1;
                    node.votes_at = static_cast<int32_t>(tree.votes.size());
                    int32_t best_slot = 0;
                    for (size_t l = 0; l < label_count; ++l) {
                        tree.votes.push_back(votes[l]);
                        if (votes[l] > votes[best_slot]) best_slot = static_cast<int32_t>(l);
                    }
                    node.predicted_slot = best_slot;
                } else {
                    if (feature >= kFeatureCount) throw std::runtime_error("bad feature index");
                    node.feature = feature;
                    node.threshold = node_doc.at(1).get<double>();
                    node.left = node_doc.at(2).get<int32_t>();
                    node.right = node_doc.at(3).get<int32_t>();
                }
                tree.nodes.push_back(node);
            }
            for (const auto& node : tree.nodes) {
                if (!node.is_leaf()) {
                    auto count = static_cast<int32_t>(tree.nodes.size());
                    if (node.left < 0 || node.left >= count || node.right < 0 ||
                        node.right >= count) {
                        throw std::runtime_error("bad child index");
                    }
                }
            }
            if (tree.nodes.empty()) throw std::runtime_error("empty tree");
            model.trees.push_back(std::move(tree));
        }
        if (model.trees.empty()) throw std::runtime_error("model has no trees");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt model file " + path.string() + ": " + e.what());
    }
}

}  // namespace pinch
