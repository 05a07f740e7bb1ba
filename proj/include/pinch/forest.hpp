#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pinch/features.hpp"
#include "pinch/metrics.hpp"
#include "pinch/rng.hpp"

namespace pinch {

// Threshold-split node. Internal nodes route rows with x[feature] < threshold
// to the left child. Leaves keep their training class counts in the tree's
// vote pool and predict the argmax label (ties resolve to the lowest label).
struct TreeNode {
    int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int32_t left = -1;
    int32_t right = -1;
    int32_t votes_at = -1;        // leaf: offset into Tree::votes (one slot per label)
    int32_t predicted_slot = -1;  // leaf: index into the label set

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::vector<int64_t> votes;   // leaf class counts, label_count per leaf
};

struct ForestParams {
    int tree_count = 100;
    int max_depth = 0;  // 0 = unlimited
    int min_leaf_size = 1;
    int features_per_split = 3;  // ceil(sqrt(6))
    bool bootstrap = true;

    void validate() const;
};

struct ForestModel {
    std::vector<Tree> trees;
    ForestParams params;
    uint64_t seed = 0;
    int window = 0;  // training window size, recorded for detect-time checks
    std::vector<int> labels;  // sorted ascending
    std::array<double, kFeatureCount> feature_importances{};
};

// Shannon entropy in bits of a label-count vector; 0·log2(0) := 0.
double entropy(std::span<const int64_t> counts);

// Weighted two-sided conditional-entropy reduction of splitting rows at
// x[feature] < threshold. A split with an empty side gains nothing.
double information_gain(std::span<const FeatureRow> rows, int feature, double threshold);

struct SplitChoice {
    int feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

// Exhaustive search over midpoints between consecutive distinct values of
// each candidate feature. Ties break to the lowest feature index, then the
// lowest threshold. Returns nothing when no split gains.
std::optional<SplitChoice> best_split(std::span<const FeatureRow> rows,
                                      std::span<const int> candidate_features);

std::vector<int> distinct_labels(std::span<const FeatureRow> rows);

// Grows one tree on the given rows. Candidate features at each node are a
// uniform random subset of size features_per_split drawn from rng.
Tree train_tree(std::span<const FeatureRow> rows, const ForestParams& params, RngStream& rng);

// Leaf label slot for a feature vector (index into the training label set).
int predict_tree(const Tree& tree, std::span<const double> x);

// K trees on bootstrap samples; per-tree random streams derive from
// (seed, tree index) so results are independent of scheduling.
ForestModel train_forest(const FeatureMatrix& matrix, const ForestParams& params, uint64_t seed);

struct Prediction {
    int label = 0;
    std::vector<double> vote_fractions;  // per label, ordered as model.labels
};

Prediction predict(const ForestModel& model, std::span<const double> x);

// Stratified fold ids (0..folds-1) for each row label: folds are disjoint,
// cover all rows, overall sizes differ by at most one, and each class is
// spread within ±1 row across folds.
std::vector<int> stratified_folds(std::span<const int> row_labels, int folds, RngStream& rng);

struct CrossValReport {
    std::vector<EvalReport> folds;
    EvalReport aggregate;  // pooled confusion counts
};

CrossValReport cross_validate(const FeatureMatrix& matrix, const ForestParams& params, int folds,
                              uint64_t seed);

// Versioned model file; load(save(m)) predicts identically to m.
void save_model(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);

}  // namespace pinch
