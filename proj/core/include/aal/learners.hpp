#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aal/core.hpp"

namespace aal {

struct Dataset {
    std::vector<std::vector<double>> x;
    std::vector<int> y;        // labels in [0, class_count)
    int class_count = 0;

    std::size_t n() const { return x.size(); }
    std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }

    void add(std::vector<double> features, int label);
    void validate() const;  // throws Error on shape/label violations
};

// ---------------------------------------------------------------------------
// kNN

struct KnnModel {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    int k = 5;
    int class_count = 0;
};

KnnModel knn_fit(const Dataset& data, int k);

// Majority label among the k nearest rows by Euclidean distance. Distance
// ties break by training-row insertion order; vote ties by lowest class
// index. Throws Error("DimensionMismatch") on shape mismatch.
int knn_predict(const KnnModel& model, std::span<const double> query);

// ---------------------------------------------------------------------------
// Decision tree / random forest

// Gini impurity 1 - sum(p_i^2). Throws Error on an empty node.
double gini(std::span<const std::size_t> label_counts);

struct TreeNode {
    // leaf_class >= 0 marks a leaf; internal nodes have feature/threshold
    // and two child indices.
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf_class = -1;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // node 0 is the root
    int class_count = 0;
    std::size_t dim = 0;
};

// CART-style greedy fit: per node, a seeded random feature subset of size m,
// candidate thresholds at midpoints between consecutive sorted distinct
// values, split minimizing weighted Gini. Stops at purity, max_depth, or no
// impurity-reducing split.
DecisionTree tree_fit(const Dataset& data, int max_depth, std::size_t m,
                      std::uint64_t seed);
int tree_predict(const DecisionTree& tree, std::span<const double> query);

struct ForestModel {
    std::vector<DecisionTree> trees;
    std::size_t feature_subset_size = 0;
    std::uint64_t seed = 0;
    int class_count = 0;
    std::size_t dim = 0;
};

struct ForestVote {
    int cls = 0;
    std::vector<double> fractions;  // per class, sums to 1
};

ForestModel forest_fit(const Dataset& data, int n_trees, int max_depth,
                       std::size_t m, bool bootstrap, std::uint64_t seed);
ForestVote forest_predict(const ForestModel& model, std::span<const double> query);

// ---------------------------------------------------------------------------
// AdaBoost (multiclass SAMME over kNN weak learners)

struct BoostRound {
    KnnModel weak;
    double alpha = 0.0;
};

struct BoostedEnsemble {
    std::vector<BoostRound> rounds;
    int class_count = 0;
    std::size_t dim = 0;
};

// weight_sums, when given, receives the post-update training-weight total
// after each accepted round (should be 1 up to rounding).
BoostedEnsemble adaboost_fit(const Dataset& data, int rounds, int k_neighbors,
                             std::uint64_t seed,
                             std::vector<double>* weight_sums = nullptr);

// Per-class accumulated alpha-weighted votes, normalized to sum to 1.
std::vector<double> adaboost_scores(const BoostedEnsemble& model,
                                    std::span<const double> query);
int adaboost_predict(const BoostedEnsemble& model, std::span<const double> query);

// ---------------------------------------------------------------------------
// Evaluation

class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int class_count)
        : k_(class_count), counts_(static_cast<std::size_t>(class_count) * class_count, 0) {}

    int class_count() const { return k_; }
    std::int64_t at(int truth, int predicted) const {
        return counts_[static_cast<std::size_t>(truth) * k_ + predicted];
    }
    void add(int truth, int predicted) {
        ++counts_[static_cast<std::size_t>(truth) * k_ + predicted];
    }
    std::int64_t total() const;
    std::int64_t trace() const;
    double accuracy() const;  // trace/total; throws Error on empty matrix
    double precision(int cls) const;
    double recall(int cls) const;

private:
    int k_ = 0;
    std::vector<std::int64_t> counts_;
};

// Fold id per row: per-class round-robin after a seeded shuffle. Fold sizes
// per class differ by at most 1.
std::vector<int> stratified_folds(const std::vector<int>& labels, int class_count,
                                  int folds, std::uint64_t seed);

using Predictor = std::function<int(std::span<const double>)>;
using TrainFn = std::function<Predictor(const Dataset&)>;

// Out-of-fold predictions aggregated into one confusion matrix.
ConfusionMatrix cross_validate(const Dataset& data, int folds,
                               const TrainFn& train, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialization (versioned text; loss-free doubles via shortest round-trip)

std::string serialize(const ForestModel& model);
std::string serialize(const BoostedEnsemble& model);
ForestModel parse_forest(const std::string& text);
BoostedEnsemble parse_ensemble(const std::string& text);

}  // namespace aal
