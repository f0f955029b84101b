#include "aal/learners.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "aal/rng.hpp"

namespace aal {

void Dataset::add(std::vector<double> features, int label) {
    x.push_back(std::move(features));
    y.push_back(label);
}

void Dataset::validate() const {
    if (x.size() != y.size()) throw Error("Dataset: x/y size mismatch");
    if (class_count < 2) throw Error("Dataset: class_count must be >= 2");
    const std::size_t d = dim();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].size() != d) throw Error("Dataset: inconsistent feature dim");
        if (y[i] < 0 || y[i] >= class_count) throw Error("Dataset: label out of range");
    }
}

// ---------------------------------------------------------------------------
// kNN

KnnModel knn_fit(const Dataset& data, int k) {
    if (data.n() == 0) throw Error("EmptyDataset");
    if (k < 1 || static_cast<std::size_t>(k) > data.n()) {
        throw Error("knn_fit: k must be in [1, n]");
    }
    return KnnModel{data.x, data.y, k, data.class_count};
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

int majority_lowest(std::span<const double> votes) {
    int best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c) {
        if (votes[c] > votes[best]) best = static_cast<int>(c);
    }
    return best;
}

}  // namespace

int knn_predict(const KnnModel& model, std::span<const double> query) {
    if (model.x.empty()) throw Error("EmptyDataset");
    if (query.size() != model.x.front().size()) throw Error("DimensionMismatch");

    // (distance, insertion index); stable ordering realizes the tie rule.
    std::vector<std::pair<double, std::size_t>> order(model.x.size());
    for (std::size_t i = 0; i < model.x.size(); ++i) {
        order[i] = {sq_dist(model.x[i], query), i};
    }
    const std::size_t k = static_cast<std::size_t>(model.k);
    std::partial_sort(order.begin(), order.begin() + k, order.end());

    std::vector<double> votes(model.class_count, 0.0);
    for (std::size_t i = 0; i < k; ++i) votes[model.y[order[i].second]] += 1.0;
    return majority_lowest(votes);
}

// ---------------------------------------------------------------------------
// Decision tree

double gini(std::span<const std::size_t> label_counts) {
    std::size_t total = 0;
    for (std::size_t c : label_counts) total += c;
    if (total == 0) throw Error("EmptyNode");
    double sum_sq = 0.0;
    for (std::size_t c : label_counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

namespace {

struct TreeBuilder {
    const Dataset& data;
    int max_depth;
    std::size_t m;
    Rng rng;
    DecisionTree tree;

    int leaf(std::span<const std::size_t> counts) {
        int best = 0;
        for (std::size_t c = 1; c < counts.size(); ++c) {
            if (counts[c] > counts[best]) best = static_cast<int>(c);
        }
        TreeNode node;
        node.leaf_class = best;
        tree.nodes.push_back(node);
        return static_cast<int>(tree.nodes.size() - 1);
    }

    std::vector<std::size_t> label_counts(const std::vector<std::size_t>& rows) const {
        std::vector<std::size_t> counts(data.class_count, 0);
        for (std::size_t r : rows) ++counts[data.y[r]];
        return counts;
    }

    // Random feature subset of size m, without replacement.
    std::vector<std::size_t> feature_subset() {
        const std::size_t d = data.dim();
        std::vector<std::size_t> idx(d);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < m; ++i) {
            std::swap(idx[i], idx[i + rng.uniform_index(d - i)]);
        }
        idx.resize(m);
        return idx;
    }

    int build(const std::vector<std::size_t>& rows, int depth) {
        const auto counts = label_counts(rows);
        const double impurity = gini(counts);
        if (impurity == 0.0 || depth >= max_depth) return leaf(counts);

        // Best candidate split by weighted child Gini. Zero-gain splits are
        // admissible (an XOR-shaped node needs one to become separable one
        // level down); recursion still terminates because children shrink.
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_score = std::numeric_limits<double>::infinity();

        for (std::size_t f : feature_subset()) {
            std::vector<std::pair<double, int>> vals(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                vals[i] = {data.x[rows[i]][f], data.y[rows[i]]};
            }
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            std::vector<std::size_t> left(data.class_count, 0);
            std::vector<std::size_t> right = counts;
            const double n = static_cast<double>(rows.size());
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                ++left[vals[i].second];
                --right[vals[i].second];
                if (vals[i].first == vals[i + 1].first) continue;
                const double threshold = vals[i].first +
                                         (vals[i + 1].first - vals[i].first) / 2.0;
                const double nl = static_cast<double>(i + 1);
                const double score =
                    (nl * gini(left) + (n - nl) * gini(right)) / n;
                if (score < best_score - 1e-12) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = threshold;
                }
            }
        }
        if (best_feature < 0) return leaf(counts);

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            (data.x[r][best_feature] < best_threshold ? left_rows : right_rows)
                .push_back(r);
        }
        TreeNode node;
        node.feature = best_feature;
        node.threshold = best_threshold;
        tree.nodes.push_back(node);
        const int self = static_cast<int>(tree.nodes.size() - 1);
        tree.nodes[self].left = build(left_rows, depth + 1);
        tree.nodes[self].right = build(right_rows, depth + 1);
        return self;
    }
};

}  // namespace

DecisionTree tree_fit(const Dataset& data, int max_depth, std::size_t m,
                      std::uint64_t seed) {
    if (data.n() == 0) throw Error("EmptyDataset");
    data.validate();
    if (m < 1 || m > data.dim()) throw Error("tree_fit: m must be in [1, dim]");

    TreeBuilder builder{data, max_depth, m, Rng(seed), {}};
    builder.tree.class_count = data.class_count;
    builder.tree.dim = data.dim();
    std::vector<std::size_t> rows(data.n());
    std::iota(rows.begin(), rows.end(), 0);
    // Root must be node 0: build appends children after their parent.
    builder.build(rows, 0);
    return std::move(builder.tree);
}

int tree_predict(const DecisionTree& tree, std::span<const double> query) {
    if (query.size() != tree.dim) throw Error("DimensionMismatch");
    int node = 0;
    while (tree.nodes[node].leaf_class < 0) {
        const auto& n = tree.nodes[node];
        node = query[n.feature] < n.threshold ? n.left : n.right;
    }
    return tree.nodes[node].leaf_class;
}

// ---------------------------------------------------------------------------
// Random forest

ForestModel forest_fit(const Dataset& data, int n_trees, int max_depth,
                       std::size_t m, bool bootstrap, std::uint64_t seed) {
    if (data.n() == 0) throw Error("EmptyDataset");
    if (n_trees < 1) throw Error("forest_fit: n_trees must be >= 1");
    data.validate();

    ForestModel model;
    model.feature_subset_size = m;
    model.seed = seed;
    model.class_count = data.class_count;
    model.dim = data.dim();

    const Rng base(seed);
    for (int t = 0; t < n_trees; ++t) {
        Rng tree_rng = base.derive(static_cast<std::uint64_t>(t));
        const std::uint64_t tree_seed = tree_rng.next_u64();
        if (bootstrap) {
            Dataset sample;
            sample.class_count = data.class_count;
            for (std::size_t i = 0; i < data.n(); ++i) {
                const std::size_t r = tree_rng.uniform_index(data.n());
                sample.add(data.x[r], data.y[r]);
            }
            model.trees.push_back(tree_fit(sample, max_depth, m, tree_seed));
        } else {
            model.trees.push_back(tree_fit(data, max_depth, m, tree_seed));
        }
    }
    return model;
}

ForestVote forest_predict(const ForestModel& model, std::span<const double> query) {
    if (query.size() != model.dim) throw Error("DimensionMismatch");
    ForestVote vote;
    vote.fractions.assign(model.class_count, 0.0);
    for (const auto& tree : model.trees) {
        vote.fractions[tree_predict(tree, query)] += 1.0;
    }
    const double n = static_cast<double>(model.trees.size());
    for (auto& f : vote.fractions) f /= n;
    vote.cls = majority_lowest(vote.fractions);
    return vote;
}

// ---------------------------------------------------------------------------
// AdaBoost / SAMME

BoostedEnsemble adaboost_fit(const Dataset& data, int rounds, int k_neighbors,
                             std::uint64_t seed,
                             std::vector<double>* weight_sums) {
    if (data.n() == 0) throw Error("EmptyDataset");
    if (rounds < 1) throw Error("adaboost_fit: rounds must be >= 1");
    data.validate();

    const std::size_t n = data.n();
    const int K = data.class_count;
    const double reject_bound = 1.0 - 1.0 / static_cast<double>(K);
    constexpr double kEpsClamp = 1e-10;
    constexpr int kMaxRetries = 10;

    BoostedEnsemble model;
    model.class_count = K;
    model.dim = data.dim();

    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    const Rng base(seed);

    for (int round = 0; round < rounds; ++round) {
        bool accepted = false;
        for (int attempt = 0; attempt <= kMaxRetries && !accepted; ++attempt) {
            Rng draw = base.derive((static_cast<std::uint64_t>(round) << 8) |
                                   static_cast<std::uint64_t>(attempt));
            Dataset resample;
            resample.class_count = K;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t r = draw.weighted_index(w);
                resample.add(data.x[r], data.y[r]);
            }
            KnnModel weak = knn_fit(
                resample, std::min<std::size_t>(k_neighbors, resample.n()));

            std::vector<bool> miss(n);
            double eps = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                miss[i] = knn_predict(weak, data.x[i]) != data.y[i];
                if (miss[i]) eps += w[i];
            }
            if (eps >= reject_bound) continue;  // redraw

            const double eps_c = std::clamp(eps, kEpsClamp, 1.0 - kEpsClamp);
            const double alpha =
                std::log((1.0 - eps_c) / eps_c) + std::log(static_cast<double>(K - 1));
            model.rounds.push_back(BoostRound{std::move(weak), alpha});

            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (miss[i]) w[i] *= std::exp(alpha);
                total += w[i];
            }
            for (auto& wi : w) wi /= total;
            if (weight_sums) {
                weight_sums->push_back(
                    std::accumulate(w.begin(), w.end(), 0.0));
            }
            accepted = true;
        }
        if (!accepted) {
            if (model.rounds.empty()) throw Error("NoUsefulWeakLearner");
            break;  // stop early with the rounds accepted so far
        }
    }
    return model;
}

std::vector<double> adaboost_scores(const BoostedEnsemble& model,
                                    std::span<const double> query) {
    if (query.size() != model.dim) throw Error("DimensionMismatch");
    std::vector<double> scores(model.class_count, 0.0);
    double total = 0.0;
    for (const auto& round : model.rounds) {
        scores[knn_predict(round.weak, query)] += round.alpha;
        total += round.alpha;
    }
    if (total > 0.0) {
        for (auto& s : scores) s /= total;
    }
    return scores;
}

int adaboost_predict(const BoostedEnsemble& model, std::span<const double> query) {
    const auto scores = adaboost_scores(model, query);
    return majority_lowest(scores);
}

// ---------------------------------------------------------------------------
// Evaluation

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t t = 0;
    for (int c = 0; c < k_; ++c) t += at(c, c);
    return t;
}

double ConfusionMatrix::accuracy() const {
    const std::int64_t n = total();
    if (n == 0) throw Error("EmptyMatrix");
    return static_cast<double>(trace()) / static_cast<double>(n);
}

double ConfusionMatrix::precision(int cls) const {
    std::int64_t predicted = 0;
    for (int t = 0; t < k_; ++t) predicted += at(t, cls);
    return predicted == 0 ? 0.0
                          : static_cast<double>(at(cls, cls)) /
                                static_cast<double>(predicted);
}

double ConfusionMatrix::recall(int cls) const {
    std::int64_t truth = 0;
    for (int p = 0; p < k_; ++p) truth += at(cls, p);
    return truth == 0 ? 0.0
                      : static_cast<double>(at(cls, cls)) /
                            static_cast<double>(truth);
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int class_count,
                                  int folds, std::uint64_t seed) {
    std::vector<int> assignment(labels.size(), -1);
    Rng rng(seed);
    for (int c = 0; c < class_count; ++c) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == c) rows.push_back(i);
        }
        rng.shuffle(rows);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            assignment[rows[i]] = static_cast<int>(i % folds);
        }
    }
    return assignment;
}

ConfusionMatrix cross_validate(const Dataset& data, int folds,
                               const TrainFn& train, std::uint64_t seed) {
    if (folds < 2 || static_cast<std::size_t>(folds) > data.n()) {
        throw Error("TooFewRows: need 2 <= folds <= n");
    }
    data.validate();
    const auto assignment = stratified_folds(data.y, data.class_count, folds, seed);

    ConfusionMatrix cm(data.class_count);
    for (int fold = 0; fold < folds; ++fold) {
        Dataset train_set;
        train_set.class_count = data.class_count;
        std::vector<std::size_t> held_out;
        for (std::size_t i = 0; i < data.n(); ++i) {
            if (assignment[i] == fold) {
                held_out.push_back(i);
            } else {
                train_set.add(data.x[i], data.y[i]);
            }
        }
        if (held_out.empty()) continue;
        const Predictor predict = train(train_set);
        for (std::size_t i : held_out) {
            cm.add(data.y[i], predict(data.x[i]));
        }
    }
    return cm;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void put_double(std::ostringstream& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out << ' ' << std::string_view(buf, res.ptr - buf);
}

struct Reader {
    std::istringstream in;
    explicit Reader(const std::string& text) : in(text) {}

    std::string word() {
        std::string w;
        if (!(in >> w)) throw Error("model parse: unexpected end of input");
        return w;
    }
    std::int64_t integer() {
        const std::string w = word();
        try {
            return std::stoll(w);
        } catch (const std::exception&) {
            throw Error("model parse: expected integer, got '" + w + "'");
        }
    }
    double real() {
        const std::string w = word();
        double v;
        const auto res = std::from_chars(w.data(), w.data() + w.size(), v);
        if (res.ec != std::errc{} || res.ptr != w.data() + w.size()) {
            throw Error("model parse: expected number, got '" + w + "'");
        }
        return v;
    }
    void expect(const std::string& token) {
        const std::string w = word();
        if (w != token) {
            throw Error("model parse: expected '" + token + "', got '" + w + "'");
        }
    }
};

void put_knn(std::ostringstream& out, const KnnModel& knn) {
    out << "knn " << knn.k << ' ' << knn.class_count << ' ' << knn.x.size()
        << ' ' << (knn.x.empty() ? 0 : knn.x.front().size()) << '\n';
    for (std::size_t i = 0; i < knn.x.size(); ++i) {
        out << knn.y[i];
        for (double v : knn.x[i]) put_double(out, v);
        out << '\n';
    }
}

KnnModel read_knn(Reader& r) {
    r.expect("knn");
    KnnModel knn;
    knn.k = static_cast<int>(r.integer());
    knn.class_count = static_cast<int>(r.integer());
    const auto rows = r.integer();
    const auto dim = r.integer();
    for (std::int64_t i = 0; i < rows; ++i) {
        knn.y.push_back(static_cast<int>(r.integer()));
        std::vector<double> row(dim);
        for (auto& v : row) v = r.real();
        knn.x.push_back(std::move(row));
    }
    return knn;
}

}  // namespace

std::string serialize(const ForestModel& model) {
    std::ostringstream out;
    out << "AAL-FOREST v1\n";
    out << model.class_count << ' ' << model.dim << ' '
        << model.feature_subset_size << ' ' << model.seed << ' '
        << model.trees.size() << '\n';
    for (const auto& tree : model.trees) {
        out << "tree " << tree.nodes.size() << '\n';
        for (const auto& n : tree.nodes) {
            out << n.feature;
            put_double(out, n.threshold);
            out << ' ' << n.left << ' ' << n.right << ' ' << n.leaf_class << '\n';
        }
    }
    return out.str();
}

ForestModel parse_forest(const std::string& text) {
    Reader r(text);
    r.expect("AAL-FOREST");
    r.expect("v1");
    ForestModel model;
    model.class_count = static_cast<int>(r.integer());
    model.dim = static_cast<std::size_t>(r.integer());
    model.feature_subset_size = static_cast<std::size_t>(r.integer());
    model.seed = static_cast<std::uint64_t>(r.integer());
    const auto n_trees = r.integer();
    for (std::int64_t t = 0; t < n_trees; ++t) {
        r.expect("tree");
        DecisionTree tree;
        tree.class_count = model.class_count;
        tree.dim = model.dim;
        const auto n_nodes = r.integer();
        for (std::int64_t i = 0; i < n_nodes; ++i) {
            TreeNode node;
            node.feature = static_cast<int>(r.integer());
            node.threshold = r.real();
            node.left = static_cast<int>(r.integer());
            node.right = static_cast<int>(r.integer());
            node.leaf_class = static_cast<int>(r.integer());
            tree.nodes.push_back(node);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

std::string serialize(const BoostedEnsemble& model) {
    std::ostringstream out;
    out << "AAL-BOOST v1\n";
    out << model.class_count << ' ' << model.dim << ' ' << model.rounds.size()
        << '\n';
    for (const auto& round : model.rounds) {
        out << "round";
        put_double(out, round.alpha);
        out << '\n';
        put_knn(out, round.weak);
    }
    return out.str();
}

BoostedEnsemble parse_ensemble(const std::string& text) {
    Reader r(text);
    r.expect("AAL-BOOST");
    r.expect("v1");
    BoostedEnsemble model;
    model.class_count = static_cast<int>(r.integer());
    model.dim = static_cast<std::size_t>(r.integer());
    const auto rounds = r.integer();
    for (std::int64_t i = 0; i < rounds; ++i) {
        r.expect("round");
        BoostRound round;
        round.alpha = r.real();
        round.weak = read_knn(r);
        model.rounds.push_back(std::move(round));
    }
    return model;
}

}  // namespace aal
