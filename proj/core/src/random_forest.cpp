#include "irmap/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "irmap/error.hpp"
#include "irmap/parallel.hpp"
#include "irmap/random.hpp"

namespace irmap::models {

double DecisionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].p1;
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const std::uint8_t> y, const RFConfig& cfg, int mtry, Rng& rng)
      : x_(x), y_(y), cfg_(cfg), mtry_(mtry), rng_(rng), feature_order_(x.cols()) {
    std::iota(feature_order_.begin(), feature_order_.end(), 0);
  }

  DecisionTree build(std::vector<std::uint32_t> samples) {
    tree_.nodes.clear();
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(std::vector<std::uint32_t>& samples, int depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::size_t ones = 0;
    for (auto s : samples) ones += y_[s];
    const double n = static_cast<double>(samples.size());
    tree_.nodes[static_cast<std::size_t>(id)].p1 = n > 0 ? static_cast<double>(ones) / n : 0.0;

    const bool pure = ones == 0 || ones == samples.size();
    if (pure || depth >= cfg_.max_depth || samples.size() < 2 * static_cast<std::size_t>(cfg_.min_leaf)) return id;

    const double parent_gini = gini(static_cast<double>(ones), n);
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_impurity = parent_gini - 1e-12;

    // Partial Fisher-Yates: the first mtry entries become this node's candidates.
    for (int k = 0; k < mtry_; ++k) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), feature_order_.size() - 1);
      std::swap(feature_order_[static_cast<std::size_t>(k)], feature_order_[pick(rng_)]);
    }
    std::vector<std::pair<double, std::uint8_t>> column(samples.size());
    for (int k = 0; k < mtry_; ++k) {
      const std::size_t f = feature_order_[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < samples.size(); ++i) column[i] = {x_(samples[i], f), y_[samples[i]]};
      std::sort(column.begin(), column.end());
      double left_ones = 0.0;
      const std::size_t min_leaf = static_cast<std::size_t>(cfg_.min_leaf);
      for (std::size_t i = 1; i < column.size(); ++i) {
        left_ones += column[i - 1].second;
        if (i < min_leaf || column.size() - i < min_leaf) continue;
        if (column[i - 1].first == column[i].first) continue;
        const double nl = static_cast<double>(i), nr = n - nl;
        const double impurity = (nl * gini(left_ones, nl) + nr * gini(static_cast<double>(ones) - left_ones, nr)) / n;
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          const double a = column[i - 1].first, b = column[i].first;
          double mid = a + 0.5 * (b - a);
          if (!(mid < b)) mid = a;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::uint32_t> left, right;
    for (auto s : samples) (x_(s, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();
    const std::int32_t l = grow(left, depth + 1);
    const std::int32_t r = grow(right, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  static double gini(double ones, double n) {
    if (n <= 0) return 0.0;
    const double p = ones / n;
    return 2.0 * p * (1.0 - p);
  }

  const Matrix& x_;
  std::span<const std::uint8_t> y_;
  const RFConfig& cfg_;
  int mtry_;
  Rng& rng_;
  std::vector<std::size_t> feature_order_;
  DecisionTree tree_;
};

}  // namespace

RFModel train_rf(const Matrix& x, std::span<const std::uint8_t> y, const RFConfig& config, std::uint64_t seed) {
  if (x.rows() == 0 || x.rows() != y.size()) throw DataError("train_rf: need matching, non-empty X and y");
  if (config.n_trees < 1 || config.max_depth < 0 || config.min_leaf < 1) throw DataError("train_rf: invalid config");
  for (auto label : y)
    if (label > 1) throw DataError("train_rf: labels must be 0 or 1");

  RFModel model;
  model.config = config;
  model.seed = seed;
  model.n_features = x.cols();
  const int d = static_cast<int>(x.cols());
  const int mtry = config.features_per_split > 0 ? std::min(config.features_per_split, d)
                                                 : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  const std::size_t ones = static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
  model.single_class = ones == 0 || ones == y.size();

  const std::size_t n = x.rows();
  model.trees.resize(static_cast<std::size_t>(config.n_trees));
  std::vector<std::vector<std::uint8_t>> in_bag(static_cast<std::size_t>(config.n_trees));
  parallel_for(static_cast<std::size_t>(config.n_trees), [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::uniform_int_distribution<std::uint32_t> draw(0, static_cast<std::uint32_t>(n - 1));
    std::vector<std::uint32_t> sample(n);
    in_bag[t].assign(n, 0);
    for (auto& s : sample) {
      s = draw(rng);
      in_bag[t][s] = 1;
    }
    TreeBuilder builder(x, y, config, mtry, rng);
    model.trees[t] = builder.build(std::move(sample));
  }, 1);

  std::size_t scored = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    int votes = 0;
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
      if (in_bag[t][i]) continue;
      sum += model.trees[t].predict(x.row(i));
      ++votes;
    }
    if (votes == 0) continue;
    ++scored;
    correct += static_cast<std::uint8_t>(sum / votes >= 0.5) == y[i];
  }
  model.oob_accuracy = scored > 0 ? static_cast<double>(correct) / static_cast<double>(scored) : 0.0;
  return model;
}

double rf_predict_proba(const RFModel& model, std::span<const double> x) {
  if (model.trees.empty()) throw DataError("rf_predict_proba: forest has no trees");
  if (x.size() != model.n_features)
    throw DataError("rf_predict_proba: expected " + std::to_string(model.n_features) + " features, got " +
                    std::to_string(x.size()));
  double sum = 0.0;
  for (const auto& t : model.trees) sum += t.predict(x);
  return std::clamp(sum / static_cast<double>(model.trees.size()), 0.0, 1.0);
}

void write_rf(ByteWriter& w, const RFModel& m) {
  w.i32(m.config.n_trees);
  w.i32(m.config.max_depth);
  w.i32(m.config.min_leaf);
  w.i32(m.config.features_per_split);
  w.u64(m.seed);
  w.u64(m.n_features);
  w.f64(m.oob_accuracy);
  w.u8(m.single_class ? 1 : 0);
  w.u64(m.trees.size());
  for (const auto& t : m.trees) {
    w.u64(t.nodes.size());
    for (const auto& n : t.nodes) {
      w.i32(n.feature);
      w.f64(n.threshold);
      w.i32(n.left);
      w.i32(n.right);
      w.f64(n.p1);
    }
  }
}

RFModel read_rf(ByteReader& r) {
  RFModel m;
  m.config.n_trees = r.i32();
  m.config.max_depth = r.i32();
  m.config.min_leaf = r.i32();
  m.config.features_per_split = r.i32();
  m.seed = r.u64();
  m.n_features = r.u64();
  m.oob_accuracy = r.f64();
  m.single_class = r.u8() != 0;
  const std::uint64_t n_trees = r.u64();
  if (n_trees > r.remaining()) throw DataError("random forest block: tree count exceeds payload");
  m.trees.resize(n_trees);
  for (auto& t : m.trees) {
    const std::uint64_t n_nodes = r.u64();
    if (n_nodes == 0 || n_nodes > r.remaining() / 28) throw DataError("random forest block: bad node count");
    t.nodes.resize(n_nodes);
    for (auto& n : t.nodes) {
      n.feature = r.i32();
      n.threshold = r.f64();
      n.left = r.i32();
      n.right = r.i32();
      n.p1 = r.f64();
    }
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const auto& n = t.nodes[i];
      if (n.is_leaf()) continue;
      const auto self = static_cast<std::int64_t>(i);
      if (static_cast<std::uint64_t>(n.feature) >= m.n_features || n.left <= self || n.right <= self ||
          static_cast<std::uint64_t>(n.left) >= n_nodes || static_cast<std::uint64_t>(n.right) >= n_nodes)
        throw DataError("random forest block: node references out of range");
    }
  }
  return m;
}

}  // namespace irmap::models
