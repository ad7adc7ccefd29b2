#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "irmap/bytes.hpp"
#include "irmap/features.hpp"

namespace irmap::models {

using features::Matrix;

struct RFConfig {
  int n_trees = 100;
  int max_depth = 12;
  int min_leaf = 5;
  int features_per_split = 0;  // 0 selects ceil(sqrt(D))

  friend bool operator==(const RFConfig&, const RFConfig&) = default;
};

/// CART node. Internal nodes route x[feature] <= threshold to `left`.
/// Leaves (feature < 0) hold the class-1 fraction of their training samples.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double p1 = 0.0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  int depth() const;
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct RFModel {
  RFConfig config;
  std::uint64_t seed = 0;
  std::size_t n_features = 0;
  std::vector<DecisionTree> trees;
  double oob_accuracy = 0.0;  // over samples with at least one out-of-bag tree
  bool single_class = false;  // training labels had one class; trees are single leaves

  friend bool operator==(const RFModel&, const RFModel&) = default;
};

/// Bootstrap + Gini CART forest. Labels must be 0 or 1. Deterministic for a
/// fixed seed regardless of thread count.
RFModel train_rf(const Matrix& x, std::span<const std::uint8_t> y, const RFConfig& config, std::uint64_t seed);

/// Mean class-1 leaf fraction over trees. Throws DataError on an empty
/// forest or a dimension mismatch.
double rf_predict_proba(const RFModel& model, std::span<const double> x);

void write_rf(ByteWriter& w, const RFModel& model);
RFModel read_rf(ByteReader& r);

}  // namespace irmap::models
