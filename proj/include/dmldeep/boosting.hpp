#pragma once

#include "dmldeep/types.hpp"

#include <cstdint>
#include <vector>

namespace dmldeep {

struct GbtParams {
  std::size_t trees = 200;
  std::size_t depth = 2;
  double learning_rate = 0.1;
  double subsample = 1.0;
  std::size_t min_leaf = 20;
};

void check_params(const GbtParams& p);

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

// Binary regression tree; rows with x[feature] <= threshold go left.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict_row(const Matrix& x, Index row) const;
};

struct BoostedTrees {
  double base = 0.0;
  double learning_rate = 0.1;
  Index n_features = 0;
  std::vector<RegressionTree> trees;
  // Mean squared training error after each tree (index 0 is the constant fit).
  std::vector<double> train_loss;

  Vector predict(const Matrix& x) const;
};

// Least-squares gradient boosting with greedy exact splits on presorted features.
BoostedTrees fit_boosted(const Matrix& x, const Vector& y, const GbtParams& params, std::uint64_t seed);

}  // namespace dmldeep
