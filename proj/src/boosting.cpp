#include "dmldeep/boosting.hpp"

#include "dmldeep/error.hpp"
#include "dmldeep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dmldeep {

void check_params(const GbtParams& p) {
  if (p.trees < 1) throw ValidationError("gbt: trees must be >= 1");
  if (p.depth < 1) throw ValidationError("gbt: depth must be >= 1");
  if (!(p.learning_rate > 0.0)) throw ValidationError("gbt: learning_rate must be > 0");
  if (!(p.subsample > 0.0 && p.subsample <= 1.0)) throw ValidationError("gbt: subsample must lie in (0,1]");
  if (p.min_leaf < 1) throw ValidationError("gbt: min_leaf must be >= 1");
}

double RegressionTree::predict_row(const Matrix& x, Index row) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const auto& nd = nodes[static_cast<std::size_t>(k)];
    k = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

Vector BoostedTrees::predict(const Matrix& x) const {
  if (x.cols() != n_features) throw SchemaError("boosted trees expect " + std::to_string(n_features) + " features");
  Vector out = Vector::Constant(x.rows(), base);
  for (const auto& t : trees)
    for (Index i = 0; i < x.rows(); ++i) out[i] += learning_rate * t.predict_row(x, i);
  return out;
}

namespace {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Grows one tree on the residuals of the rows with node_of >= 0, level by level.
RegressionTree grow_tree(const Matrix& x, const Vector& residual, const std::vector<std::vector<Index>>& order,
                         std::vector<int>& node_of, const GbtParams& p) {
  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<int> frontier{0};

  for (std::size_t level = 0; level < p.depth && !frontier.empty(); ++level) {
    const std::size_t n_nodes = tree.nodes.size();
    std::vector<double> total_sum(n_nodes, 0.0);
    std::vector<std::size_t> total_cnt(n_nodes, 0);
    for (Index i = 0; i < x.rows(); ++i) {
      const int k = node_of[static_cast<std::size_t>(i)];
      if (k < 0) continue;
      total_sum[static_cast<std::size_t>(k)] += residual[i];
      ++total_cnt[static_cast<std::size_t>(k)];
    }

    std::vector<SplitCandidate> best(n_nodes);
    std::vector<double> left_sum(n_nodes);
    std::vector<std::size_t> left_cnt(n_nodes);
    std::vector<double> last_x(n_nodes);
    for (Index j = 0; j < x.cols(); ++j) {
      std::fill(left_sum.begin(), left_sum.end(), 0.0);
      std::fill(left_cnt.begin(), left_cnt.end(), 0);
      for (Index i : order[static_cast<std::size_t>(j)]) {
        const int kk = node_of[static_cast<std::size_t>(i)];
        if (kk < 0) continue;
        const auto k = static_cast<std::size_t>(kk);
        const double xi = x(i, j);
        const std::size_t nl = left_cnt[k];
        const std::size_t nr = total_cnt[k] - nl;
        if (nl >= p.min_leaf && nr >= p.min_leaf && xi > last_x[k]) {
          const double sl = left_sum[k];
          const double sr = total_sum[k] - sl;
          const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) -
                              total_sum[k] * total_sum[k] / static_cast<double>(total_cnt[k]);
          if (gain > best[k].gain) {
            double thr = 0.5 * (last_x[k] + xi);
            if (!(thr < xi)) thr = last_x[k];
            best[k] = {gain, static_cast<int>(j), thr};
          }
        }
        left_sum[k] += residual[i];
        ++left_cnt[k];
        last_x[k] = xi;
      }
    }

    std::vector<int> next;
    for (int k : frontier) {
      const auto& b = best[static_cast<std::size_t>(k)];
      if (b.feature < 0 || !(b.gain > 1e-12 * std::max(1.0, std::abs(total_sum[static_cast<std::size_t>(k)])))) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& nd = tree.nodes[static_cast<std::size_t>(k)];
      nd.feature = b.feature;
      nd.threshold = b.threshold;
      nd.left = left;
      nd.right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    for (Index i = 0; i < x.rows(); ++i) {
      int& k = node_of[static_cast<std::size_t>(i)];
      if (k < 0) continue;
      const auto& nd = tree.nodes[static_cast<std::size_t>(k)];
      if (nd.feature >= 0) k = x(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    frontier = std::move(next);
  }

  std::vector<double> sum(tree.nodes.size(), 0.0);
  std::vector<std::size_t> cnt(tree.nodes.size(), 0);
  for (Index i = 0; i < x.rows(); ++i) {
    const int k = node_of[static_cast<std::size_t>(i)];
    if (k < 0) continue;
    sum[static_cast<std::size_t>(k)] += residual[i];
    ++cnt[static_cast<std::size_t>(k)];
  }
  for (std::size_t k = 0; k < tree.nodes.size(); ++k)
    if (tree.nodes[k].feature < 0 && cnt[k] > 0) tree.nodes[k].value = sum[k] / static_cast<double>(cnt[k]);
  return tree;
}

}  // namespace

BoostedTrees fit_boosted(const Matrix& x, const Vector& y, const GbtParams& params, std::uint64_t seed) {
  check_params(params);
  if (x.rows() != y.size() || x.rows() < 1) throw ValidationError("gbt: design and outcome lengths differ");
  if (x.cols() < 1) throw ValidationError("gbt: no features");
  const Index n = x.rows();

  std::vector<std::vector<Index>> order(static_cast<std::size_t>(x.cols()));
  for (Index j = 0; j < x.cols(); ++j) {
    auto& o = order[static_cast<std::size_t>(j)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), Index{0});
    std::stable_sort(o.begin(), o.end(), [&](Index a, Index b) { return x(a, j) < x(b, j); });
  }

  BoostedTrees model;
  model.base = y.mean();
  model.learning_rate = params.learning_rate;
  model.n_features = x.cols();
  Vector fitted = Vector::Constant(n, model.base);
  model.train_loss.push_back((y - fitted).squaredNorm() / static_cast<double>(n));

  Rng rng(derive_seed(seed, "gbt-subsample"));
  const auto n_sample = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(params.subsample * static_cast<double>(n))));
  std::vector<int> node_of(static_cast<std::size_t>(n));
  for (std::size_t t = 0; t < params.trees; ++t) {
    const Vector residual = y - fitted;
    if (n_sample < static_cast<std::size_t>(n)) {
      std::fill(node_of.begin(), node_of.end(), -1);
      const auto perm = rng.permutation(static_cast<std::size_t>(n));
      for (std::size_t s = 0; s < n_sample; ++s) node_of[perm[s]] = 0;
    } else {
      std::fill(node_of.begin(), node_of.end(), 0);
    }
    RegressionTree tree = grow_tree(x, residual, order, node_of, params);
    for (Index i = 0; i < n; ++i) fitted[i] += params.learning_rate * tree.predict_row(x, i);
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back((y - fitted).squaredNorm() / static_cast<double>(n));
  }
  return model;
}

}  // namespace dmldeep
