#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ruptura {

// Multi-output regression trees. Split quality is the reduction of squared
// error summed over all target columns.

enum class SplitMode {
  Best,    // exhaustive midpoint search
  Random,  // one uniform threshold per candidate feature
};

struct TreeParams {
  SplitMode mode = SplitMode::Best;
  int max_depth = 0;  // 0 = unlimited
  std::size_t max_features = 0;  // 0 = all
  int min_samples_split = 2;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;
};

struct Tree {
  std::vector<TreeNode> nodes;

  std::span<const double> predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  int depth() const;
};

// `samples` may repeat rows (bootstrap). Rows go left when x <= threshold.
Tree build_tree(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                std::vector<std::size_t> samples, const TreeParams& params, std::mt19937_64& rng);

struct ForestParams {
  TreeParams tree;
  int n_estimators = 100;
  bool bootstrap = true;
};

// Tree i draws from its own RNG stream keyed by (seed, i).
std::vector<Tree> build_forest(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                               const ForestParams& params, std::uint64_t seed);

Eigen::MatrixXd predict_forest(const std::vector<Tree>& trees, const Eigen::MatrixXd& X);

}  // namespace ruptura
