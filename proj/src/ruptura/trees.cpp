#include "ruptura/trees.hpp"

#include <algorithm>
#include <numeric>

#include "ruptura/error.hpp"
#include "ruptura/parallel.hpp"

namespace ruptura {

std::span<const double> Tree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int idx = 0;
  while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(idx)];
    idx = row(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(idx)].value;
}

int Tree::depth() const {
  std::vector<int> depth(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, depth[i]);
    if (nodes[i].feature >= 0) {
      depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
    }
  }
  return best;
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = -1.0;  // sum over children of ||sum y||^2 / n; larger is better
};

class Builder {
 public:
  Builder(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const TreeParams& params,
          std::mt19937_64& rng)
      : X_(X), Y_(Y), params_(params), rng_(rng), m_(static_cast<std::size_t>(Y.cols())) {}

  Tree run(std::vector<std::size_t> samples) {
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& samples, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    {
      auto& leaf_value = tree_.nodes.back().value;
      leaf_value.assign(m_, 0.0);
      for (auto s : samples)
        for (std::size_t j = 0; j < m_; ++j) leaf_value[j] += Y_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
      for (auto& v : leaf_value) v /= static_cast<double>(samples.size());
    }
    if (static_cast<int>(samples.size()) < params_.min_samples_split) return id;
    if (params_.max_depth > 0 && depth >= params_.max_depth) return id;
    if (pure(samples)) return id;

    SplitChoice split = choose_split(samples);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto s : samples) {
      (X_(static_cast<Eigen::Index>(s), split.feature) <= split.threshold ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  bool pure(const std::vector<std::size_t>& samples) const {
    const auto first = static_cast<Eigen::Index>(samples.front());
    for (auto s : samples)
      if (Y_.row(static_cast<Eigen::Index>(s)) != Y_.row(first)) return false;
    return true;
  }

  std::vector<int> candidate_features(std::vector<int>* rest) {
    const int d = static_cast<int>(X_.cols());
    std::vector<int> all(static_cast<std::size_t>(d));
    std::iota(all.begin(), all.end(), 0);
    const std::size_t mf = params_.max_features;
    if (mf == 0 || mf >= all.size()) return all;
    for (std::size_t i = 0; i < mf; ++i) {
      const std::size_t j = i + uniform_index(rng_, all.size() - i);
      std::swap(all[i], all[j]);
    }
    std::vector<int> chosen(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(mf));
    rest->assign(all.begin() + static_cast<std::ptrdiff_t>(mf), all.end());
    std::sort(chosen.begin(), chosen.end());
    std::sort(rest->begin(), rest->end());
    return chosen;
  }

  SplitChoice choose_split(const std::vector<std::size_t>& samples) {
    std::vector<int> rest;
    const auto chosen = candidate_features(&rest);
    SplitChoice best;
    for (int f : chosen) consider(samples, f, best);
    // every sampled feature was constant in this node: fall back to the rest
    if (best.feature < 0)
      for (int f : rest) consider(samples, f, best);
    return best;
  }

  void consider(const std::vector<std::size_t>& samples, int f, SplitChoice& best) {
    if (params_.mode == SplitMode::Best) {
      consider_best(samples, f, best);
    } else {
      consider_random(samples, f, best);
    }
  }

  double child_score(const std::vector<double>& sum, double n) const {
    double s = 0.0;
    for (double v : sum) s += v * v;
    return s / n;
  }

  void consider_best(const std::vector<std::size_t>& samples, int f, SplitChoice& best) {
    order_ = samples;
    const auto fe = static_cast<Eigen::Index>(f);
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return X_(static_cast<Eigen::Index>(a), fe) < X_(static_cast<Eigen::Index>(b), fe);
    });
    std::vector<double> total(m_, 0.0), left(m_, 0.0), right(m_);
    for (auto s : order_)
      for (std::size_t j = 0; j < m_; ++j) total[j] += Y_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
    const std::size_t n = order_.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto si = static_cast<Eigen::Index>(order_[i]);
      for (std::size_t j = 0; j < m_; ++j) left[j] += Y_(si, static_cast<Eigen::Index>(j));
      const double v = X_(si, fe);
      const double next = X_(static_cast<Eigen::Index>(order_[i + 1]), fe);
      if (!(next > v)) continue;
      for (std::size_t j = 0; j < m_; ++j) right[j] = total[j] - left[j];
      const double nl = static_cast<double>(i + 1);
      const double score = child_score(left, nl) + child_score(right, static_cast<double>(n) - nl);
      if (score > best.score) {
        double thr = 0.5 * (v + next);
        if (!(thr < next)) thr = v;
        best = {f, thr, score};
      }
    }
  }

  void consider_random(const std::vector<std::size_t>& samples, int f, SplitChoice& best) {
    const auto fe = static_cast<Eigen::Index>(f);
    double lo = X_(static_cast<Eigen::Index>(samples.front()), fe), hi = lo;
    for (auto s : samples) {
      const double v = X_(static_cast<Eigen::Index>(s), fe);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) return;
    double thr = lo + uniform01(rng_) * (hi - lo);
    if (!(thr < hi)) thr = lo;
    std::vector<double> left(m_, 0.0), right(m_, 0.0);
    double nl = 0.0, nr = 0.0;
    for (auto s : samples) {
      const auto si = static_cast<Eigen::Index>(s);
      const bool go_left = X_(si, fe) <= thr;
      auto& acc = go_left ? left : right;
      (go_left ? nl : nr) += 1.0;
      for (std::size_t j = 0; j < m_; ++j) acc[j] += Y_(si, static_cast<Eigen::Index>(j));
    }
    const double score = child_score(left, nl) + child_score(right, nr);
    if (score > best.score) best = {f, thr, score};
  }

  const Eigen::MatrixXd& X_;
  const Eigen::MatrixXd& Y_;
  const TreeParams& params_;
  std::mt19937_64& rng_;
  std::size_t m_;
  Tree tree_;
  std::vector<std::size_t> order_;
};

}  // namespace

Tree build_tree(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                std::vector<std::size_t> samples, const TreeParams& params, std::mt19937_64& rng) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "tree needs at least one sample");
  if (X.rows() != Y.rows()) throw Error(ErrorCode::Dimension, "X and Y row counts differ");
  return Builder(X, Y, params, rng).run(std::move(samples));
}

std::vector<Tree> build_forest(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                               const ForestParams& params, std::uint64_t seed) {
  if (params.n_estimators < 1) throw Error(ErrorCode::Config, "n_estimators must be >= 1");
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<Tree> trees(static_cast<std::size_t>(params.n_estimators));
  parallel_for(trees.size(), [&](std::size_t t) {
    auto rng = substream(seed, t);
    std::vector<std::size_t> samples(n);
    if (params.bootstrap) {
      for (auto& s : samples) s = uniform_index(rng, n);
    } else {
      std::iota(samples.begin(), samples.end(), 0);
    }
    trees[t] = build_tree(X, Y, std::move(samples), params.tree, rng);
  });
  return trees;
}

Eigen::MatrixXd predict_forest(const std::vector<Tree>& trees, const Eigen::MatrixXd& X) {
  if (trees.empty()) throw Error(ErrorCode::InvalidArgument, "empty forest");
  const auto m = static_cast<Eigen::Index>(trees.front().nodes.front().value.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(X.rows(), m);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (const auto& tree : trees) {
      const auto v = tree.predict(X.row(i));
      for (Eigen::Index j = 0; j < m; ++j) out(i, j) += v[static_cast<std::size_t>(j)];
    }
  }
  out /= static_cast<double>(trees.size());
  return out;
}

}  // namespace ruptura
