#include "ruptura/ffn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ruptura/error.hpp"
#include "ruptura/parallel.hpp"

namespace ruptura {

namespace {
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
}  // namespace

FeedForwardNet::FeedForwardNet(int inputs, int outputs, const FfnParams& params,
                               std::uint64_t seed) {
  if (inputs < 1 || outputs < 1) throw Error(ErrorCode::InvalidArgument, "network needs inputs and outputs");
  if (params.hidden_layers < 1 || params.width < 1)
    throw Error(ErrorCode::Config, "ffn needs at least one hidden layer of width >= 1");
  auto rng = substream(seed, 0x66666e);
  std::vector<int> sizes{inputs};
  for (int l = 0; l < params.hidden_layers; ++l) sizes.push_back(params.width);
  sizes.push_back(outputs);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double limit = std::sqrt(6.0 / (sizes[l] + sizes[l + 1]));
    Eigen::MatrixXd W(sizes[l], sizes[l + 1]);
    for (Eigen::Index c = 0; c < W.cols(); ++c)
      for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    weights_.push_back(std::move(W));
    biases_.push_back(Eigen::RowVectorXd::Zero(sizes[l + 1]));
  }
}

void FeedForwardNet::set_layers(std::vector<Eigen::MatrixXd> weights,
                                std::vector<Eigen::RowVectorXd> biases) {
  if (weights.size() != biases.size() || weights.empty())
    throw Error(ErrorCode::InvalidArgument, "layer lists disagree");
  weights_ = std::move(weights);
  biases_ = std::move(biases);
}

Eigen::MatrixXd FeedForwardNet::forward(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd h = X;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (h * weights_[l]).rowwise() + biases_[l];
    h = (l + 1 < weights_.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

double FeedForwardNet::loss(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const {
  return (forward(X) - Y).squaredNorm() / static_cast<double>(Y.size());
}

double FeedForwardNet::loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                         std::vector<double>* gradient) const {
  const std::size_t L = weights_.size();
  std::vector<Eigen::MatrixXd> acts{X};  // inputs to each layer
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = (acts.back() * weights_[l]).rowwise() + biases_[l];
    pre.push_back(z);
    if (l + 1 < L) acts.push_back(z.cwiseMax(0.0));
    else acts.push_back(z);
  }
  const Eigen::MatrixXd diff = acts.back() - Y;
  const double scale = 1.0 / static_cast<double>(Y.size());
  const double value = diff.squaredNorm() * scale;
  if (!gradient) return value;

  std::vector<Eigen::MatrixXd> gW(L);
  std::vector<Eigen::RowVectorXd> gb(L);
  Eigen::MatrixXd delta = 2.0 * scale * diff;
  for (std::size_t l = L; l-- > 0;) {
    gW[l] = acts[l].transpose() * delta;
    gb[l] = delta.colwise().sum();
    if (l > 0) {
      delta = (delta * weights_[l].transpose()).cwiseProduct(
          (pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  gradient->clear();
  for (std::size_t l = 0; l < L; ++l) {
    for (Eigen::Index c = 0; c < gW[l].cols(); ++c)
      for (Eigen::Index r = 0; r < gW[l].rows(); ++r) gradient->push_back(gW[l](r, c));
    for (Eigen::Index c = 0; c < gb[l].size(); ++c) gradient->push_back(gb[l](c));
  }
  return value;
}

std::size_t FeedForwardNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

std::vector<double> FeedForwardNet::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index c = 0; c < weights_[l].cols(); ++c)
      for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) flat.push_back(weights_[l](r, c));
    for (Eigen::Index c = 0; c < biases_[l].size(); ++c) flat.push_back(biases_[l](c));
  }
  return flat;
}

void FeedForwardNet::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw Error(ErrorCode::Dimension, "parameter vector has the wrong length");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index c = 0; c < weights_[l].cols(); ++c)
      for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) weights_[l](r, c) = flat[k++];
    for (Eigen::Index c = 0; c < biases_[l].size(); ++c) biases_[l](c) = flat[k++];
  }
}

void FeedForwardNet::fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                         const FfnParams& params, std::uint64_t seed) {
  if (X.rows() == 0) throw Error(ErrorCode::InvalidArgument, "ffn: empty training set");
  if (params.batch_size < 1 || params.epochs < 1 || !(params.learning_rate > 0.0))
    throw Error(ErrorCode::Config, "ffn: invalid optimizer settings");
  auto rng = substream(seed, 0x73687566);
  const auto n = static_cast<std::size_t>(X.rows());
  const std::size_t P = parameter_count();
  std::vector<double> m(P, 0.0), v(P, 0.0), grad;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(params.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(params.batch_size));
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(stop - start), X.cols());
      Eigen::MatrixXd yb(static_cast<Eigen::Index>(stop - start), Y.cols());
      for (std::size_t i = start; i < stop; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = X.row(static_cast<Eigen::Index>(order[i]));
        yb.row(static_cast<Eigen::Index>(i - start)) = Y.row(static_cast<Eigen::Index>(order[i]));
      }
      loss_and_gradient(xb, yb, &grad);
      ++step;
      auto theta = parameters();
      const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
      for (std::size_t k = 0; k < P; ++k) {
        m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * grad[k];
        v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * grad[k] * grad[k];
        theta[k] -= params.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + kAdamEps);
      }
      set_parameters(theta);
    }
  }
}

}  // namespace ruptura
