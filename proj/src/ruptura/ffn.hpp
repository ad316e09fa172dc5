#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ruptura {

struct FfnParams {
  int hidden_layers = 2;
  int width = 2;
  int epochs = 150;
  double learning_rate = 0.005;
  int batch_size = 64;
};

// Fully connected ReLU network with a linear output layer, trained with Adam
// on mean squared error averaged over rows and output columns.
class FeedForwardNet {
 public:
  FeedForwardNet() = default;
  FeedForwardNet(int inputs, int outputs, const FfnParams& params, std::uint64_t seed);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;

  // Loss plus gradient with respect to parameters() ordering.
  double loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                           std::vector<double>* gradient) const;
  double loss(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const;

  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);
  std::size_t parameter_count() const;

  void fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const FfnParams& params,
           std::uint64_t seed);

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::RowVectorXd>& biases() const { return biases_; }
  void set_layers(std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::RowVectorXd> biases);

 private:
  std::vector<Eigen::MatrixXd> weights_;     // fan_in x fan_out
  std::vector<Eigen::RowVectorXd> biases_;
};

}  // namespace ruptura
