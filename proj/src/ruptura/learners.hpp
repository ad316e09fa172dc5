#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "ruptura/feature_builder.hpp"
#include "ruptura/ffn.hpp"
#include "ruptura/trees.hpp"

namespace ruptura {

enum class Family {
  Ridge,
  Knn,
  RandomForest,
  ExtraTrees,
  Ffn,
  BaselineNoChange,
  BaselineMean,
  BaselineForecast,
};

const char* family_name(Family family);
Family parse_family(const std::string& name);

struct ModelSpec {
  Family family = Family::Ridge;
  std::map<std::string, double> hyperparameters;
  std::uint64_t seed = 0;
  // Fit one model per target instead of a joint two-output model.
  bool per_target = false;

  // Hyperparameter defaults per family; `rich_features` selects the values
  // used with exog+cov feature sets.
  static ModelSpec defaults(Family family, bool rich_features = false);
  void validate() const;
  double get(const std::string& name) const;
};

struct RidgeState {
  Matrix weights;  // d x m on standardized inputs
  Vector intercept;  // m
};

struct KnnState {
  Matrix X;  // standardized training rows
  Matrix Y;
  std::vector<RegionId> region_ids;
  int k = 5;
};

struct ForestState {
  std::vector<Tree> trees;
};

struct FfnState {
  FeedForwardNet net;
};

struct MeanState {
  Vector means;
};

struct NoChangeState {
  int outputs = 2;
};

struct ForecastState {
  int max_order = 3;
  WindowConfig window;
};

using ModelState = std::variant<RidgeState, KnnState, ForestState, FfnState, MeanState,
                                NoChangeState, ForecastState>;

// One head predicts a contiguous range of target columns.
struct ModelHead {
  int first_output = 0;
  int outputs = 2;
  ModelState state;
};

struct TrainedModel {
  ModelSpec spec;
  Layout layout;
  Vector column_means;
  Vector column_stds;
  std::vector<ModelHead> heads;

  std::uint64_t fingerprint() const { return layout.fingerprint(); }
};

TrainedModel train(const ModelSpec& spec, const Dataset& dataset);

// Full prediction path; the forecasting baseline needs the dataset's
// before-segment histories.
Matrix predict(const TrainedModel& model, const Dataset& dataset);
// Matrix-only path for families that depend on X alone.
Matrix predict(const TrainedModel& model, const Matrix& X, const Layout& layout);

// W = (X'X + alpha I)^-1 X'Y without centering or intercept.
Matrix ridge_solve(const Matrix& X, const Matrix& Y, double alpha);

// Indices of the k nearest rows of `train` to `query`, ties broken by
// ascending region id, then row index.
std::vector<std::size_t> nearest_rows(const Matrix& train, const std::vector<RegionId>& region_ids,
                                      const Eigen::RowVectorXd& query, std::size_t k);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace ruptura
