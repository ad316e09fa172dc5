#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ruptura/error.hpp"
#include "ruptura/panel_store.hpp"
#include "ruptura/rdd_estimator.hpp"

namespace ruptura {

struct PcaState {
  Eigen::VectorXd means;
  Eigen::VectorXd stds;         // sample std; constant columns use 1
  Eigen::MatrixXd components;   // d x k, columns sorted by descending eigenvalue
  Eigen::VectorXd eigenvalues;  // all d, descending
  double total_variance = 0.0;

  Eigen::MatrixXd project(const Eigen::MatrixXd& data) const;
  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& projected) const;
  double explained_ratio(int component) const;
};

struct PcaResult {
  PcaState state;
  Eigen::MatrixXd projected;  // n x k
};

// Columns are standardized, then the sample covariance is diagonalised. Each
// component's largest-magnitude loading is made positive.
PcaResult pca(const Eigen::MatrixXd& data, int n_components);

constexpr std::size_t kMatchVectorLength = 9;

// [PC1 PC2 PC3 | latitude longitude (z-scored) | adjacent | pre-outcome x3]
struct MatchVector {
  RegionId region_id;
  std::array<double, kMatchVectorLength> v{};
};

// Cohort-level state shared by all match vectors: sociodemographic PCA and
// geo standardization.
struct MatchContext {
  PcaState pca;
  double lat_mean = 0.0, lat_std = 1.0;
  double lon_mean = 0.0, lon_std = 1.0;
};

MatchContext fit_match_context(const MetaTable& meta);

MatchVector build_match_vector(const RegionMeta& candidate, const RegionMeta& target,
                               const MatchContext& context, double pre_outcome);

// Reference point for the target itself: its own coordinates, adjacency 1 and
// its own pre-event outcome.
MatchVector target_reference_vector(const RegionMeta& target, const MatchContext& context,
                                    double pre_outcome);

// k nearest candidates by Euclidean distance, ties by ascending region id.
std::vector<RegionId> match(const MatchVector& target, const std::vector<MatchVector>& candidates,
                            std::size_t k);

struct DiDResult {
  RegionId target_region;
  std::vector<RegionId> matched_regions;
  double target_pre = 0.0;    // y_{1,0}
  double observed = 0.0;      // y_{1,1}
  double matched_pre = 0.0;   // avg(y_{0,0})
  double matched_post = 0.0;  // avg(y_{0,1})
  double counterfactual = 0.0;
  double did = 0.0;
};

DiDResult did_estimate(double target_pre, double target_post, const std::vector<double>& matched_pre,
                       const std::vector<double>& matched_post);

// Mean score over the before/after offset ranges of `config` around
// event_week. Empty ranges give nullopt.
std::optional<double> window_mean(std::span<const Observation> series, int event_week,
                                  const WindowConfig& config, Segment segment);

struct DiDOptions {
  std::string event_type;
  std::size_t k = 5;
  WindowConfig window;
};

// Full procedure for one target: eligible controls are regions other than the
// target without an event of the same type inside [event - T, event + T] and
// with observations in both periods.
DiDResult did_run(const Panel& panel, const EventTable& events, const MetaTable& meta,
                  const RegionId& target, const DiDOptions& options);

}  // namespace ruptura
