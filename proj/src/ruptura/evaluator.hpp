#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ruptura/feature_builder.hpp"
#include "ruptura/panel_store.hpp"

namespace ruptura {

struct SplitPlan {
  std::set<RegionId> train;
  std::set<RegionId> dev;
  std::set<RegionId> test;
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;
};

// Shuffles the distinct ids with `seed`, then cuts contiguous blocks of
// round(n * ratio) for train and dev; test takes the remainder.
SplitPlan split_by_region(std::vector<RegionId> region_ids, const std::array<double, 3>& ratios,
                          std::uint64_t seed);

enum class SplitPart { Train, Dev, Test };
Dataset select_split(const Dataset& ds, const SplitPlan& plan, SplitPart part);

struct TargetMetrics {
  double mse = 0.0;
  std::optional<double> pearson_r;  // absent when either column is constant
};

std::optional<double> pearson(const Vector& a, const Vector& b);
std::array<TargetMetrics, 2> metrics(const Matrix& pred, const Matrix& truth);

struct TTest {
  double t_statistic = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
};

// Two-sided paired t-test on err_model - err_baseline.
TTest paired_ttest(const Vector& err_model, const Vector& err_baseline);

struct Comparison {
  std::string baseline_name;
  std::array<TTest, 2> tests;
  std::array<TargetMetrics, 2> baseline_metrics;
};

struct EvalReport {
  std::array<TargetMetrics, 2> targets;
  std::optional<Comparison> vs_baseline;
  std::size_t n_test = 0;
  std::map<std::string, EvalReport> strata;
  std::vector<RegionId> regions;  // only filled for strata
};

EvalReport evaluate_predictions(const Matrix& pred, const Matrix& truth,
                                const Matrix* baseline_pred = nullptr,
                                const std::string& baseline_name = {});

enum class StratumKey { Ses, Urbanicity };

struct StratumSpec {
  StratumKey key = StratumKey::Ses;
  int n_bins = 3;
  // Optional ascending cut points (n_bins - 1 of them) replacing equal-count bins.
  std::vector<double> thresholds;

  void validate() const;
};

StratumKey parse_stratum_key(const std::string& name);

// Composite SES (mean of z-scored education and income over the meta table)
// or ln(population / area).
std::map<RegionId, double> stratum_scores(const MetaTable& meta, StratumKey key);

// Bin names are low/mid/high for three bins, bin_<i> otherwise.
std::string bin_name(int bin, int n_bins);

// Assigns each row's region to a bin and reports metrics per bin. Rows whose
// region lacks metadata are excluded with a warning.
EvalReport stratify_and_eval(const Matrix& pred, const Matrix& truth,
                             const std::vector<RegionId>& row_regions, const MetaTable& meta,
                             const StratumSpec& spec, const Matrix* baseline_pred = nullptr,
                             const std::string& baseline_name = {});

}  // namespace ruptura
