#include "ruptura/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "ruptura/error.hpp"
#include "ruptura/parallel.hpp"

namespace ruptura {

SplitPlan split_by_region(std::vector<RegionId> region_ids, const std::array<double, 3>& ratios,
                          std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::Config, "split ratios must sum to 1");
  for (double r : ratios)
    if (r < 0.0) throw Error(ErrorCode::Config, "split ratios must be non-negative");
  std::sort(region_ids.begin(), region_ids.end());
  region_ids.erase(std::unique(region_ids.begin(), region_ids.end()), region_ids.end());
  const std::size_t n = region_ids.size();
  if (n < 5) throw Error(ErrorCode::InsufficientData, "splitting needs at least 5 regions");

  auto rng = substream(seed, 0x73706c6974);
  for (std::size_t i = n; i > 1; --i) std::swap(region_ids[i - 1], region_ids[uniform_index(rng, i)]);

  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[0]));
  const auto n_dev = std::min(n - n_train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1])));
  SplitPlan plan;
  plan.ratios = ratios;
  plan.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) plan.train.insert(region_ids[i]);
    else if (i < n_train + n_dev) plan.dev.insert(region_ids[i]);
    else plan.test.insert(region_ids[i]);
  }
  return plan;
}

Dataset select_split(const Dataset& ds, const SplitPlan& plan, SplitPart part) {
  const auto& keep = part == SplitPart::Train ? plan.train : part == SplitPart::Dev ? plan.dev : plan.test;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.rows(); ++i)
    if (keep.count(ds.region_ids[i])) rows.push_back(i);
  return ds.subset(rows);
}

std::optional<double> pearson(const Vector& a, const Vector& b) {
  const auto n = a.size();
  if (n < 2 || b.size() != n) return std::nullopt;
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  const double saa = ac.squaredNorm(), sbb = bc.squaredNorm();
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  const double r = ac.dot(bc) / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

std::array<TargetMetrics, 2> metrics(const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != 2 || truth.cols() != 2)
    throw Error(ErrorCode::Dimension, "prediction and truth shapes differ");
  if (pred.rows() == 0) throw Error(ErrorCode::InsufficientData, "no rows to evaluate");
  std::array<TargetMetrics, 2> out;
  for (int j = 0; j < 2; ++j) {
    out[static_cast<std::size_t>(j)].mse = (pred.col(j) - truth.col(j)).squaredNorm() / static_cast<double>(pred.rows());
    out[static_cast<std::size_t>(j)].pearson_r = pearson(pred.col(j), truth.col(j));
  }
  return out;
}

TTest paired_ttest(const Vector& err_model, const Vector& err_baseline) {
  if (err_model.size() != err_baseline.size())
    throw Error(ErrorCode::Dimension, "paired t-test needs equal-length vectors");
  const auto n = err_model.size();
  if (n < 2) throw Error(ErrorCode::InsufficientData, "paired t-test needs n >= 2");
  const Vector d = err_model - err_baseline;
  const double mean = d.mean();
  const double var = (d.array() - mean).square().sum() / static_cast<double>(n - 1);
  TTest out;
  out.df = static_cast<std::size_t>(n - 1);
  if (!(var > 0.0)) {
    if (mean == 0.0) {
      out.t_statistic = 0.0;
      out.p_value = 1.0;
    } else {
      out.t_statistic = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      out.p_value = 0.0;
    }
    return out;
  }
  out.t_statistic = mean / std::sqrt(var / static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(out.df));
  out.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t_statistic))), 0.0, 1.0);
  return out;
}

EvalReport evaluate_predictions(const Matrix& pred, const Matrix& truth, const Matrix* baseline_pred,
                                const std::string& baseline_name) {
  EvalReport report;
  report.targets = metrics(pred, truth);
  report.n_test = static_cast<std::size_t>(pred.rows());
  if (baseline_pred) {
    Comparison cmp;
    cmp.baseline_name = baseline_name;
    cmp.baseline_metrics = metrics(*baseline_pred, truth);
    if (pred.rows() >= 2) {
      for (int j = 0; j < 2; ++j) {
        const Vector em = (pred.col(j) - truth.col(j)).array().square();
        const Vector eb = (baseline_pred->col(j) - truth.col(j)).array().square();
        cmp.tests[static_cast<std::size_t>(j)] = paired_ttest(em, eb);
      }
    }
    report.vs_baseline = std::move(cmp);
  }
  return report;
}

void StratumSpec::validate() const {
  if (n_bins < 2) throw Error(ErrorCode::Config, "strata need at least 2 bins");
  if (!thresholds.empty()) {
    if (static_cast<int>(thresholds.size()) != n_bins - 1)
      throw Error(ErrorCode::Config, "threshold override needs n_bins - 1 cut points");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
      throw Error(ErrorCode::Config, "threshold override must be ascending");
  }
}

StratumKey parse_stratum_key(const std::string& name) {
  if (name == "ses") return StratumKey::Ses;
  if (name == "urbanicity") return StratumKey::Urbanicity;
  throw Error(ErrorCode::Config, "unknown stratum key '" + name + "'");
}

std::map<RegionId, double> stratum_scores(const MetaTable& meta, StratumKey key) {
  std::map<RegionId, double> out;
  if (key == StratumKey::Urbanicity) {
    for (const auto& [id, m] : meta) out[id] = std::log(m.population / m.area_sq_miles);
    return out;
  }
  const double n = static_cast<double>(meta.size());
  double me = 0, mi = 0;
  for (const auto& [id, m] : meta) {
    me += m.education;
    mi += m.income;
  }
  me /= n;
  mi /= n;
  double se = 0, si = 0;
  for (const auto& [id, m] : meta) {
    se += (m.education - me) * (m.education - me);
    si += (m.income - mi) * (m.income - mi);
  }
  se = std::sqrt(se / n);
  si = std::sqrt(si / n);
  for (const auto& [id, m] : meta) {
    const double ze = se > 0 ? (m.education - me) / se : 0.0;
    const double zi = si > 0 ? (m.income - mi) / si : 0.0;
    out[id] = 0.5 * (ze + zi);
  }
  return out;
}

std::string bin_name(int bin, int n_bins) {
  if (n_bins == 3) {
    static const char* names[] = {"low", "mid", "high"};
    return names[bin];
  }
  return "bin_" + std::to_string(bin);
}

EvalReport stratify_and_eval(const Matrix& pred, const Matrix& truth,
                             const std::vector<RegionId>& row_regions, const MetaTable& meta,
                             const StratumSpec& spec, const Matrix* baseline_pred,
                             const std::string& baseline_name) {
  spec.validate();
  if (static_cast<Eigen::Index>(row_regions.size()) != pred.rows())
    throw Error(ErrorCode::Dimension, "row_regions must match prediction rows");
  EvalReport report = evaluate_predictions(pred, truth, baseline_pred, baseline_name);

  const auto scores = stratum_scores(meta, spec.key);
  std::vector<std::pair<double, RegionId>> ranked;
  std::set<RegionId> seen;
  for (const auto& id : row_regions) {
    if (!seen.insert(id).second) continue;
    auto it = scores.find(id);
    if (it == scores.end()) {
      log_warning("strata: region " + id + " has no metadata; excluded");
      continue;
    }
    ranked.emplace_back(it->second, id);
  }
  std::stable_sort(ranked.begin(), ranked.end());

  std::map<RegionId, int> bin_of;
  const std::size_t n = ranked.size();
  for (std::size_t i = 0; i < n; ++i) {
    int bin = 0;
    if (spec.thresholds.empty()) {
      bin = static_cast<int>(i * static_cast<std::size_t>(spec.n_bins) / n);
    } else {
      while (bin < spec.n_bins - 1 && ranked[i].first > spec.thresholds[static_cast<std::size_t>(bin)]) ++bin;
    }
    bin_of[ranked[i].second] = bin;
  }

  for (int b = 0; b < spec.n_bins; ++b) {
    std::vector<Eigen::Index> rows;
    std::vector<RegionId> regions;
    for (std::size_t i = 0; i < row_regions.size(); ++i) {
      auto it = bin_of.find(row_regions[i]);
      if (it != bin_of.end() && it->second == b) rows.push_back(static_cast<Eigen::Index>(i));
    }
    for (const auto& [id, bin] : bin_of)
      if (bin == b) regions.push_back(id);
    if (rows.empty()) continue;
    Matrix p(static_cast<Eigen::Index>(rows.size()), 2), t(static_cast<Eigen::Index>(rows.size()), 2), bp;
    if (baseline_pred) bp.resize(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      p.row(kk) = pred.row(rows[k]);
      t.row(kk) = truth.row(rows[k]);
      if (baseline_pred) bp.row(kk) = baseline_pred->row(rows[k]);
    }
    EvalReport sub = evaluate_predictions(p, t, baseline_pred ? &bp : nullptr, baseline_name);
    sub.regions = std::move(regions);
    report.strata.emplace(bin_name(b, spec.n_bins), std::move(sub));
  }
  return report;
}

}  // namespace ruptura
