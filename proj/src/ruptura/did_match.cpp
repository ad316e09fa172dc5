#include "ruptura/did_match.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ruptura/error.hpp"

namespace ruptura {

Eigen::MatrixXd PcaState::project(const Eigen::MatrixXd& data) const {
  Eigen::MatrixXd z = data.rowwise() - means.transpose();
  z = z.array().rowwise() / stds.transpose().array();
  return z * components;
}

Eigen::MatrixXd PcaState::reconstruct(const Eigen::MatrixXd& projected) const {
  Eigen::MatrixXd z = projected * components.transpose();
  z = z.array().rowwise() * stds.transpose().array();
  return z.rowwise() + means.transpose();
}

double PcaState::explained_ratio(int component) const {
  return total_variance > 0 ? eigenvalues(component) / total_variance : 0.0;
}

PcaResult pca(const Eigen::MatrixXd& data, int n_components) {
  const auto n = data.rows();
  const auto d = data.cols();
  if (n_components < 1 || n_components > d)
    throw Error(ErrorCode::InvalidArgument, "n_components must be in [1, columns]");
  if (n <= n_components) throw Error(ErrorCode::InsufficientData, "pca needs more rows than components");

  PcaResult result;
  auto& st = result.state;
  st.means = data.colwise().mean().transpose();
  Eigen::MatrixXd z = data.rowwise() - st.means.transpose();
  st.stds = (z.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(st.stds(j) > 0.0)) st.stds(j) = 1.0;
  z = z.array().rowwise() / st.stds.transpose().array();

  const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::Degenerate, "eigen decomposition failed");
  st.eigenvalues = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  st.total_variance = st.eigenvalues.sum();
  const double scale = std::max(st.eigenvalues(0), 1e-300);
  if (st.eigenvalues(n_components - 1) <= 1e-10 * scale)
    throw Error(ErrorCode::Degenerate, "data rank is below the requested component count");

  st.components = vectors.leftCols(n_components);
  for (Eigen::Index c = 0; c < n_components; ++c) {
    Eigen::Index arg = 0;
    st.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (st.components(arg, c) < 0) st.components.col(c) *= -1.0;
  }
  result.projected = z * st.components;
  return result;
}

MatchContext fit_match_context(const MetaTable& meta) {
  if (meta.size() < 4) throw Error(ErrorCode::InsufficientData, "matching needs at least 4 regions with metadata");
  const std::size_t ds = meta.begin()->second.sociodemographics.size();
  if (ds < 3) throw Error(ErrorCode::Dimension, "matching needs at least 3 sociodemographic columns");
  Eigen::MatrixXd socio(static_cast<Eigen::Index>(meta.size()), static_cast<Eigen::Index>(ds));
  Eigen::Index r = 0;
  std::vector<double> lat, lon;
  for (const auto& [id, m] : meta) {
    if (m.sociodemographics.size() != ds)
      throw Error(ErrorCode::Dimension, "region " + id + ": sociodemographic length differs");
    for (std::size_t j = 0; j < ds; ++j) socio(r, static_cast<Eigen::Index>(j)) = m.sociodemographics[j];
    lat.push_back(m.latitude);
    lon.push_back(m.longitude);
    ++r;
  }
  MatchContext ctx;
  ctx.pca = pca(socio, 3).state;
  auto moments = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    if (!(sd > 0)) sd = 1.0;
  };
  moments(lat, ctx.lat_mean, ctx.lat_std);
  moments(lon, ctx.lon_mean, ctx.lon_std);
  return ctx;
}

namespace {

MatchVector make_vector(const RegionMeta& region, const MatchContext& ctx, double adjacency,
                        double pre_outcome) {
  if (region.sociodemographics.size() != static_cast<std::size_t>(ctx.pca.means.size()))
    throw Error(ErrorCode::Dimension, "region " + region.region_id + ": sociodemographic length differs");
  const Eigen::RowVectorXd row =
      Eigen::Map<const Eigen::RowVectorXd>(region.sociodemographics.data(),
                                           static_cast<Eigen::Index>(region.sociodemographics.size()));
  const Eigen::MatrixXd pcs = ctx.pca.project(row);
  MatchVector mv;
  mv.region_id = region.region_id;
  for (int c = 0; c < 3; ++c) mv.v[static_cast<std::size_t>(c)] = pcs(0, c);
  mv.v[3] = (region.latitude - ctx.lat_mean) / ctx.lat_std;
  mv.v[4] = (region.longitude - ctx.lon_mean) / ctx.lon_std;
  mv.v[5] = adjacency;
  mv.v[6] = mv.v[7] = mv.v[8] = pre_outcome;
  return mv;
}

}  // namespace

MatchVector build_match_vector(const RegionMeta& candidate, const RegionMeta& target,
                               const MatchContext& context, double pre_outcome) {
  if (candidate.region_id == target.region_id)
    throw Error(ErrorCode::InvalidArgument, "a region cannot be a match candidate for itself");
  const double adjacent = target.adjacent_regions.count(candidate.region_id) ? 1.0 : 0.0;
  return make_vector(candidate, context, adjacent, pre_outcome);
}

MatchVector target_reference_vector(const RegionMeta& target, const MatchContext& context,
                                    double pre_outcome) {
  return make_vector(target, context, 1.0, pre_outcome);
}

std::vector<RegionId> match(const MatchVector& target, const std::vector<MatchVector>& candidates,
                            std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  std::vector<std::pair<double, const MatchVector*>> scored;
  for (const auto& c : candidates) {
    if (c.region_id == target.region_id) continue;
    double d2 = 0.0;
    for (std::size_t j = 0; j < kMatchVectorLength; ++j) d2 += (c.v[j] - target.v[j]) * (c.v[j] - target.v[j]);
    scored.emplace_back(std::sqrt(d2), &c);
  }
  if (scored.size() < k)
    throw Error(ErrorCode::InsufficientData, "only " + std::to_string(scored.size()) +
                                                 " eligible candidates, need " + std::to_string(k));
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second->region_id < b.second->region_id;
  });
  std::vector<RegionId> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(scored[i].second->region_id);
  return out;
}

DiDResult did_estimate(double target_pre, double target_post, const std::vector<double>& matched_pre,
                       const std::vector<double>& matched_post) {
  if (matched_pre.empty() || matched_pre.size() != matched_post.size())
    throw Error(ErrorCode::InsufficientData, "DiD needs a non-empty matched set");
  DiDResult r;
  r.target_pre = target_pre;
  r.observed = target_post;
  r.matched_pre = std::accumulate(matched_pre.begin(), matched_pre.end(), 0.0) / static_cast<double>(matched_pre.size());
  r.matched_post = std::accumulate(matched_post.begin(), matched_post.end(), 0.0) / static_cast<double>(matched_post.size());
  r.counterfactual = target_pre + (r.matched_post - r.matched_pre);
  r.did = r.observed - r.counterfactual;
  return r;
}

std::optional<double> window_mean(std::span<const Observation> series, int event_week,
                                  const WindowConfig& config, Segment segment) {
  const int lo = segment == Segment::Before ? config.before_lo() : config.after_lo();
  const int hi = segment == Segment::Before ? config.before_hi() : config.after_hi();
  double sum = 0.0;
  int n = 0;
  for (const auto& o : series) {
    const int t = o.week - event_week;
    if (t >= lo && t <= hi) {
      sum += o.score;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

DiDResult did_run(const Panel& panel, const EventTable& events, const MetaTable& meta,
                  const RegionId& target, const DiDOptions& options) {
  options.window.validate();
  const auto event = events.find(target, options.event_type);
  if (!event) throw Error(ErrorCode::InvalidArgument, "target " + target + " has no '" + options.event_type + "' event");
  const auto* target_series = panel.find(target);
  if (!target_series) throw Error(ErrorCode::InvalidArgument, "target " + target + " not in panel");
  auto target_meta = meta.find(target);
  if (target_meta == meta.end()) throw Error(ErrorCode::Validation, "target " + target + " has no metadata");

  const auto pre = window_mean(*target_series, *event, options.window, Segment::Before);
  const auto post = window_mean(*target_series, *event, options.window, Segment::After);
  if (!pre || !post) throw Error(ErrorCode::InsufficientData, "target " + target + " lacks pre or post observations");

  const MatchContext ctx = fit_match_context(meta);
  const MatchVector reference = target_reference_vector(target_meta->second, ctx, *pre);

  const auto same_type = events.of_type(options.event_type);
  const int T = options.window.half_width;
  std::vector<MatchVector> candidates;
  std::map<RegionId, std::pair<double, double>> period_means;
  for (const auto& [id, series] : panel.regions) {
    if (id == target) continue;
    if (auto ev = same_type.find(id); ev != same_type.end() && std::abs(ev->second - *event) <= T) continue;
    auto m = meta.find(id);
    if (m == meta.end()) continue;
    const auto c_pre = window_mean(series, *event, options.window, Segment::Before);
    const auto c_post = window_mean(series, *event, options.window, Segment::After);
    if (!c_pre || !c_post) continue;
    candidates.push_back(build_match_vector(m->second, target_meta->second, ctx, *c_pre));
    period_means[id] = {*c_pre, *c_post};
  }
  const auto matched = match(reference, candidates, options.k);
  std::vector<double> mp, mq;
  for (const auto& id : matched) {
    mp.push_back(period_means[id].first);
    mq.push_back(period_means[id].second);
  }
  DiDResult result = did_estimate(*pre, *post, mp, mq);
  result.target_region = target;
  result.matched_regions = matched;
  return result;
}

}  // namespace ruptura
