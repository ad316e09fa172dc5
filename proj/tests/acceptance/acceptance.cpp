// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ruptura/did_match.hpp"
#include "ruptura/evaluator.hpp"
#include "ruptura/feature_builder.hpp"
#include "ruptura/learners.hpp"
#include "ruptura/placebo.hpp"
#include "ruptura/rdd_estimator.hpp"
#include "ruptura/synth_oracle.hpp"

using namespace ruptura;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

Dataset plain_dataset(const Matrix& X, const Matrix& Y) {
  Dataset ds;
  ds.X = X;
  ds.targets = Y;
  ds.spec.use_exog = true;
  ds.layout.blocks = {Block{"exog", 0, static_cast<std::size_t>(X.cols())}};
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "r%04d", static_cast<int>(i));
    ds.region_ids.push_back(id);
    ds.event_types.push_back("first_case");
  }
  ds.histories.resize(static_cast<std::size_t>(X.rows()));
  ds.before_fits.resize(static_cast<std::size_t>(X.rows()));
  return ds;
}

ModelSpec spec_of(Family f, std::map<std::string, double> h = {}, std::uint64_t seed = 42) {
  ModelSpec s = ModelSpec::defaults(f);
  for (const auto& [k, v] : h) s.hyperparameters[k] = v;
  s.seed = seed;
  return s;
}

double max_recovery_error(const SynthData& d, const WindowConfig& w, std::size_t* n = nullptr) {
  const auto batch = batch_estimate(d.panel, d.events, "first_case", w);
  double worst = 0.0;
  for (const auto& o : batch.outcomes) {
    const auto& t = d.truth.regions.at(o.region_id);
    worst = std::max({worst, std::abs(o.delta0 - t.delta0), std::abs(o.delta1 - t.delta1)});
  }
  if (n) *n = batch.outcomes.size();
  return batch.outcomes.size() == d.truth.regions.size() ? worst : INFINITY;
}

// ---- 1 ----
Outcome feature_dimensions() {
  const WindowConfig w{9, 1, 3};
  const std::vector<std::pair<std::string, std::size_t>> expect{
      {"RC", 2},          {"P", 9},           {"P,RC", 11},          {"exog,RC", 1026},
      {"exog,P", 1033},   {"exog,P,RC", 1035}, {"cov,exog,P,RC", 1046}};
  std::string bad;
  for (const auto& [set, dim] : expect) {
    const auto got = feature_layout(FeatureSetSpec::parse(set), w, 1024).dimension();
    if (got != dim) bad += " " + set + "=" + std::to_string(got);
  }
  return {bad.empty(), bad.empty() ? "7 feature sets match" : "mismatch:" + bad};
}

// ---- 2 ----
Outcome oracle_recovery() {
  SynthConfig c;
  c.n_regions = 100;
  c.seed = 2;
  c.effect.kind = EffectKind::LinearInMeta;
  c.effect.delta0 = 0.6;
  c.effect.delta1 = -0.03;
  c.effect.weights1.assign(c.sociodem_dim, 0.01);
  std::size_t n = 0;
  const double err = max_recovery_error(generate(c), WindowConfig{}, &n);
  return {err <= 1e-9, fmt("max |err| = %.2e over %.0f regions", err, static_cast<double>(n))};
}

// ---- 3 ----
Outcome placebo_validity() {
  SynthConfig c;
  c.n_regions = 200;
  c.noise_sigma = 0.5;
  c.ar_coefficient = 0.3;
  c.effect.kind = EffectKind::Zero;
  c.seed = 303;
  const auto s = placebo_run(generate(c).panel, 5000, WindowConfig{}, 17);
  const bool ok = s.n_episodes == 5000 && std::abs(s.mean_delta0) <= 0.05 && std::abs(s.mean_delta1) <= 0.02;
  return {ok, fmt("mean delta0 = %.4f, mean delta1 = %.4f over %.0f episodes", s.mean_delta0, s.mean_delta1,
                  static_cast<double>(s.n_episodes))};
}

// ---- 4 ----
Outcome baseline_ordering() {
  SynthConfig c;
  c.n_regions = 600;
  c.noise_sigma = 0.3;
  c.ar_coefficient = 0.3;
  c.effect.kind = EffectKind::LinearInHistory;
  c.effect.delta0 = 0.5;
  c.effect.delta1 = -0.05;
  c.effect.weights0 = {0.8, 8.0};
  c.effect.weights1 = {0.05, -0.6};
  c.effect_noise_delta0 = 0.1;
  c.effect_noise_delta1 = 0.01;
  c.seed = 404;
  const auto d = generate(c);
  const auto batch = batch_estimate(d.panel, d.events, "first_case", WindowConfig{});
  const auto ds = assemble_dataset(batch.outcomes, batch.windows, {}, {}, nullptr, FeatureSetSpec::parse("P,RC")).dataset;
  const auto plan = split_by_region(ds.region_ids, {0.6, 0.2, 0.2}, 42);
  const auto train_ds = select_split(ds, plan, SplitPart::Train);
  const auto test_ds = select_split(ds, plan, SplitPart::Test);

  auto sq_err = [&](const Matrix& pred) -> Matrix { return (pred - test_ds.targets).array().square(); };
  const Matrix e_mean = sq_err(predict(train(spec_of(Family::BaselineMean), train_ds), test_ds));
  const Matrix e_fc = sq_err(predict(train(spec_of(Family::BaselineForecast), train_ds), test_ds));

  bool ok = true;
  std::ostringstream detail;
  detail << "n_test=" << test_ds.rows();
  for (auto [name, spec] : {std::pair{"ridge", spec_of(Family::Ridge, {{"alpha", 1.0}})},
                            std::pair{"knn", spec_of(Family::Knn, {{"k", 5}})}}) {
    const Matrix e = sq_err(predict(train(spec, train_ds), test_ds));
    for (int j = 0; j < 2; ++j) {
      for (auto [bname, be] : {std::pair{"mean", &e_mean}, std::pair{"forecast", &e_fc}}) {
        const auto t = paired_ttest(e.col(j), be->col(j));
        const double m = e.col(j).mean(), b = be->col(j).mean();
        const bool good = m < b && t.p_value <= 0.05;
        ok = ok && good;
        if (!good) detail << "; " << name << " vs " << bname << " delta" << j << ": mse " << m << " vs " << b
                          << " p=" << t.p_value;
      }
    }
    detail << "; " << name << " mse=(" << fmt("%.4g, %.4g", e.col(0).mean(), e.col(1).mean()) << ")";
  }
  detail << "; mean mse=(" << fmt("%.4g, %.4g", e_mean.col(0).mean(), e_mean.col(1).mean()) << ")";
  detail << "; forecast mse=(" << fmt("%.4g, %.4g", e_fc.col(0).mean(), e_fc.col(1).mean()) << ")";
  return {ok, detail.str()};
}

// ---- 5 ----
Outcome exogenous_signal() {
  SynthConfig c;
  c.n_regions = 600;
  c.noise_sigma = 0.3;
  c.embedding_dim = 16;
  c.effect.kind = EffectKind::LinearInEmbedding;
  c.effect.delta0 = 0.5;
  c.effect_noise_delta0 = 0.05;
  c.seed = 505;
  const auto d = generate(c);
  const auto batch = batch_estimate(d.panel, d.events, "first_case", WindowConfig{});
  auto r_for = [&](const char* features) {
    const auto ds = assemble_dataset(batch.outcomes, batch.windows, {}, {}, &d.embeddings, FeatureSetSpec::parse(features))
                        .dataset;
    const auto plan = split_by_region(ds.region_ids, {0.6, 0.2, 0.2}, 42);
    const auto tr = select_split(ds, plan, SplitPart::Train);
    const auto te = select_split(ds, plan, SplitPart::Test);
    const Matrix pred = predict(train(spec_of(Family::Ridge, {{"alpha", 1.0}}), tr), te);
    return pearson(pred.col(0), te.targets.col(0)).value_or(0.0);
  };
  const double r_exog = r_for("exog");
  const double r_p = r_for("P");
  return {r_exog >= 0.9 && r_p <= 0.2, fmt("r(exog) = %.3f, r(P) = %.3f", r_exog, r_p)};
}

// ---- 6 ----
Outcome solver_oracles() {
  std::vector<std::string> failures;
  // ridge vs gradient descent
  const Matrix X = gaussian(40, 5, 1), Y = gaussian(40, 2, 2);
  const Matrix W = ridge_solve(X, Y, 0.5);
  Matrix G = Matrix::Zero(5, 2);
  const double step = 1.0 / (2.0 * (X.squaredNorm() + 0.5));
  for (int it = 0; it < 20000; ++it) G -= step * (2.0 * X.transpose() * (X * G - Y) + 2.0 * 0.5 * G);
  const double ridge_gap = (W - G).cwiseAbs().maxCoeff();
  if (ridge_gap > 1e-6) failures.push_back(fmt("ridge gap %.2e", ridge_gap));

  // knn vs brute force on standardized rows
  const Matrix Q = gaussian(10, 5, 3);
  const auto knn = train(spec_of(Family::Knn, {{"k", 3}}), plain_dataset(X, Y));
  const Matrix pk = predict(knn, Q, knn.layout);
  const Eigen::RowVectorXd mu = X.colwise().mean();
  const Eigen::RowVectorXd sd = ((X.rowwise() - mu).colwise().squaredNorm() / 40.0).cwiseSqrt();
  const Matrix Xs = ((X.rowwise() - mu).array().rowwise() / sd.array()).matrix();
  const Matrix Qs = ((Q.rowwise() - mu).array().rowwise() / sd.array()).matrix();
  bool knn_ok = true;
  for (Eigen::Index q = 0; q < Q.rows(); ++q) {
    std::vector<std::pair<double, Eigen::Index>> dist;
    for (Eigen::Index i = 0; i < X.rows(); ++i) dist.push_back({(Xs.row(i) - Qs.row(q)).squaredNorm(), i});
    std::sort(dist.begin(), dist.end());
    const Eigen::RowVectorXd mean = (Y.row(dist[0].second) + Y.row(dist[1].second) + Y.row(dist[2].second)) / 3.0;
    knn_ok = knn_ok && (pk.row(q) - mean).cwiseAbs().maxCoeff() <= 1e-12;
  }
  if (!knn_ok) failures.push_back("knn differs from brute force");

  // single unbootstrapped tree
  const Matrix Xt = gaussian(50, 3, 4), Yt = gaussian(50, 2, 5);
  const auto tree = train(
      spec_of(Family::RandomForest, {{"n_estimators", 1}, {"bootstrap", 0}, {"max_features", 3}, {"max_depth", 0}}),
      plain_dataset(Xt, Yt));
  const double tree_err = (predict(tree, Xt, tree.layout) - Yt).cwiseAbs().maxCoeff();
  if (tree_err > 1e-12) failures.push_back(fmt("tree training error %.2e", tree_err));

  // FFN gradient check
  FfnParams p;
  p.width = 5;
  const FeedForwardNet net(4, 2, p, 31);
  const Matrix Xf = gaussian(8, 4, 6), Yf = gaussian(8, 2, 7);
  std::vector<double> grad;
  net.loss_and_gradient(Xf, Yf, &grad);
  auto theta = net.parameters();
  FeedForwardNet probe = net;
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto t = theta;
    t[i] += 1e-6;
    probe.set_parameters(t);
    const double up = probe.loss(Xf, Yf);
    t[i] -= 2e-6;
    probe.set_parameters(t);
    const double fd = (up - probe.loss(Xf, Yf)) / 2e-6;
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-7, std::abs(fd) + std::abs(grad[i])));
  }
  if (worst > 1e-4) failures.push_back(fmt("ffn gradient rel err %.2e", worst));

  std::string detail = fmt("ridge gap %.1e, tree err %.1e, ffn rel err %.1e", ridge_gap, tree_err, worst);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ---- 7 ----
Outcome statistics_oracles() {
  Vector diff(5);
  diff << 2, -1, 3, 0, 1;
  const auto t = paired_ttest(diff, Vector::Zero(5));
  Vector a(6);
  a << 0.3, -1.2, 2.5, 0.7, 1.1, -0.4;
  const double r = pearson(3.0 * a.array() + 2.0, a).value_or(0.0);
  std::vector<RegionId> ids;
  for (int i = 0; i < 361; ++i) ids.push_back("r" + std::to_string(i));
  const auto plan = split_by_region(ids, {0.6, 0.2, 0.2}, 42);
  const bool ok = std::abs(t.t_statistic - 1.4142) <= 1e-3 && std::abs(t.p_value - 0.2302) <= 1e-3 && t.df == 4 &&
                  std::abs(r - 1.0) <= 1e-12 && plan.train.size() == 217 && plan.dev.size() == 72 &&
                  plan.test.size() == 72;
  return {ok, fmt("t = %.4f, p = %.4f, r = %.12f, ", t.t_statistic, t.p_value, r) +
                  std::to_string(plan.train.size()) + "/" + std::to_string(plan.dev.size()) + "/" +
                  std::to_string(plan.test.size())};
}

// ---- 8 ----
Outcome did_checks() {
  const auto sub = did_estimate(2.0, 3.0, {1.0}, {1.5});
  const bool sub_ok = sub.counterfactual == 2.5 && sub.did == 0.5;

  // Integer levels in steps of 5 and a common +1 shock keep every mean exact.
  SynthConfig base;
  base.n_regions = 20;
  const auto meta = generate(base).meta;
  Panel flat;
  int i = 0;
  for (const auto& [id, m] : meta) {
    for (int w = 0; w < 80; ++w) flat.regions[id].push_back({w, 5.0 * i + (w >= 40 ? 1.0 : 0.0), 500});
    ++i;
  }
  const RegionId target = meta.begin()->first;
  EventTable ev;
  ev.entries[{target, "first_case"}] = 40;
  DiDOptions opt;
  opt.event_type = "first_case";
  const double parallel = did_run(flat, ev, meta, target, opt).did;

  // Monte Carlo: zero-effect AR(1) cohorts with tau added to one target.
  const double tau = 0.4;
  const int reps = 300;
  std::vector<double> est;
  for (int r = 0; r < reps; ++r) {
    SynthConfig c;
    c.n_regions = 40;
    c.noise_sigma = 0.5;
    c.ar_coefficient = 0.3;
    c.seed = 8000 + static_cast<std::uint64_t>(r);
    auto d = generate(c);
    const RegionId tid = d.meta.begin()->first;
    const int week = d.truth.regions.at(tid).event_week;
    for (auto& o : d.panel.regions.at(tid))
      if (o.week >= week) o.score += tau;
    EventTable one;
    one.entries[{tid, "first_case"}] = week;
    est.push_back(did_run(d.panel, one, d.meta, tid, opt).did);
  }
  const auto s = summarize(est);
  const double se = s.std / std::sqrt(static_cast<double>(reps));
  const bool mc_ok = std::abs(s.mean - tau) <= 3.0 * se;
  return {sub_ok && parallel == 0.0 && mc_ok,
          fmt("substitution %.1f/%.1f, parallel DiD = %.1e, planted tau %.2f -> ", sub.counterfactual, sub.did, parallel,
              tau) +
              fmt("%.4f (3 SE = %.4f)", s.mean, 3.0 * se)};
}

// ---- 9 ----
Outcome buffer_ablation() {
  SynthConfig c;
  c.n_regions = 100;
  c.seed = 9;
  c.effect.kind = EffectKind::LinearInHistory;
  c.effect.delta0 = 0.5;
  c.effect.weights0 = {0.2, 3.0};
  const auto d = generate(c);
  bool ok = true;
  std::string detail;
  for (int b : {0, 1, 2}) {
    const WindowConfig w{9, b, 3};
    const double err = max_recovery_error(d, w);
    const auto stats = batch_estimate(d.panel, d.events, "first_case", w).stats;
    ok = ok && err <= 1e-9;
    detail += fmt("b=%.0f: n=%.0f mean delta0=%.4f max err=%.1e; ", b, static_cast<double>(stats.delta0.n),
                  stats.delta0.mean, err);
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

// ---- 10 ----
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  std::random_device rd;
  const fs::path root = fs::temp_directory_path() / ("ruptura_accept_" + std::to_string(rd()));
  fs::create_directories(root);
  const std::string cfg = std::string(RUPTURA_CONFIG_DIR) + "/pipeline.json";
  auto run = [&](const std::string& flags, const std::string& dir) {
    const std::string cmd = "\"" RUPTURA_CLI "\" " + flags + " pipeline --config " + cfg + " --out-dir " +
                            (root / dir).string() + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
  };
  const bool ran = run("", "a") && run("", "b") && run("--threads 1", "t1") && run("--threads 8", "t8");
  const std::string a = slurp(root / "a/report.json");
  const bool same = ran && !a.empty() && a == slurp(root / "b/report.json") &&
                    slurp(root / "t1/report.json") == slurp(root / "t8/report.json") &&
                    a == slurp(root / "t1/report.json");
  std::error_code ec;
  fs::remove_all(root, ec);
  return {same, ran ? (same ? "report.json byte-identical across 4 runs (" + std::to_string(a.size()) + " bytes)"
                            : "report.json differs")
                    : "pipeline run failed"};
}

}  // namespace

int main() {
  set_warnings_enabled(false);
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "feature dimensions", 1, feature_dimensions},
      {2, "noise-free oracle recovery", 5, oracle_recovery},
      {3, "placebo validity", 60, placebo_validity},
      {4, "baseline ordering", 120, baseline_ordering},
      {5, "exogenous-signal recovery", 60, exogenous_signal},
      {6, "solver oracles", 30, solver_oracles},
      {7, "statistics oracles", 30, statistics_oracles},
      {8, "difference in differences", 60, did_checks},
      {9, "buffer ablation", 30, buffer_ablation},
      {10, "pipeline determinism", 120, determinism},
  };
  int failed = 0;
  const auto start_all = std::chrono::steady_clock::now();
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt("; over budget %.0f s", c.budget_s);
    }
    if (!o.pass) ++failed;
    std::printf("%s %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_all).count();
  std::printf("%d/%zu criteria passed in %.1f s\n", static_cast<int>(criteria.size()) - failed, criteria.size(), total);
  return failed == 0 ? 0 : 1;
}
