#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <cmath>
#include <numeric>
#include <random>

#include "ruptura/error.hpp"
#include "ruptura/learners.hpp"
#include "ruptura/parallel.hpp"
#include "support.hpp"

using namespace ruptura;

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

Dataset make_dataset(const Matrix& X, const Matrix& Y) {
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

ModelSpec spec_of(Family f, std::map<std::string, double> h = {}, std::uint64_t seed = 1) {
  ModelSpec s = ModelSpec::defaults(f);
  for (const auto& [k, v] : h) s.hyperparameters[k] = v;
  s.seed = seed;
  return s;
}

Matrix standardized(const Matrix& X, const Matrix& train) {
  const Eigen::RowVectorXd mean = train.colwise().mean();
  const Matrix c = train.rowwise() - mean;
  Eigen::RowVectorXd sd = (c.colwise().squaredNorm() / static_cast<double>(train.rows())).cwiseSqrt();
  Matrix out = X.rowwise() - mean;
  return out.array().rowwise() / sd.array();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(0);
}

}  // namespace

TEST_CASE("ridge solution matches gradient descent") {
  const Matrix X = gaussian(40, 5, 1);
  const Matrix Y = gaussian(40, 2, 2);
  const double alpha = 0.5;
  const Matrix W = ridge_solve(X, Y, alpha);

  Matrix G = Matrix::Zero(5, 2);
  const double step = 1.0 / (2.0 * (X.squaredNorm() + alpha));
  for (int it = 0; it < 20000; ++it) G -= step * (2.0 * X.transpose() * (X * G - Y) + 2.0 * alpha * G);
  CHECK((W - G).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("ridge with vanishing alpha approaches least squares") {
  const Matrix X = gaussian(30, 4, 3);
  const Matrix Y = gaussian(30, 2, 4);
  const Matrix ols = X.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(Y);
  CHECK((ridge_solve(X, Y, 1e-10) - ols).cwiseAbs().maxCoeff() <= 1e-5);

  // wide system: minimum-norm interpolant
  const Matrix Xw = gaussian(6, 10, 5);
  const Matrix Yw = gaussian(6, 2, 6);
  const Matrix pinv = Xw.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(Yw);
  CHECK((ridge_solve(Xw, Yw, 1e-10) - pinv).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("ridge weight norm does not grow with alpha") {
  const Matrix X = gaussian(25, 6, 7);
  const Matrix Y = gaussian(25, 2, 8);
  double prev = std::numeric_limits<double>::infinity();
  for (double a : {1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0, 1e4}) {
    const double norm = ridge_solve(X, Y, a).norm();
    CHECK(norm <= prev);
    prev = norm;
  }
}

TEST_CASE("ridge rejects non-positive alpha") {
  CHECK(code_of([] { ridge_solve(Matrix::Ones(3, 2), Matrix::Ones(3, 2), 0.0); }) == ErrorCode::Config);
}

TEST_CASE("ridge recovers a planted linear map") {
  const Matrix X = gaussian(80, 4, 9);
  Matrix Wstar(4, 2);
  Wstar << 1.0, -0.5, 0.25, 2.0, -1.5, 0.0, 0.75, 0.1;
  Matrix Y = X * Wstar;
  Y.col(0).array() += 0.3;
  Y.col(1).array() -= 1.2;
  const auto model = train(spec_of(Family::Ridge, {{"alpha", 1e-9}}), make_dataset(X, Y));
  const Matrix Xt = gaussian(20, 4, 10);
  Matrix expect = Xt * Wstar;
  expect.col(0).array() += 0.3;
  expect.col(1).array() -= 1.2;
  const Matrix pred = predict(model, make_dataset(Xt, Matrix::Zero(20, 2)));
  CHECK((pred - expect).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("per-target ridge equals the joint fit") {
  const Matrix X = gaussian(30, 3, 11);
  const Matrix Y = gaussian(30, 2, 12);
  const auto ds = make_dataset(X, Y);
  auto s = spec_of(Family::Ridge, {{"alpha", 2.0}});
  const Matrix joint = predict(train(s, ds), ds);
  s.per_target = true;
  const auto split = train(s, ds);
  CHECK(split.heads.size() == 2);
  CHECK((predict(split, ds) - joint).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("knn matches brute force search") {
  const Matrix X = gaussian(30, 4, 13);
  const Matrix Y = gaussian(30, 2, 14);
  const Matrix Q = gaussian(10, 4, 15);
  const auto model = train(spec_of(Family::Knn, {{"k", 3}}), make_dataset(X, Y));
  const Matrix pred = predict(model, make_dataset(Q, Matrix::Zero(10, 2)));

  const Matrix Xs = standardized(X, X);
  const Matrix Qs = standardized(Q, X);
  for (Eigen::Index q = 0; q < Q.rows(); ++q) {
    std::vector<std::pair<double, Eigen::Index>> d;
    for (Eigen::Index i = 0; i < X.rows(); ++i) d.push_back({(Xs.row(i) - Qs.row(q)).squaredNorm(), i});
    std::sort(d.begin(), d.end());
    Eigen::RowVectorXd mean = (Y.row(d[0].second) + Y.row(d[1].second) + Y.row(d[2].second)) / 3.0;
    CHECK((pred.row(q) - mean).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("nearest_rows breaks distance ties by region id then index") {
  Matrix train(4, 1);
  train << 1.0, 1.0, 1.0, 5.0;
  const std::vector<RegionId> ids{"c", "a", "b", "a"};
  const Eigen::RowVectorXd q = Eigen::RowVectorXd::Constant(1, 1.0);
  CHECK(nearest_rows(train, ids, q, 2) == std::vector<std::size_t>{1, 2});
  CHECK(nearest_rows(train, ids, q, 9).size() == 4);
}

TEST_CASE("knn with k = n is the mean baseline and larger k clamps") {
  const Matrix X = gaussian(12, 3, 16);
  const Matrix Y = gaussian(12, 2, 17);
  const auto ds = make_dataset(X, Y);
  const auto test = make_dataset(gaussian(5, 3, 18), Matrix::Zero(5, 2));
  set_warnings_enabled(false);
  const Matrix all = predict(train(spec_of(Family::Knn, {{"k", 12}}), ds), test);
  const Matrix clamped = predict(train(spec_of(Family::Knn, {{"k", 100}}), ds), test);
  set_warnings_enabled(true);
  const Matrix mean = predict(train(spec_of(Family::BaselineMean), ds), test);
  CHECK((all - mean).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(clamped == all);
}

TEST_CASE("an unrestricted single tree fits distinct rows exactly") {
  const Matrix X = gaussian(50, 3, 19);
  const Matrix Y = gaussian(50, 2, 20);
  const auto ds = make_dataset(X, Y);
  for (Family f : {Family::RandomForest, Family::ExtraTrees}) {
    const auto model =
        train(spec_of(f, {{"n_estimators", 1}, {"bootstrap", 0}, {"max_features", 3}, {"max_depth", 0}}), ds);
    CHECK((predict(model, ds) - Y).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("max_depth bounds tree depth") {
  const Matrix X = gaussian(60, 2, 21);
  const Matrix Y = gaussian(60, 2, 22);
  TreeParams p;
  p.max_depth = 3;
  std::vector<std::size_t> rows(60);
  std::iota(rows.begin(), rows.end(), 0);
  std::mt19937_64 rng(1);
  const Tree t = build_tree(X, Y, rows, p, rng);
  CHECK(t.depth() <= 3);
}

TEST_CASE("forests do not depend on row order or thread count") {
  const Matrix X = gaussian(40, 4, 23);
  const Matrix Y = gaussian(40, 2, 24);
  const auto ds = make_dataset(X, Y);
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto shuffled = ds.subset(perm);
  const auto test = make_dataset(gaussian(15, 4, 25), Matrix::Zero(15, 2));
  for (Family f : {Family::RandomForest, Family::ExtraTrees}) {
    const auto s = spec_of(f, {{"n_estimators", 25}}, 77);
    set_thread_count(1);
    const Matrix a = predict(train(s, ds), test);
    set_thread_count(4);
    const Matrix b = predict(train(s, shuffled), test);
    set_thread_count(0);
    CHECK(a == b);
  }
}

TEST_CASE("ffn gradient matches finite differences") {
  FfnParams p;
  p.hidden_layers = 2;
  p.width = 5;
  const FeedForwardNet net(4, 2, p, 31);
  const Matrix X = gaussian(8, 4, 32);
  const Matrix Y = gaussian(8, 2, 33);
  std::vector<double> grad;
  net.loss_and_gradient(X, Y, &grad);
  auto theta = net.parameters();
  REQUIRE(grad.size() == theta.size());
  REQUIRE(theta.size() == net.parameter_count());
  FeedForwardNet probe = net;
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto t = theta;
    t[i] += h;
    probe.set_parameters(t);
    const double up = probe.loss(X, Y);
    t[i] -= 2 * h;
    probe.set_parameters(t);
    const double down = probe.loss(X, Y);
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-7, std::abs(fd) + std::abs(grad[i])));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("ffn training lowers the loss and is seed-deterministic") {
  const Matrix X = gaussian(200, 3, 34);
  Matrix W(3, 2);
  W << 0.5, -1.0, 1.0, 0.2, -0.3, 0.7;
  const Matrix Y = X * W;
  FfnParams p;
  p.width = 8;
  p.epochs = 200;
  p.learning_rate = 0.01;
  FeedForwardNet net(3, 2, p, 5);
  const double before = net.loss(X, Y);
  net.fit(X, Y, p, 5);
  CHECK(net.loss(X, Y) < 0.5 * before);

  const auto ds = make_dataset(X, Y);
  const auto s = spec_of(Family::Ffn, {{"epochs", 20}}, 9);
  CHECK(predict(train(s, ds), ds) == predict(train(s, ds), ds));
  CHECK(predict(train(spec_of(Family::Ffn, {{"epochs", 20}}, 10), ds), ds) != predict(train(s, ds), ds));
}

TEST_CASE("no-change and mean baselines") {
  Matrix X(2, 1);
  X << 0.0, 1.0;
  Matrix Y(2, 2);
  Y << 1.0, 0.0, 3.0, 0.0;
  const auto ds = make_dataset(X, Y);
  CHECK(predict(train(spec_of(Family::BaselineNoChange), ds), ds) == Matrix::Zero(2, 2));
  const Matrix m = predict(train(spec_of(Family::BaselineMean), ds), ds);
  CHECK(m(0, 0) == 2.0);
  CHECK(m(1, 0) == 2.0);
  CHECK(m(0, 1) == 0.0);
}

TEST_CASE("forecast baseline predicts no change on flat and linear histories") {
  const WindowConfig w{};
  for (double slope : {0.0, 0.4}) {
    Matrix X = Matrix::Zero(1, 1);
    auto ds = make_dataset(X, Matrix::Zero(1, 2));
    ds.window = w;
    std::vector<Point> hist;
    for (int t = w.before_lo(); t <= w.before_hi(); ++t) hist.push_back({t, 2.0 + slope * t});
    ds.histories[0] = hist;
    ds.before_fits[0] = fit_segment(hist);
    const Matrix pred = predict(train(spec_of(Family::BaselineForecast), ds), ds);
    CHECK(std::abs(pred(0, 0)) <= 1e-8);
    CHECK(std::abs(pred(0, 1)) <= 1e-8);
  }
}

TEST_CASE("forecast baseline needs a dataset") {
  const auto ds = make_dataset(Matrix::Zero(1, 1), Matrix::Zero(1, 2));
  const auto model = train(spec_of(Family::BaselineForecast), ds);
  CHECK(code_of([&] { predict(model, ds.X, ds.layout); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("prediction with a different layout is rejected") {
  const auto ds = make_dataset(gaussian(10, 3, 40), gaussian(10, 2, 41));
  const auto model = train(spec_of(Family::Ridge), ds);
  Layout other;
  other.blocks = {Block{"P", 0, 3}};
  CHECK(code_of([&] { predict(model, ds.X, other); }) == ErrorCode::Layout);
}

TEST_CASE("invalid hyperparameters are config errors naming the key") {
  auto message = [](Family f, std::map<std::string, double> h) {
    try {
      spec_of(f, h).validate();
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Config);
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(Family::Ridge, {{"alpha", -1}}).find("alpha") != std::string::npos);
  CHECK(message(Family::Knn, {{"k", 0}}).find("k=0") != std::string::npos);
  CHECK(message(Family::Knn, {{"k", 2.5}}).find("k") != std::string::npos);
  CHECK(message(Family::RandomForest, {{"n_estimators", 0}}).find("n_estimators") != std::string::npos);
  CHECK(message(Family::ExtraTrees, {{"bootstrap", 2}}).find("bootstrap") != std::string::npos);
  CHECK(message(Family::Ffn, {{"learning_rate", 0}}).find("learning_rate") != std::string::npos);
  CHECK(message(Family::Ridge, {{"k", 3}}).find("unknown") != std::string::npos);
  CHECK(message(Family::BaselineForecast, {{"max_order", 9}}).find("max_order") != std::string::npos);
  CHECK(message(Family::Ridge, {{"alpha", 1}}).empty());
}

TEST_CASE("family names round-trip") {
  for (Family f : {Family::Ridge, Family::Knn, Family::RandomForest, Family::ExtraTrees, Family::Ffn,
                   Family::BaselineNoChange, Family::BaselineMean, Family::BaselineForecast})
    CHECK(parse_family(family_name(f)) == f);
  CHECK_THROWS_AS(parse_family("lasso"), Error);
}

TEST_CASE("empty training set is an insufficient-data error") {
  const auto ds = make_dataset(Matrix(0, 2), Matrix(0, 2));
  CHECK(code_of([&] { train(spec_of(Family::Ridge), ds); }) == ErrorCode::InsufficientData);
}

TEST_CASE("models round-trip through binary and JSON files") {
  const auto ds = make_dataset(gaussian(30, 3, 50), gaussian(30, 2, 51));
  const auto test = make_dataset(gaussian(7, 3, 52), Matrix::Zero(7, 2));
  testing::TempDir dir("models");
  std::vector<ModelSpec> specs{spec_of(Family::Ridge),
                               spec_of(Family::Knn, {{"k", 4}}),
                               spec_of(Family::RandomForest, {{"n_estimators", 5}}),
                               spec_of(Family::ExtraTrees, {{"n_estimators", 5}}),
                               spec_of(Family::Ffn, {{"epochs", 5}}),
                               spec_of(Family::BaselineMean),
                               spec_of(Family::BaselineNoChange)};
  auto per = spec_of(Family::Knn);
  per.per_target = true;
  specs.push_back(per);
  for (const auto& s : specs) {
    const auto model = train(s, ds);
    const Matrix expect = predict(model, test);
    for (const char* ext : {".bin", ".json"}) {
      const auto path = dir.file(std::string(family_name(s.family)) + ext);
      save_model(model, path);
      const auto back = load_model(path);
      CHECK(back.spec.family == s.family);
      CHECK(back.spec.seed == s.seed);
      CHECK(back.spec.per_target == s.per_target);
      CHECK(back.fingerprint() == model.fingerprint());
      CHECK(predict(back, test) == expect);
    }
  }
}

TEST_CASE("loading a corrupt model file fails cleanly") {
  testing::TempDir dir("corrupt");
  CHECK_THROWS_AS(load_model(dir.file("m.bin", "not a model")), Error);
  CHECK_THROWS_AS(load_model(dir.file("missing.bin")), Error);
}
