#include "ruptura/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "ruptura/csv.hpp"
#include "ruptura/error.hpp"
#include "ruptura/forecast.hpp"
#include "ruptura/parallel.hpp"

namespace ruptura {

using nlohmann::json;

namespace {

constexpr int kModelFormatVersion = 1;

struct FamilyInfo {
  Family family;
  const char* name;
  std::vector<std::string> keys;
};

const std::vector<FamilyInfo>& families() {
  static const std::vector<FamilyInfo> table = {
      {Family::Ridge, "ridge", {"alpha"}},
      {Family::Knn, "knn", {"k"}},
      {Family::RandomForest, "random_forest", {"n_estimators", "max_depth", "max_features", "bootstrap"}},
      {Family::ExtraTrees, "extra_trees", {"n_estimators", "max_depth", "max_features", "bootstrap"}},
      {Family::Ffn, "ffn", {"epochs", "learning_rate", "hidden_layers", "width", "batch_size"}},
      {Family::BaselineNoChange, "baseline_no_change", {}},
      {Family::BaselineMean, "baseline_mean", {}},
      {Family::BaselineForecast, "baseline_forecast", {"max_order"}},
  };
  return table;
}

const FamilyInfo& info(Family f) {
  for (const auto& i : families())
    if (i.family == f) return i;
  throw Error(ErrorCode::InvalidArgument, "unknown family");
}

bool is_whole(double v) { return std::floor(v) == v; }

}  // namespace

const char* family_name(Family family) { return info(family).name; }

Family parse_family(const std::string& name) {
  for (const auto& i : families())
    if (name == i.name) return i.family;
  // short aliases used on the command line
  if (name == "mean") return Family::BaselineMean;
  if (name == "no_change") return Family::BaselineNoChange;
  if (name == "forecast") return Family::BaselineForecast;
  if (name == "rf") return Family::RandomForest;
  if (name == "et") return Family::ExtraTrees;
  throw Error(ErrorCode::Config, "unknown model family '" + name + "'");
}

ModelSpec ModelSpec::defaults(Family family, bool rich_features) {
  ModelSpec s;
  s.family = family;
  auto& h = s.hyperparameters;
  switch (family) {
    case Family::Ridge: h["alpha"] = rich_features ? 10.0 : 1.0; break;
    case Family::Knn: h["k"] = 5; break;
    case Family::RandomForest:
      h["n_estimators"] = rich_features ? 1000 : 500;
      h["max_depth"] = 0;
      h["max_features"] = 0;
      h["bootstrap"] = 1;
      break;
    case Family::ExtraTrees:
      h["n_estimators"] = 500;
      h["max_depth"] = rich_features ? 0 : 10;
      h["max_features"] = 0;
      h["bootstrap"] = 0;
      break;
    case Family::Ffn:
      h["epochs"] = 150;
      h["learning_rate"] = 0.005;
      h["hidden_layers"] = 2;
      h["width"] = 2;
      h["batch_size"] = 64;
      break;
    case Family::BaselineForecast: h["max_order"] = 3; break;
    case Family::BaselineNoChange:
    case Family::BaselineMean: break;
  }
  return s;
}

double ModelSpec::get(const std::string& name) const {
  auto it = hyperparameters.find(name);
  if (it != hyperparameters.end()) return it->second;
  const auto d = defaults(family);
  it = d.hyperparameters.find(name);
  if (it == d.hyperparameters.end())
    throw Error(ErrorCode::Config, std::string(family_name(family)) + " has no hyperparameter '" + name + "'");
  return it->second;
}

void ModelSpec::validate() const {
  const auto& fi = info(family);
  for (const auto& [key, value] : hyperparameters) {
    if (std::find(fi.keys.begin(), fi.keys.end(), key) == fi.keys.end())
      throw Error(ErrorCode::Config, std::string(fi.name) + ": unknown hyperparameter '" + key + "'");
    if (!std::isfinite(value))
      throw Error(ErrorCode::Config, std::string(fi.name) + ": hyperparameter '" + key + "' is not finite");
  }
  auto require = [&](const std::string& key, bool ok, const char* rule) {
    if (!ok)
      throw Error(ErrorCode::Config, std::string(fi.name) + ": invalid hyperparameter " + key + "=" +
                                         csv::format(get(key)) + " (" + rule + ")");
  };
  switch (family) {
    case Family::Ridge: require("alpha", get("alpha") > 0.0, "must be > 0"); break;
    case Family::Knn: require("k", get("k") >= 1 && is_whole(get("k")), "integer >= 1"); break;
    case Family::RandomForest:
    case Family::ExtraTrees:
      require("n_estimators", get("n_estimators") >= 1 && is_whole(get("n_estimators")), "integer >= 1");
      require("max_depth", get("max_depth") >= 0 && is_whole(get("max_depth")), "integer >= 0, 0 = unlimited");
      require("max_features", get("max_features") >= 0 && is_whole(get("max_features")),
              "integer >= 0, 0 = ceil(d/3)");
      require("bootstrap", get("bootstrap") == 0 || get("bootstrap") == 1, "0 or 1");
      break;
    case Family::Ffn:
      require("epochs", get("epochs") >= 1 && is_whole(get("epochs")), "integer >= 1");
      require("learning_rate", get("learning_rate") > 0, "must be > 0");
      require("hidden_layers", get("hidden_layers") >= 1 && is_whole(get("hidden_layers")), "integer >= 1");
      require("width", get("width") >= 1 && is_whole(get("width")), "integer >= 1");
      require("batch_size", get("batch_size") >= 1 && is_whole(get("batch_size")), "integer >= 1");
      break;
    case Family::BaselineForecast:
      require("max_order", get("max_order") >= 0 && get("max_order") <= 8 && is_whole(get("max_order")),
              "integer in [0, 8]");
      break;
    case Family::BaselineNoChange:
    case Family::BaselineMean: break;
  }
}

Matrix ridge_solve(const Matrix& X, const Matrix& Y, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::Config, "ridge alpha must be > 0");
  if (X.rows() != Y.rows()) throw Error(ErrorCode::Dimension, "X and Y row counts differ");
  const auto n = X.rows();
  const auto d = X.cols();
  if (d <= n) {
    Matrix gram = X.transpose() * X;
    gram.diagonal().array() += alpha;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw Error(ErrorCode::Degenerate, "ridge system is singular");
    return ldlt.solve(X.transpose() * Y);
  }
  // wide case: W = X'(XX' + alpha I)^-1 Y
  Matrix kernel = X * X.transpose();
  kernel.diagonal().array() += alpha;
  Eigen::LDLT<Matrix> ldlt(kernel);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw Error(ErrorCode::Degenerate, "ridge system is singular");
  return X.transpose() * ldlt.solve(Y);
}

std::vector<std::size_t> nearest_rows(const Matrix& train, const std::vector<RegionId>& region_ids,
                                      const Eigen::RowVectorXd& query, std::size_t k) {
  const auto n = static_cast<std::size_t>(train.rows());
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = (train.row(static_cast<Eigen::Index>(i)) - query).squaredNorm();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, n);
  auto less = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    if (region_ids[a] != region_ids[b]) return region_ids[a] < region_ids[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), less);
  idx.resize(k);
  return idx;
}

namespace {

// Rows sorted by (region, event type, features, targets) so that fitted state
// does not depend on the order rows were supplied in.
std::vector<std::size_t> canonical_order(const Dataset& ds) {
  std::vector<std::size_t> order(ds.rows());
  std::iota(order.begin(), order.end(), 0);
  auto lex = [](const auto& a, const auto& b) {
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      if (a(j) < b(j)) return -1;
      if (b(j) < a(j)) return 1;
    }
    return 0;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ds.region_ids[a] != ds.region_ids[b]) return ds.region_ids[a] < ds.region_ids[b];
    if (ds.event_types[a] != ds.event_types[b]) return ds.event_types[a] < ds.event_types[b];
    const auto ra = static_cast<Eigen::Index>(a), rb = static_cast<Eigen::Index>(b);
    if (int c = lex(ds.X.row(ra), ds.X.row(rb)); c != 0) return c < 0;
    return lex(ds.targets.row(ra), ds.targets.row(rb)) < 0;
  });
  return order;
}

Matrix standardize(const Matrix& X, const Vector& means, const Vector& stds) {
  Matrix out = X.rowwise() - means.transpose();
  return out.array().rowwise() / stds.transpose().array();
}

ModelState train_head(const ModelSpec& spec, const Dataset& ds, const Matrix& Xs, const Matrix& Y,
                      std::uint64_t head_seed) {
  const auto n = Xs.rows();
  const auto d = Xs.cols();
  switch (spec.family) {
    case Family::Ridge: {
      RidgeState s;
      s.intercept = Y.colwise().mean().transpose();
      const Matrix Yc = Y.rowwise() - s.intercept.transpose();
      // Xs is already centred on the training means
      s.weights = ridge_solve(Xs, Yc, spec.get("alpha"));
      return s;
    }
    case Family::Knn: {
      KnnState s;
      s.X = Xs;
      s.Y = Y;
      s.region_ids = ds.region_ids;
      s.k = static_cast<int>(spec.get("k"));
      if (s.k > n) {
        log_warning("knn: k=" + std::to_string(s.k) + " exceeds training rows; clamped to " + std::to_string(n));
        s.k = static_cast<int>(n);
      }
      return s;
    }
    case Family::RandomForest:
    case Family::ExtraTrees: {
      ForestParams fp;
      fp.n_estimators = static_cast<int>(spec.get("n_estimators"));
      fp.bootstrap = spec.get("bootstrap") != 0.0;
      fp.tree.mode = spec.family == Family::RandomForest ? SplitMode::Best : SplitMode::Random;
      fp.tree.max_depth = static_cast<int>(spec.get("max_depth"));
      const auto mf = static_cast<std::size_t>(spec.get("max_features"));
      fp.tree.max_features = mf == 0 ? static_cast<std::size_t>((d + 2) / 3) : std::min<std::size_t>(mf, static_cast<std::size_t>(d));
      return ForestState{build_forest(Xs, Y, fp, head_seed)};
    }
    case Family::Ffn: {
      FfnParams p;
      p.epochs = static_cast<int>(spec.get("epochs"));
      p.learning_rate = spec.get("learning_rate");
      p.hidden_layers = static_cast<int>(spec.get("hidden_layers"));
      p.width = static_cast<int>(spec.get("width"));
      p.batch_size = static_cast<int>(spec.get("batch_size"));
      FeedForwardNet net(static_cast<int>(d), static_cast<int>(Y.cols()), p, head_seed);
      net.fit(Xs, Y, p, head_seed);
      return FfnState{std::move(net)};
    }
    case Family::BaselineMean: return MeanState{Y.colwise().mean().transpose()};
    case Family::BaselineNoChange: return NoChangeState{static_cast<int>(Y.cols())};
    case Family::BaselineForecast: return ForecastState{static_cast<int>(spec.get("max_order")), ds.window};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown family");
}

Matrix predict_head(const ModelHead& head, const Matrix& Xs, const Dataset* ds) {
  const auto n = Xs.rows();
  return std::visit(
      [&](const auto& s) -> Matrix {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, RidgeState>) {
          Matrix out = Xs * s.weights;
          out.rowwise() += s.intercept.transpose();
          return out;
        } else if constexpr (std::is_same_v<S, KnnState>) {
          Matrix out(n, s.Y.cols());
          parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
            const auto ri = static_cast<Eigen::Index>(i);
            const auto idx = nearest_rows(s.X, s.region_ids, Xs.row(ri), static_cast<std::size_t>(s.k));
            Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(s.Y.cols());
            for (auto r : idx) acc += s.Y.row(static_cast<Eigen::Index>(r));
            out.row(ri) = acc / static_cast<double>(idx.size());
          });
          return out;
        } else if constexpr (std::is_same_v<S, ForestState>) {
          return predict_forest(s.trees, Xs);
        } else if constexpr (std::is_same_v<S, FfnState>) {
          return s.net.forward(Xs);
        } else if constexpr (std::is_same_v<S, MeanState>) {
          return s.means.transpose().replicate(n, 1);
        } else if constexpr (std::is_same_v<S, NoChangeState>) {
          return Matrix::Zero(n, s.outputs);
        } else {
          if (!ds)
            throw Error(ErrorCode::InvalidArgument,
                        "baseline_forecast needs before-segment histories; predict from a dataset");
          Matrix out(n, 2);
          for (Eigen::Index i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            const auto [d0, d1] = forecast_deltas(ds->histories[k], ds->before_fits[k], s.window, s.max_order);
            out(i, 0) = d0;
            out(i, 1) = d1;
          }
          return out.middleCols(head.first_output, head.outputs);
        }
      },
      head.state);
}

Matrix predict_impl(const TrainedModel& model, const Matrix& X, const Layout& layout, const Dataset* ds) {
  if (layout.fingerprint() != model.fingerprint())
    throw Error(ErrorCode::Layout, "input layout [" + layout.describe() + "] does not match model layout [" +
                                       model.layout.describe() + "]");
  if (static_cast<std::size_t>(X.cols()) != model.layout.dimension())
    throw Error(ErrorCode::Layout, "input width does not match model layout");
  const Matrix Xs = standardize(X, model.column_means, model.column_stds);
  Matrix out(X.rows(), 2);
  for (const auto& head : model.heads) out.middleCols(head.first_output, head.outputs) = predict_head(head, Xs, ds);
  return out;
}

}  // namespace

TrainedModel train(const ModelSpec& spec, const Dataset& dataset) {
  spec.validate();
  dataset.validate();
  if (dataset.rows() == 0) throw Error(ErrorCode::InsufficientData, "training set is empty");
  if (dataset.X.cols() < 1) throw Error(ErrorCode::Dimension, "training set has no features");

  const auto order = canonical_order(dataset);
  const Dataset ds = dataset.subset(order);

  TrainedModel model;
  model.spec = spec;
  model.layout = ds.layout;
  model.column_means = ds.X.colwise().mean().transpose();
  model.column_stds = ((ds.X.rowwise() - model.column_means.transpose()).colwise().squaredNorm() /
                       static_cast<double>(ds.rows()))
                          .cwiseSqrt()
                          .transpose();
  for (Eigen::Index j = 0; j < model.column_stds.size(); ++j)
    if (!(model.column_stds(j) > 0.0)) model.column_stds(j) = 1.0;
  const Matrix Xs = standardize(ds.X, model.column_means, model.column_stds);

  if (spec.per_target) {
    for (int j = 0; j < 2; ++j) {
      const Matrix Y = ds.targets.col(j);
      model.heads.push_back({j, 1, train_head(spec, ds, Xs, Y, splitmix64(spec.seed + static_cast<std::uint64_t>(j)))});
    }
  } else {
    model.heads.push_back({0, 2, train_head(spec, ds, Xs, ds.targets, spec.seed)});
  }
  return model;
}

Matrix predict(const TrainedModel& model, const Dataset& dataset) {
  return predict_impl(model, dataset.X, dataset.layout, &dataset);
}

Matrix predict(const TrainedModel& model, const Matrix& X, const Layout& layout) {
  return predict_impl(model, X, layout, nullptr);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json matrix_json(const Matrix& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error(ErrorCode::Parse, "matrix size mismatch");
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

Vector vector_from(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json state_json(const ModelState& state) {
  return std::visit(
      [](const auto& s) -> json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, RidgeState>) {
          return {{"kind", "ridge"}, {"weights", matrix_json(s.weights)}, {"intercept", to_std(s.intercept)}};
        } else if constexpr (std::is_same_v<S, KnnState>) {
          return {{"kind", "knn"}, {"X", matrix_json(s.X)}, {"Y", matrix_json(s.Y)},
                  {"region_ids", s.region_ids}, {"k", s.k}};
        } else if constexpr (std::is_same_v<S, ForestState>) {
          json trees = json::array();
          for (const auto& t : s.trees) {
            std::vector<int> feature, left, right;
            std::vector<double> threshold, value;
            for (const auto& n : t.nodes) {
              feature.push_back(n.feature);
              left.push_back(n.left);
              right.push_back(n.right);
              threshold.push_back(n.threshold);
              value.insert(value.end(), n.value.begin(), n.value.end());
            }
            trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                             {"right", right}, {"value", value}});
          }
          return {{"kind", "forest"}, {"trees", trees}};
        } else if constexpr (std::is_same_v<S, FfnState>) {
          json layers = json::array();
          for (std::size_t l = 0; l < s.net.weights().size(); ++l) {
            const Eigen::RowVectorXd& b = s.net.biases()[l];
            layers.push_back({{"weights", matrix_json(s.net.weights()[l])},
                              {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
          }
          return {{"kind", "ffn"}, {"layers", layers}};
        } else if constexpr (std::is_same_v<S, MeanState>) {
          return {{"kind", "mean"}, {"means", to_std(s.means)}};
        } else if constexpr (std::is_same_v<S, NoChangeState>) {
          return {{"kind", "no_change"}, {"outputs", s.outputs}};
        } else {
          return {{"kind", "forecast"},
                  {"max_order", s.max_order},
                  {"window", {s.window.half_width, s.window.buffer, s.window.min_points_per_segment}}};
        }
      },
      state);
}

ModelState state_from(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "ridge") return RidgeState{matrix_from(j.at("weights")), vector_from(j.at("intercept"))};
  if (kind == "knn")
    return KnnState{matrix_from(j.at("X")), matrix_from(j.at("Y")),
                    j.at("region_ids").get<std::vector<RegionId>>(), j.at("k").get<int>()};
  if (kind == "forest") {
    ForestState s;
    for (const auto& t : j.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto value = t.at("value").get<std::vector<double>>();
      const std::size_t n = feature.size();
      if (n == 0 || value.size() % n != 0) throw Error(ErrorCode::Parse, "corrupt tree");
      const std::size_t m = value.size() / n;
      Tree tree;
      for (std::size_t i = 0; i < n; ++i) {
        TreeNode node;
        node.feature = feature[i];
        node.left = left[i];
        node.right = right[i];
        node.threshold = threshold[i];
        node.value.assign(value.begin() + static_cast<std::ptrdiff_t>(i * m),
                          value.begin() + static_cast<std::ptrdiff_t>((i + 1) * m));
        tree.nodes.push_back(std::move(node));
      }
      s.trees.push_back(std::move(tree));
    }
    return s;
  }
  if (kind == "ffn") {
    std::vector<Matrix> weights;
    std::vector<Eigen::RowVectorXd> biases;
    for (const auto& layer : j.at("layers")) {
      weights.push_back(matrix_from(layer.at("weights")));
      biases.push_back(vector_from(layer.at("bias")).transpose());
    }
    FfnState s;
    s.net.set_layers(std::move(weights), std::move(biases));
    return s;
  }
  if (kind == "mean") return MeanState{vector_from(j.at("means"))};
  if (kind == "no_change") return NoChangeState{j.at("outputs").get<int>()};
  if (kind == "forecast") {
    const auto w = j.at("window").get<std::vector<int>>();
    if (w.size() != 3) throw Error(ErrorCode::Parse, "corrupt forecast window");
    return ForecastState{j.at("max_order").get<int>(), WindowConfig{w[0], w[1], w[2]}};
  }
  throw Error(ErrorCode::Parse, "unknown model state kind '" + kind + "'");
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path) {
  json j;
  j["format"] = "ruptura-model";
  j["version"] = kModelFormatVersion;
  j["spec"] = {{"family", family_name(model.spec.family)},
               {"hyperparameters", model.spec.hyperparameters},
               {"seed", model.spec.seed},
               {"per_target", model.spec.per_target}};
  json blocks = json::array();
  for (const auto& b : model.layout.blocks)
    blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"length", b.length}});
  j["layout"] = blocks;
  j["fingerprint"] = model.fingerprint();
  j["column_means"] = to_std(model.column_means);
  j["column_stds"] = to_std(model.column_stds);
  json heads = json::array();
  for (const auto& h : model.heads)
    heads.push_back({{"first_output", h.first_output}, {"outputs", h.outputs}, {"state", state_json(h.state)}});
  j["heads"] = heads;
  if (ends_with(path, ".json")) {
    csv::write_file(path, j.dump(1) + "\n");
  } else {
    const auto bytes = json::to_cbor(j);
    csv::write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
}

TrainedModel load_model(const std::string& path) {
  const std::string raw = csv::read_file(path);
  json j;
  try {
    if (!raw.empty() && (raw.front() == '{' || raw.front() == ' ' || raw.front() == '\n')) {
      j = json::parse(raw);
    } else {
      j = json::from_cbor(std::vector<std::uint8_t>(raw.begin(), raw.end()));
    }
    if (j.at("format").get<std::string>() != "ruptura-model")
      throw Error(ErrorCode::Parse, path + ": not a model file");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw Error(ErrorCode::Parse, path + ": unsupported model version " + std::to_string(j.at("version").get<int>()));
    TrainedModel m;
    const auto& spec = j.at("spec");
    m.spec.family = parse_family(spec.at("family").get<std::string>());
    m.spec.hyperparameters = spec.at("hyperparameters").get<std::map<std::string, double>>();
    m.spec.seed = spec.at("seed").get<std::uint64_t>();
    m.spec.per_target = spec.at("per_target").get<bool>();
    for (const auto& b : j.at("layout"))
      m.layout.blocks.push_back({b.at("name").get<std::string>(), b.at("offset").get<std::size_t>(),
                                 b.at("length").get<std::size_t>()});
    if (m.layout.fingerprint() != j.at("fingerprint").get<std::uint64_t>())
      throw Error(ErrorCode::Parse, path + ": layout fingerprint does not match stored value");
    m.column_means = vector_from(j.at("column_means"));
    m.column_stds = vector_from(j.at("column_stds"));
    for (const auto& h : j.at("heads"))
      m.heads.push_back({h.at("first_output").get<int>(), h.at("outputs").get<int>(), state_from(h.at("state"))});
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
}

}  // namespace ruptura
