#include "ruptura/feature_builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "ruptura/csv.hpp"
#include "ruptura/error.hpp"

namespace ruptura {

void FeatureSetSpec::validate() const {
  if (!(use_P || use_RC || use_cov || use_exog))
    throw Error(ErrorCode::Config, "feature set must enable at least one of P, RC, cov, exog");
}

FeatureSetSpec FeatureSetSpec::parse(const std::string& list) {
  FeatureSetSpec spec;
  for (auto token : csv::split(list, ',')) {
    token.erase(std::remove_if(token.begin(), token.end(), ::isspace), token.end());
    if (token.empty()) continue;
    if (token == "P") spec.use_P = true;
    else if (token == "RC") spec.use_RC = true;
    else if (token == "cov") spec.use_cov = true;
    else if (token == "exog") spec.use_exog = true;
    else throw Error(ErrorCode::Config, "unknown feature block '" + token + "'");
  }
  spec.validate();
  return spec;
}

std::string FeatureSetSpec::to_string() const {
  std::vector<std::string> parts;
  if (use_P) parts.push_back("P");
  if (use_RC) parts.push_back("RC");
  if (use_cov) parts.push_back("cov");
  if (use_exog) parts.push_back("exog");
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

std::size_t Layout::dimension() const {
  std::size_t d = 0;
  for (const auto& b : blocks) d += b.length;
  return d;
}

const Block* Layout::find(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}

std::uint64_t Layout::fingerprint() const {
  // FNV-1a over the textual description
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : describe()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Layout::describe() const {
  std::string out;
  for (const auto& b : blocks)
    out += b.name + ':' + std::to_string(b.offset) + ':' + std::to_string(b.length) + '|';
  return out;
}

Layout feature_layout(const FeatureSetSpec& spec, const WindowConfig& config,
                      std::size_t embedding_dim) {
  spec.validate();
  const auto p_len = static_cast<std::size_t>(config.before_length());
  Layout layout;
  std::size_t offset = 0;
  auto add = [&](const char* name, std::size_t len) {
    layout.blocks.push_back({name, offset, len});
    offset += len;
  };
  if (spec.use_P) add("P", p_len);
  if (spec.use_RC) add("RC", 2);
  if (spec.use_cov) add("cov", p_len + 2);
  if (spec.use_exog) add("exog", embedding_dim);
  return layout;
}

std::span<const double> FeatureVector::block(const std::string& name) const {
  const Block* b = layout.find(name);
  if (!b) throw Error(ErrorCode::Layout, "no block named '" + name + "'");
  return std::span<const double>(x).subspan(b->offset, b->length);
}

FeatureVector build_features(const DiscontinuityOutcome& outcome, const EpisodeWindow& window,
                             const DiscontinuityOutcome* cov_outcome,
                             const EpisodeWindow* cov_window,
                             std::optional<std::span<const double>> embedding,
                             const FeatureSetSpec& spec) {
  spec.validate();
  if (spec.use_exog && !embedding)
    throw Error(ErrorCode::MissingExog, "region " + outcome.region_id + ": no embedding");
  if (spec.use_cov && (!cov_outcome || !cov_window))
    throw Error(ErrorCode::MissingCovariate, "region " + outcome.region_id + ": no covariate window");
  if (spec.use_P && !window.before_complete())
    throw InsufficientDataError(Segment::Before,
                                "region " + outcome.region_id + ": incomplete before segment for P");
  if (spec.use_cov && !cov_window->before_complete())
    throw InsufficientDataError(Segment::Before, "region " + outcome.region_id +
                                                     ": incomplete covariate before segment");

  FeatureVector fv;
  fv.region_id = outcome.region_id;
  fv.layout = feature_layout(spec, window.config, embedding ? embedding->size() : 0);
  fv.x.reserve(fv.layout.dimension());
  if (spec.use_P)
    for (const auto& p : window.before) fv.x.push_back(p.y);
  if (spec.use_RC) {
    fv.x.push_back(outcome.before_fit.beta0);
    fv.x.push_back(outcome.before_fit.beta1);
  }
  if (spec.use_cov) {
    for (const auto& p : cov_window->before) fv.x.push_back(p.y);
    fv.x.push_back(cov_outcome->before_fit.beta0);
    fv.x.push_back(cov_outcome->before_fit.beta1);
  }
  if (spec.use_exog) fv.x.insert(fv.x.end(), embedding->begin(), embedding->end());
  return fv;
}

void Dataset::validate() const {
  const auto n = X.rows();
  if (targets.rows() != n || targets.cols() != 2 || static_cast<Eigen::Index>(region_ids.size()) != n ||
      static_cast<Eigen::Index>(histories.size()) != n ||
      static_cast<Eigen::Index>(before_fits.size()) != n ||
      static_cast<Eigen::Index>(event_types.size()) != n)
    throw Error(ErrorCode::Dimension, "dataset row counts disagree");
  if (static_cast<std::size_t>(X.cols()) != layout.dimension())
    throw Error(ErrorCode::Dimension, "dataset width does not match its layout");
  if (!X.allFinite() || !targets.allFinite())
    throw Error(ErrorCode::Validation, "dataset contains non-finite entries");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.spec = spec;
  out.layout = layout;
  out.window = window;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(r);
    out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(r);
    out.region_ids.push_back(region_ids[rows[i]]);
    out.event_types.push_back(event_types[rows[i]]);
    out.histories.push_back(histories[rows[i]]);
    out.before_fits.push_back(before_fits[rows[i]]);
  }
  return out;
}

AssembleResult assemble_dataset(std::span<const DiscontinuityOutcome> outcomes,
                                std::span<const EpisodeWindow> windows,
                                std::span<const DiscontinuityOutcome> cov_outcomes,
                                std::span<const EpisodeWindow> cov_windows,
                                const EmbeddingTable* embeddings, const FeatureSetSpec& spec) {
  spec.validate();
  if (outcomes.size() != windows.size())
    throw Error(ErrorCode::InvalidArgument, "outcomes and windows differ in length");
  if (cov_outcomes.size() != cov_windows.size())
    throw Error(ErrorCode::InvalidArgument, "covariate outcomes and windows differ in length");

  std::map<RegionId, std::size_t> cov_index;
  for (std::size_t i = 0; i < cov_outcomes.size(); ++i) cov_index.emplace(cov_outcomes[i].region_id, i);

  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (outcomes[a].region_id != outcomes[b].region_id)
      return outcomes[a].region_id < outcomes[b].region_id;
    return outcomes[a].event_type < outcomes[b].event_type;
  });

  AssembleResult result;
  std::vector<FeatureVector> rows;
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const auto& outcome = outcomes[i];
    const DiscontinuityOutcome* cov_o = nullptr;
    const EpisodeWindow* cov_w = nullptr;
    if (auto it = cov_index.find(outcome.region_id); it != cov_index.end()) {
      cov_o = &cov_outcomes[it->second];
      cov_w = &cov_windows[it->second];
    }
    std::optional<std::span<const double>> emb;
    if (embeddings) {
      if (const auto* v = embeddings->find(outcome.region_id)) emb = std::span<const double>(*v);
    }
    try {
      rows.push_back(build_features(outcome, windows[i], cov_o, cov_w, emb, spec));
      kept.push_back(i);
    } catch (const Error& e) {
      result.skipped.push_back({outcome.region_id, e.what()});
    }
  }
  if (rows.empty()) throw Error(ErrorCode::InsufficientData, "dataset assembly produced no rows");

  auto& ds = result.dataset;
  ds.spec = spec;
  ds.window = windows[kept.front()].config;
  ds.layout = feature_layout(spec, ds.window, embeddings ? embeddings->dimension : 0);
  const auto d = static_cast<Eigen::Index>(ds.layout.dimension());
  ds.X.resize(static_cast<Eigen::Index>(rows.size()), d);
  ds.targets.resize(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!(rows[r].layout == ds.layout))
      throw Error(ErrorCode::Layout, "region " + rows[r].region_id + ": layout differs from dataset");
    const auto& outcome = outcomes[kept[r]];
    const auto ri = static_cast<Eigen::Index>(r);
    ds.X.row(ri) = Eigen::Map<const Eigen::RowVectorXd>(rows[r].x.data(), d);
    ds.targets(ri, 0) = outcome.delta0;
    ds.targets(ri, 1) = outcome.delta1;
    ds.region_ids.push_back(outcome.region_id);
    ds.event_types.push_back(outcome.event_type);
    ds.histories.push_back(windows[kept[r]].before);
    ds.before_fits.push_back(outcome.before_fit);
  }
  ds.validate();
  return result;
}

std::string dataset_to_csv(const Dataset& ds) {
  std::string out = "region_id,event_type,delta0,delta1,before_beta0,before_beta1,history";
  for (Eigen::Index j = 0; j < ds.X.cols(); ++j) out += ",x_" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const auto ri = static_cast<Eigen::Index>(i);
    out += ds.region_ids[i] + ',' + ds.event_types[i] + ',' + csv::format(ds.targets(ri, 0)) + ',' +
           csv::format(ds.targets(ri, 1)) + ',' + csv::format(ds.before_fits[i].beta0) + ',' +
           csv::format(ds.before_fits[i].beta1) + ',';
    for (std::size_t k = 0; k < ds.histories[i].size(); ++k) {
      if (k) out += ';';
      out += std::to_string(ds.histories[i][k].t) + ':' + csv::format(ds.histories[i][k].y);
    }
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) out += ',' + csv::format(ds.X(ri, j));
    out += '\n';
  }
  return out;
}

std::string dataset_layout_json(const Dataset& ds) {
  nlohmann::json j;
  j["features"] = ds.spec.to_string();
  j["window"] = {{"half_width", ds.window.half_width},
                 {"buffer", ds.window.buffer},
                 {"min_points_per_segment", ds.window.min_points_per_segment}};
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : ds.layout.blocks)
    j["blocks"].push_back({{"name", b.name}, {"offset", b.offset}, {"length", b.length}});
  j["dimension"] = ds.layout.dimension();
  j["fingerprint"] = ds.layout.fingerprint();
  j["rows"] = ds.rows();
  return j.dump(2) + "\n";
}

Dataset dataset_from_files(const std::string& csv_path, const std::string& layout_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_file(layout_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, layout_path + ": " + e.what());
  }
  Dataset ds;
  try {
    ds.spec = FeatureSetSpec::parse(j.at("features").get<std::string>());
    ds.window.half_width = j.at("window").at("half_width").get<int>();
    ds.window.buffer = j.at("window").at("buffer").get<int>();
    ds.window.min_points_per_segment = j.at("window").at("min_points_per_segment").get<int>();
    for (const auto& b : j.at("blocks"))
      ds.layout.blocks.push_back(
          {b.at("name").get<std::string>(), b.at("offset").get<std::size_t>(), b.at("length").get<std::size_t>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, layout_path + ": " + e.what());
  }
  ds.window.validate();

  const auto table = csv::read(csv_path);
  const auto d = ds.layout.dimension();
  const auto c_region = table.column("region_id");
  const auto c_type = table.column("event_type");
  const auto c_d0 = table.column("delta0");
  const auto c_d1 = table.column("delta1");
  const auto c_b0 = table.column("before_beta0");
  const auto c_b1 = table.column("before_beta1");
  const auto c_hist = table.column("history");
  std::vector<std::size_t> c_x;
  for (std::size_t k = 0; k < d; ++k) c_x.push_back(table.column("x_" + std::to_string(k)));

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  ds.X.resize(n, static_cast<Eigen::Index>(d));
  ds.targets.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    if (row.fields.size() != table.header.size())
      throw Error(ErrorCode::Parse, "line " + std::to_string(row.line) + ": wrong field count");
    ds.region_ids.push_back(row.fields[c_region]);
    ds.event_types.push_back(row.fields[c_type]);
    ds.targets(i, 0) = csv::to_double(row.fields[c_d0], row.line, "delta0");
    ds.targets(i, 1) = csv::to_double(row.fields[c_d1], row.line, "delta1");
    LineFit fit;
    fit.beta0 = csv::to_double(row.fields[c_b0], row.line, "before_beta0");
    fit.beta1 = csv::to_double(row.fields[c_b1], row.line, "before_beta1");
    std::vector<Point> hist;
    if (!row.fields[c_hist].empty()) {
      for (const auto& item : csv::split(row.fields[c_hist], ';')) {
        const auto parts = csv::split(item, ':');
        if (parts.size() != 2)
          throw Error(ErrorCode::Parse, "line " + std::to_string(row.line) + ": bad history entry");
        hist.push_back({static_cast<int>(csv::to_int(parts[0], row.line, "history")),
                        csv::to_double(parts[1], row.line, "history")});
      }
    }
    fit.n = static_cast<int>(hist.size());
    ds.before_fits.push_back(fit);
    ds.histories.push_back(std::move(hist));
    for (std::size_t k = 0; k < d; ++k)
      ds.X(i, static_cast<Eigen::Index>(k)) = csv::to_double(row.fields[c_x[k]], row.line, "x");
  }
  ds.validate();
  return ds;
}

}  // namespace ruptura
