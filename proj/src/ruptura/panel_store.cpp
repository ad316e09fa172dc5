#include "ruptura/panel_store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "ruptura/csv.hpp"
#include "ruptura/error.hpp"

namespace ruptura {

const std::vector<Observation>* Panel::find(const RegionId& id) const {
  auto it = regions.find(id);
  return it == regions.end() ? nullptr : &it->second;
}

std::size_t Panel::observation_count() const {
  std::size_t n = 0;
  for (const auto& [id, obs] : regions) n += obs.size();
  return n;
}

void Panel::validate() const {
  for (const auto& [id, obs] : regions) {
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (!std::isfinite(obs[i].score))
        throw Error(ErrorCode::Validation, "region " + id + ": non-finite score");
      if (obs[i].n_users < 0)
        throw Error(ErrorCode::Validation, "region " + id + ": negative n_users");
      if (i > 0 && obs[i].week <= obs[i - 1].week)
        throw Error(ErrorCode::Validation, "region " + id + ": weeks not strictly increasing");
    }
  }
}

std::optional<int> EventTable::find(const RegionId& region, const std::string& event_type) const {
  auto it = entries.find({region, event_type});
  if (it == entries.end()) return std::nullopt;
  return it->second;
}

std::map<RegionId, int> EventTable::of_type(const std::string& event_type) const {
  std::map<RegionId, int> out;
  for (const auto& [key, week] : entries) {
    if (key.second == event_type) out.emplace(key.first, week);
  }
  return out;
}

void RegionMeta::validate() const {
  if (!(population > 0.0))
    throw Error(ErrorCode::Validation, "region " + region_id + ": population must be > 0");
  if (!(area_sq_miles > 0.0))
    throw Error(ErrorCode::Validation, "region " + region_id + ": area_sq_miles must be > 0");
  if (adjacent_regions.count(region_id))
    throw Error(ErrorCode::Validation, "region " + region_id + " lists itself as adjacent");
}

const std::vector<double>* EmbeddingTable::find(const RegionId& id) const {
  auto it = vectors.find(id);
  return it == vectors.end() ? nullptr : &it->second;
}

namespace {

std::chrono::sys_days parse_iso_date(const std::string& s) {
  using namespace std::chrono;
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(s);
  in >> y >> dash1 >> m >> dash2 >> d;
  if (!in || dash1 != '-' || dash2 != '-' || in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::Parse, "not an ISO date: '" + s + "'");
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::Parse, "invalid calendar date: '" + s + "'");
  return sys_days{ymd};
}

int parse_week(const std::string& field, std::size_t line, std::string_view column,
               const std::optional<std::string>& epoch) {
  if (epoch) {
    try {
      return week_index_from_date(field, *epoch);
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ": " + e.what());
    }
  }
  return static_cast<int>(csv::to_int(field, line, column));
}

void check_width(const csv::Row& row, std::size_t width) {
  if (row.fields.size() != width)
    throw Error(ErrorCode::Parse, "line " + std::to_string(row.line) + ": expected " +
                                      std::to_string(width) + " fields, found " +
                                      std::to_string(row.fields.size()));
}

// Columns named prefix0, prefix1, ... in header order.
std::vector<std::size_t> indexed_columns(const csv::Table& table, const std::string& prefix) {
  std::vector<std::size_t> cols;
  for (std::size_t k = 0;; ++k) {
    auto idx = table.find_column(prefix + std::to_string(k));
    if (!idx) break;
    cols.push_back(*idx);
  }
  return cols;
}

Panel panel_from_table(const csv::Table& table, const std::string& score_name,
                       const std::optional<std::string>& epoch) {
  const auto c_region = table.column("region_id");
  const auto c_week = table.column("week_index");
  const auto c_score = table.column("score");
  const auto c_users = table.column("n_users");
  Panel panel;
  panel.score_name = score_name;
  std::map<std::pair<RegionId, int>, std::size_t> seen;
  for (const auto& row : table.rows) {
    check_width(row, table.header.size());
    Observation obs;
    const RegionId& region = row.fields[c_region];
    if (region.empty())
      throw Error(ErrorCode::Parse, "line " + std::to_string(row.line) + ": empty region_id");
    obs.week = parse_week(row.fields[c_week], row.line, "week_index", epoch);
    obs.score = csv::to_double(row.fields[c_score], row.line, "score");
    obs.n_users = csv::to_int(row.fields[c_users], row.line, "n_users");
    if (obs.n_users < 0)
      throw Error(ErrorCode::Parse, "line " + std::to_string(row.line) + ": negative n_users");
    auto [it, inserted] = seen.emplace(std::make_pair(region, obs.week), row.line);
    if (!inserted)
      throw Error(ErrorCode::Parse, "line " + std::to_string(row.line) + ": duplicate (" + region +
                                        ", " + std::to_string(obs.week) + "), first seen on line " +
                                        std::to_string(it->second));
    panel.regions[region].push_back(obs);
  }
  for (auto& [id, obs] : panel.regions) {
    std::sort(obs.begin(), obs.end(),
              [](const Observation& a, const Observation& b) { return a.week < b.week; });
  }
  return panel;
}

}  // namespace

int week_index_from_date(const std::string& iso_date, const std::string& epoch) {
  using namespace std::chrono;
  const sys_days epoch_day = parse_iso_date(epoch);
  const sys_days epoch_monday = epoch_day - (weekday{epoch_day} - Monday);
  const auto days = (parse_iso_date(iso_date) - epoch_monday).count();
  // floor division so dates before the epoch map to negative weeks
  return static_cast<int>(days >= 0 ? days / 7 : -((-days + 6) / 7));
}

Panel parse_panel(const std::string& text, const std::string& score_name,
                  const std::optional<std::string>& epoch_date) {
  return panel_from_table(csv::parse(text, "<panel>"), score_name, epoch_date);
}

Panel load_panel(const std::string& path, const std::string& score_name,
                 const std::optional<std::string>& epoch_date) {
  return panel_from_table(csv::read(path), score_name, epoch_date);
}

EventTable load_events(const std::string& path, const std::optional<std::string>& epoch_date) {
  const auto table = csv::read(path);
  const auto c_region = table.column("region_id");
  const auto c_type = table.column("event_type");
  const auto c_week = table.column("event_week");
  EventTable events;
  for (const auto& row : table.rows) {
    check_width(row, table.header.size());
    const int week = parse_week(row.fields[c_week], row.line, "event_week", epoch_date);
    auto key = std::make_pair(row.fields[c_region], row.fields[c_type]);
    if (!events.entries.emplace(key, week).second)
      throw Error(ErrorCode::Parse, "line " + std::to_string(row.line) + ": duplicate event (" +
                                        key.first + ", " + key.second + ")");
  }
  return events;
}

MetaTable load_region_meta(const std::string& path) {
  const auto table = csv::read(path);
  const auto c_region = table.column("region_id");
  const auto c_edu = table.column("education");
  const auto c_inc = table.column("income");
  const auto c_pop = table.column("population");
  const auto c_area = table.column("area_sq_miles");
  const auto c_lat = table.column("latitude");
  const auto c_lon = table.column("longitude");
  const auto c_adj = table.column("adjacent");
  const auto c_socio = indexed_columns(table, "sociodem_");
  MetaTable meta;
  for (const auto& row : table.rows) {
    check_width(row, table.header.size());
    RegionMeta m;
    m.region_id = row.fields[c_region];
    m.education = csv::to_double(row.fields[c_edu], row.line, "education");
    m.income = csv::to_double(row.fields[c_inc], row.line, "income");
    m.population = csv::to_double(row.fields[c_pop], row.line, "population");
    m.area_sq_miles = csv::to_double(row.fields[c_area], row.line, "area_sq_miles");
    m.latitude = csv::to_double(row.fields[c_lat], row.line, "latitude");
    m.longitude = csv::to_double(row.fields[c_lon], row.line, "longitude");
    if (!row.fields[c_adj].empty()) {
      for (auto& id : csv::split(row.fields[c_adj], ';')) {
        if (!id.empty()) m.adjacent_regions.insert(id);
      }
    }
    for (std::size_t k = 0; k < c_socio.size(); ++k) {
      m.sociodemographics.push_back(
          csv::to_double(row.fields[c_socio[k]], row.line, "sociodem_" + std::to_string(k)));
    }
    try {
      m.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::Validation, "line " + std::to_string(row.line) + ": " + e.what());
    }
    if (meta.count(m.region_id))
      throw Error(ErrorCode::Parse,
                  "line " + std::to_string(row.line) + ": duplicate region " + m.region_id);
    meta.emplace(m.region_id, std::move(m));
  }
  return meta;
}

EmbeddingTable load_embeddings(const std::string& path) {
  const auto table = csv::read(path);
  const auto c_region = table.column("region_id");
  const auto c_dims = indexed_columns(table, "e_");
  if (c_dims.empty()) throw Error(ErrorCode::Parse, path + ": no e_0.. columns");
  EmbeddingTable out;
  out.dimension = c_dims.size();
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size())
      throw Error(ErrorCode::Dimension,
                  "line " + std::to_string(row.line) + ": embedding has " +
                      std::to_string(row.fields.size() - 1) + " entries, expected " +
                      std::to_string(out.dimension));
    std::vector<double> v(out.dimension);
    for (std::size_t k = 0; k < c_dims.size(); ++k)
      v[k] = csv::to_double(row.fields[c_dims[k]], row.line, "e_" + std::to_string(k));
    if (!out.vectors.emplace(row.fields[c_region], std::move(v)).second)
      throw Error(ErrorCode::Parse, "line " + std::to_string(row.line) + ": duplicate region " +
                                        row.fields[c_region]);
  }
  return out;
}

std::string panel_to_csv(const Panel& panel) {
  std::string out = "region_id,week_index,score,n_users\n";
  for (const auto& [id, obs] : panel.regions) {
    for (const auto& o : obs) {
      out += id + ',' + std::to_string(o.week) + ',' + csv::format(o.score) + ',' +
             std::to_string(o.n_users) + '\n';
    }
  }
  return out;
}

std::string events_to_csv(const EventTable& events) {
  std::string out = "region_id,event_type,event_week\n";
  for (const auto& [key, week] : events.entries)
    out += key.first + ',' + key.second + ',' + std::to_string(week) + '\n';
  return out;
}

std::string meta_to_csv(const MetaTable& meta) {
  std::size_t ds = 0;
  for (const auto& [id, m] : meta) ds = std::max(ds, m.sociodemographics.size());
  std::string out = "region_id,education,income,population,area_sq_miles,latitude,longitude,adjacent";
  for (std::size_t k = 0; k < ds; ++k) out += ",sociodem_" + std::to_string(k);
  out += '\n';
  for (const auto& [id, m] : meta) {
    out += id + ',' + csv::format(m.education) + ',' + csv::format(m.income) + ',' +
           csv::format(m.population) + ',' + csv::format(m.area_sq_miles) + ',' +
           csv::format(m.latitude) + ',' + csv::format(m.longitude) + ',';
    bool first = true;
    for (const auto& adj : m.adjacent_regions) {
      if (!first) out += ';';
      out += adj;
      first = false;
    }
    for (std::size_t k = 0; k < ds; ++k)
      out += ',' + csv::format(k < m.sociodemographics.size() ? m.sociodemographics[k] : 0.0);
    out += '\n';
  }
  return out;
}

std::string embeddings_to_csv(const EmbeddingTable& table) {
  std::string out = "region_id";
  for (std::size_t k = 0; k < table.dimension; ++k) out += ",e_" + std::to_string(k);
  out += '\n';
  for (const auto& [id, v] : table.vectors) {
    out += id;
    for (double x : v) out += ',' + csv::format(x);
    out += '\n';
  }
  return out;
}

Panel filter_reliability(const Panel& panel, std::int64_t min_users) {
  if (min_users < 0) throw Error(ErrorCode::InvalidArgument, "min_users must be >= 0");
  Panel out;
  out.score_name = panel.score_name;
  out.transform_log = panel.transform_log;
  for (const auto& [id, obs] : panel.regions) {
    std::vector<Observation> kept;
    std::copy_if(obs.begin(), obs.end(), std::back_inserter(kept),
                 [&](const Observation& o) { return o.n_users >= min_users; });
    if (!kept.empty()) out.regions.emplace(id, std::move(kept));
  }
  out.transform_log.push_back("filter_reliability(min_users=" + std::to_string(min_users) + ")");
  return out;
}

Panel zscore_per_region(const Panel& panel, std::vector<RegionId>* dropped) {
  Panel out;
  out.score_name = panel.score_name;
  out.transform_log = panel.transform_log;
  for (const auto& [id, obs] : panel.regions) {
    const double n = static_cast<double>(obs.size());
    double mean = 0.0;
    for (const auto& o : obs) mean += o.score;
    mean /= n;
    double ss = 0.0;
    for (const auto& o : obs) ss += (o.score - mean) * (o.score - mean);
    const double sd = std::sqrt(ss / n);
    if (obs.size() < 2 || !(sd > 0.0)) {
      log_warning("zscore: dropping region " + id + " (zero variance)");
      if (dropped) dropped->push_back(id);
      continue;
    }
    std::vector<Observation> z = obs;
    for (auto& o : z) o.score = (o.score - mean) / sd;
    out.regions.emplace(id, std::move(z));
  }
  out.transform_log.push_back("zscore_per_region");
  return out;
}

Panel difference(const Panel& panel, int lag) {
  if (lag < 1) throw Error(ErrorCode::InvalidArgument, "difference lag must be >= 1");
  Panel out;
  out.score_name = panel.score_name;
  out.transform_log = panel.transform_log;
  for (const auto& [id, obs] : panel.regions) {
    std::map<int, double> by_week;
    for (const auto& o : obs) by_week.emplace(o.week, o.score);
    std::vector<Observation> diffed;
    for (const auto& o : obs) {
      auto partner = by_week.find(o.week - lag);
      if (partner == by_week.end()) continue;
      diffed.push_back({o.week, o.score - partner->second, o.n_users});
    }
    // regions with no lag partners are kept as empty series
    out.regions.emplace(id, std::move(diffed));
  }
  out.transform_log.push_back("difference(lag=" + std::to_string(lag) + ")");
  return out;
}

}  // namespace ruptura
