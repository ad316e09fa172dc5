#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ruptura {

using RegionId = std::string;

struct Observation {
  int week = 0;
  double score = 0.0;
  std::int64_t n_users = 0;

  bool operator==(const Observation&) const = default;
};

// Region-week panel for one score. Weeks are strictly increasing within a
// region; missing weeks are simply absent.
struct Panel {
  std::map<RegionId, std::vector<Observation>> regions;
  std::string score_name;
  std::vector<std::string> transform_log;

  bool operator==(const Panel&) const = default;

  const std::vector<Observation>* find(const RegionId& id) const;
  std::size_t observation_count() const;
  // Throws Validation if any invariant is broken.
  void validate() const;
};

struct EventTable {
  std::map<std::pair<RegionId, std::string>, int> entries;

  bool operator==(const EventTable&) const = default;

  std::optional<int> find(const RegionId& region, const std::string& event_type) const;
  // Events of one type, keyed by region.
  std::map<RegionId, int> of_type(const std::string& event_type) const;
};

struct RegionMeta {
  RegionId region_id;
  double education = 0.0;
  double income = 0.0;
  double population = 1.0;
  double area_sq_miles = 1.0;
  double latitude = 0.0;
  double longitude = 0.0;
  std::set<RegionId> adjacent_regions;
  std::vector<double> sociodemographics;

  bool operator==(const RegionMeta&) const = default;
  void validate() const;
};

using MetaTable = std::map<RegionId, RegionMeta>;

struct EmbeddingTable {
  std::size_t dimension = 0;
  std::map<RegionId, std::vector<double>> vectors;

  bool operator==(const EmbeddingTable&) const = default;
  const std::vector<double>* find(const RegionId& id) const;
};

// Weeks since the Monday on or before `epoch` (both ISO yyyy-mm-dd).
int week_index_from_date(const std::string& iso_date, const std::string& epoch);

// When epoch_date is set, week fields are ISO dates converted via
// week_index_from_date; otherwise they are integers.
Panel load_panel(const std::string& path, const std::string& score_name,
                 const std::optional<std::string>& epoch_date = std::nullopt);
EventTable load_events(const std::string& path,
                       const std::optional<std::string>& epoch_date = std::nullopt);
MetaTable load_region_meta(const std::string& path);
EmbeddingTable load_embeddings(const std::string& path);

Panel parse_panel(const std::string& text, const std::string& score_name,
                  const std::optional<std::string>& epoch_date = std::nullopt);

std::string panel_to_csv(const Panel& panel);
std::string events_to_csv(const EventTable& events);
std::string meta_to_csv(const MetaTable& meta);
std::string embeddings_to_csv(const EmbeddingTable& table);

Panel filter_reliability(const Panel& panel, std::int64_t min_users);

// Regions with zero variance (or fewer than two observations) are dropped
// and reported through `dropped` and a warning.
Panel zscore_per_region(const Panel& panel, std::vector<RegionId>* dropped = nullptr);

Panel difference(const Panel& panel, int lag);

}  // namespace ruptura
