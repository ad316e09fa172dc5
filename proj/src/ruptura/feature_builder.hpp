#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ruptura/panel_store.hpp"
#include "ruptura/rdd_estimator.hpp"

namespace ruptura {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Which predictor blocks to include. Blocks are always laid out in the
// order P, RC, cov, exog.
struct FeatureSetSpec {
  bool use_P = false;
  bool use_RC = false;
  bool use_cov = false;
  bool use_exog = false;

  bool operator==(const FeatureSetSpec&) const = default;
  void validate() const;

  // Parses "P,RC,cov,exog" (any subset, any order, case-sensitive tokens).
  static FeatureSetSpec parse(const std::string& list);
  std::string to_string() const;
};

struct Block {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const Block&) const = default;
};

struct Layout {
  std::vector<Block> blocks;

  bool operator==(const Layout&) const = default;
  std::size_t dimension() const;
  const Block* find(const std::string& name) const;
  // Stable 64-bit digest of the block list.
  std::uint64_t fingerprint() const;
  std::string describe() const;
};

// Expected layout for a window configuration and embedding dimension.
Layout feature_layout(const FeatureSetSpec& spec, const WindowConfig& config,
                      std::size_t embedding_dim);

struct FeatureVector {
  RegionId region_id;
  std::vector<double> x;
  Layout layout;

  std::span<const double> block(const std::string& name) const;
};

FeatureVector build_features(const DiscontinuityOutcome& outcome, const EpisodeWindow& window,
                             const DiscontinuityOutcome* cov_outcome,
                             const EpisodeWindow* cov_window,
                             std::optional<std::span<const double>> embedding,
                             const FeatureSetSpec& spec);

struct Dataset {
  Matrix X;        // n x d
  Matrix targets;  // n x 2, columns (delta0, delta1)
  std::vector<RegionId> region_ids;
  std::vector<std::string> event_types;
  FeatureSetSpec spec;
  Layout layout;
  WindowConfig window;
  // Raw before segment and its fit per row; used by the forecasting baseline.
  std::vector<std::vector<Point>> histories;
  std::vector<LineFit> before_fits;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct AssembleResult {
  Dataset dataset;
  std::vector<SkippedEpisode> skipped;
};

// Inputs are aligned by region_id; covariate outcomes/windows may be absent
// for some regions. Rows come out sorted by (region_id, event_type).
AssembleResult assemble_dataset(std::span<const DiscontinuityOutcome> outcomes,
                                std::span<const EpisodeWindow> windows,
                                std::span<const DiscontinuityOutcome> cov_outcomes,
                                std::span<const EpisodeWindow> cov_windows,
                                const EmbeddingTable* embeddings, const FeatureSetSpec& spec);

// Dataset CSV (region_id,event_type,delta0,delta1,before_beta0,before_beta1,
// history,x_0..) plus a JSON layout sidecar.
std::string dataset_to_csv(const Dataset& ds);
std::string dataset_layout_json(const Dataset& ds);
Dataset dataset_from_files(const std::string& csv_path, const std::string& layout_path);

}  // namespace ruptura
