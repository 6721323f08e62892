#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dfl {

/// One learning problem: features x (n×p), labels y in {0,1} or real,
/// sensitive attribute s in {0,1}. All ingestion paths guarantee finite
/// entries and matching leading dimensions.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd labels;
  Eigen::VectorXd sensitive;
  std::vector<std::string> feature_names;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index p() const { return features.cols(); }

  /// Throws DimensionError / SchemaError when an invariant is broken.
  void validate() const;
};

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
  uint64_t seed = 0;
  int trial_id = 0;
};

/// How a raw column becomes the binary sensitive attribute or label.
enum class ColumnRule {
  binary,         // must already be 0/1
  greater_than,   // 1 iff value > threshold
  less_than,      // 1 iff value < threshold
  above_median,   // 1 iff value > median of the kept rows
  as_is,          // keep the raw value (labels only)
};

struct CsvSchema {
  std::string name;  // preset name, informational
  std::string label_column;
  std::string sensitive_column;
  // Empty feature list means "every other column not listed in drop_columns".
  std::vector<std::string> feature_columns;
  std::vector<std::string> drop_columns;
  ColumnRule sensitive_rule = ColumnRule::binary;
  double sensitive_threshold = 0.0;
  ColumnRule label_rule = ColumnRule::as_is;
  double label_threshold = 0.0;
};

/// Shipped presets mirroring the published preprocessing conventions for the
/// three reference datasets. schema_by_name accepts "community-crime",
/// "compas", "credit-card".
CsvSchema community_crime_schema();
CsvSchema compas_schema();
CsvSchema credit_card_schema();
CsvSchema schema_by_name(const std::string& name);

struct LoadReport {
  Dataset dataset;
  std::size_t rows_dropped = 0;  // rows removed by the missing-data policy
};

/// Reads a header-row CSV (comma separated, UTF-8). Rows with a missing or
/// non-numeric value in any selected column are dropped and counted. A row
/// whose field count differs from the header is malformed and raises
/// ParseError carrying the 1-based line number.
LoadReport load_csv(const std::string& path, const CsvSchema& schema);

/// Deterministic shuffle split: |train| = round(frac*n). The permutation
/// depends only on (seed, n); trial_id is carried as metadata for file
/// naming. Throws SplitError when either side would be empty.
SplitIndices split(Eigen::Index n, double frac, uint64_t seed,
                   int trial_id = 0);

/// Persist the train indices (ascending, one per line) as
/// `<dir>/trial_<id>_seed_<seed>.idx`; returns the path written.
std::string write_split(const std::string& dir, const SplitIndices& split);

/// Read a persisted index file back (train side only).
std::vector<Eigen::Index> read_split_file(const std::string& path);

struct StandardizeStats {
  Eigen::VectorXd mean;   // per feature, from the train rows only
  Eigen::VectorXd scale;  // population std; 1 for zero-variance columns
};

struct StandardizeResult {
  Dataset dataset;  // every row transformed with the train statistics
  StandardizeStats stats;
};

StandardizeResult standardize(const Dataset& ds,
                              const std::vector<Eigen::Index>& train);

/// Apply previously computed statistics to new feature rows.
Eigen::MatrixXd apply_standardize(const Eigen::MatrixXd& x,
                                  const StandardizeStats& stats);

/// Synthetic two-group data with tunable group leakage. s ~ Bernoulli(1/2);
/// x = z + bias*s*u for a fixed unit direction u and z ~ N(0, I); y is a
/// thresholded noisy linear function of x whose correlation with s grows
/// with bias. Deterministic per seed.
Dataset synth_biased(Eigen::Index n, Eigen::Index p, double bias,
                     uint64_t seed);

}  // namespace dfl
