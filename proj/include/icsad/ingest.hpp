#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace icsad::ingest {

enum class Format { kCsv, kArff };

Format parse_format(std::string_view tag);

/// Parsed telemetry: n rows of m features, optionally with per-row 0/1 labels.
struct RecordTable {
  std::vector<std::string> feature_names;
  Eigen::MatrixXd rows;  // n x m
  std::optional<std::vector<int>> labels;

  std::size_t num_rows() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t num_features() const { return feature_names.size(); }

  /// Rows [begin, end) as a new table (labels sliced alongside).
  RecordTable slice(std::size_t begin, std::size_t end) const;
};

/// Per-feature min-max scaler.
struct Scaler {
  Eigen::VectorXd minimum;
  Eigen::VectorXd maximum;

  std::size_t num_features() const { return static_cast<std::size_t>(minimum.size()); }
};

/// One length-l slice of the series. Row t of `values` is source row start_index + t.
struct Window {
  std::size_t start_index = 0;
  Eigen::MatrixXd values;  // l x m
  int label = 0;
};

/// Parses CSV (header row) or ARFF text. The "time" column is dropped and a
/// label column named result / label / binary result is split out.
/// Throws ParseError naming the line number on malformed input.
RecordTable parse_dataset(std::string_view raw, Format format);

/// Reads a file and dispatches to parse_dataset.
RecordTable load_dataset(const std::string& path, Format format);

Scaler fit_scaler(const RecordTable& table);

/// Maps column k through (v - min_k) / (max_k - min_k); constant columns map to 0.
RecordTable apply_scaler(const Scaler& scaler, const RecordTable& table);

/// Inverse of apply_scaler on non-constant columns. Constant columns map back to min_k.
RecordTable invert_scaler(const Scaler& scaler, const RecordTable& table);

/// All n - l + 1 overlapping windows, window i starting at row i. A window is
/// labelled 1 iff any covered row is labelled 1.
std::vector<Window> make_windows(const RecordTable& table, std::size_t length);

/// Chronological split: the first floor(n * train_fraction) rows are the train part.
std::pair<RecordTable, RecordTable> split_train_test(const RecordTable& table,
                                                     double train_fraction);

/// Rows whose label is 0 (all rows when the table is unlabelled).
RecordTable normal_rows(const RecordTable& table);

/// Windows with label 0. Used for fitting, so that every covered row is normal
/// while the time axis inside each window stays contiguous.
std::vector<Window> normal_windows(const std::vector<Window>& windows);

}  // namespace icsad::ingest
