#pragma once

// FeatPack: binary container for extracted features, targets and optional
// source-model predictions. All integers and floats are little-endian.
//
//   offset  size  field
//        0     8  magic "FEATPAK1"
//        8     4  flags (u32): bit 0 targets are class labels, bit 1 theta present
//       12     8  n (u64)  samples
//       20     8  D (u64)  feature dimension
//       28     8  K (u64)  target columns, or number of classes when bit 0 set
//       36     8  Z (u64)  source classes in theta, 0 when absent
//       44        F: n*D float64, row-major
//                 targets: n*K float64 row-major, or n int64 labels in [0, K)
//                 theta: n*Z float64 row-major, rows summing to 1

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "evidencerank/error.hpp"
#include "evidencerank/types.hpp"

namespace evidencerank::io {

inline constexpr std::array<char, 8> kFeatPackMagic = {'F', 'E', 'A', 'T',
                                                        'P', 'A', 'K', '1'};
inline constexpr std::size_t kFeatPackHeaderBytes = 44;
inline constexpr std::uint32_t kFlagClassLabels = 1u << 0;
inline constexpr std::uint32_t kFlagTheta = 1u << 1;

struct FeatPack {
  FeatureMatrix features;
  TargetMatrix targets;              // regression targets; empty when labels are used
  std::vector<std::int64_t> labels;  // class labels; empty for regression
  std::int64_t classes = 0;          // K when labels are used
  std::optional<RowMatrix> theta;

  bool has_class_labels() const { return classes > 0; }
  std::size_t samples() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t outputs() const;
  // Regression targets as stored, or the one-hot encoding of the labels.
  TargetMatrix target_matrix() const;
};

enum class FeatPackErrorKind {
  kIo,
  kBadMagic,
  kBadFlags,
  kBadShape,
  kTruncated,
  kTrailingBytes,
  kInvalidValue,
};

class FeatPackError : public InvalidInput {
 public:
  FeatPackError(FeatPackErrorKind kind, std::size_t offset, const std::string& message);

  FeatPackErrorKind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  FeatPackErrorKind kind_;
  std::size_t offset_;
};

std::vector<std::byte> encode_featpack(const FeatPack& pack);
FeatPack decode_featpack(std::span<const std::byte> bytes);

void write_featpack(const std::filesystem::path& path, const FeatPack& pack);
FeatPack read_featpack(const std::filesystem::path& path);

// n x C matrix with a single 1 per row.
TargetMatrix one_hot(std::span<const std::int64_t> labels, std::int64_t classes);

// Column selector: a header name or a zero-based index.
using ColumnRef = std::variant<std::string, std::size_t>;

struct CsvTable {
  FeatureMatrix features;        // every column except the label, in file order
  std::vector<double> label;     // the label column
  std::vector<std::string> feature_names;  // empty when the file has no header
};

class CsvError : public InvalidInput {
 public:
  CsvError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }      // 1-based, 0 when not applicable
  std::size_t column() const { return column_; }  // 1-based, 0 when not applicable

 private:
  std::size_t line_;
  std::size_t column_;
};

CsvTable read_csv_features(const std::filesystem::path& path, bool has_header,
                           const ColumnRef& label_column);

// Labels read from CSV as integers; throws InvalidInput for fractional or
// negative values.
std::vector<std::int64_t> labels_from_values(std::span<const double> values);

}  // namespace evidencerank::io
