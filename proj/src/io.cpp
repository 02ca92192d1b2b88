#include "evidencerank/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace evidencerank::io {
namespace {

constexpr double kThetaRowTolerance = 1e-6;
constexpr std::size_t kFlagsOffset = 8;
constexpr std::size_t kRowsOffset = 12;
constexpr std::size_t kLabelsOffset = 28;
constexpr std::size_t kThetaColsOffset = 36;

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}
std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

class Writer {
 public:
  explicit Writer(std::size_t reserve) { bytes_.reserve(reserve); }

  void raw(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::byte*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }
  void u32(std::uint32_t v) {
    v = to_little(v);
    raw(&v, sizeof v);
  }
  void u64(std::uint64_t v) {
    v = to_little(v);
    raw(&v, sizeof v);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::byte> take() { return std::move(bytes_); }

 private:
  std::vector<std::byte> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return to_little(v);
  }
  std::uint64_t u64() {
    std::uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return to_little(v);
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

// a * b, or nullopt on overflow.
std::optional<std::uint64_t> checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::nullopt;
  return a * b;
}

std::optional<std::uint64_t> checked_add(std::uint64_t a, std::uint64_t b) {
  if (b > std::numeric_limits<std::uint64_t>::max() - a) return std::nullopt;
  return a + b;
}

InvalidInput shape_error(const std::string& message) {
  return InvalidInput("write_featpack: " + message);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

FeatPackError::FeatPackError(FeatPackErrorKind kind, std::size_t offset,
                             const std::string& message)
    : InvalidInput(message + " (byte offset " + std::to_string(offset) + ")"),
      kind_(kind),
      offset_(offset) {}

CsvError::CsvError(std::size_t line, std::size_t column, const std::string& message)
    : InvalidInput(line == 0 ? message
                             : message + " (line " + std::to_string(line) +
                                   (column == 0 ? std::string() : ", column " + std::to_string(column)) +
                                   ")"),
      line_(line),
      column_(column) {}

std::size_t FeatPack::outputs() const {
  return has_class_labels() ? static_cast<std::size_t>(classes)
                            : static_cast<std::size_t>(targets.cols());
}

TargetMatrix FeatPack::target_matrix() const {
  return has_class_labels() ? one_hot(labels, classes) : targets;
}

TargetMatrix one_hot(std::span<const std::int64_t> labels, std::int64_t classes) {
  if (classes < 1) throw InvalidInput("one_hot: need at least one class");
  TargetMatrix out = TargetMatrix::Zero(static_cast<Eigen::Index>(labels.size()),
                                        static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw InvalidInput("one_hot: label " + std::to_string(labels[i]) + " at index " +
                         std::to_string(i) + " is outside [0, " +
                         std::to_string(classes) + ")");
    }
    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
  }
  return out;
}

std::vector<std::byte> encode_featpack(const FeatPack& pack) {
  const auto n = static_cast<std::uint64_t>(pack.features.rows());
  const auto d = static_cast<std::uint64_t>(pack.features.cols());
  if (n < 1 || d < 1) throw shape_error("features must be at least 1 x 1");

  std::uint32_t flags = 0;
  std::uint64_t k = 0;
  if (pack.has_class_labels()) {
    flags |= kFlagClassLabels;
    k = static_cast<std::uint64_t>(pack.classes);
    if (pack.labels.size() != n) throw shape_error("label count does not match n");
    for (std::int64_t v : pack.labels) {
      if (v < 0 || v >= pack.classes) throw shape_error("label outside [0, K)");
    }
  } else {
    if (!pack.labels.empty()) throw shape_error("labels given without a class count");
    if (static_cast<std::uint64_t>(pack.targets.rows()) != n || pack.targets.cols() < 1) {
      throw shape_error("targets must be n x K with K >= 1");
    }
    k = static_cast<std::uint64_t>(pack.targets.cols());
  }
  std::uint64_t z = 0;
  if (pack.theta) {
    flags |= kFlagTheta;
    if (static_cast<std::uint64_t>(pack.theta->rows()) != n || pack.theta->cols() < 1) {
      throw shape_error("theta must be n x Z with Z >= 1");
    }
    z = static_cast<std::uint64_t>(pack.theta->cols());
    for (Eigen::Index i = 0; i < pack.theta->rows(); ++i) {
      const auto row = pack.theta->row(i);
      if (!row.allFinite() || (row.array() < 0.0).any() ||
          std::abs(row.sum() - 1.0) > kThetaRowTolerance) {
        throw shape_error("theta row " + std::to_string(i) +
                          " is not a probability vector");
      }
    }
  }
  if (!pack.features.allFinite() || !pack.targets.allFinite()) {
    throw shape_error("features and targets must be finite");
  }

  const std::size_t payload =
      8 * (n * d + (pack.has_class_labels() ? n : n * k) + n * z);
  Writer w(kFeatPackHeaderBytes + payload);
  w.raw(kFeatPackMagic.data(), kFeatPackMagic.size());
  w.u32(flags);
  w.u64(n);
  w.u64(d);
  w.u64(k);
  w.u64(z);
  for (Eigen::Index i = 0; i < pack.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < pack.features.cols(); ++j) w.f64(pack.features(i, j));
  }
  if (pack.has_class_labels()) {
    for (std::int64_t v : pack.labels) w.i64(v);
  } else {
    for (Eigen::Index i = 0; i < pack.targets.rows(); ++i) {
      for (Eigen::Index j = 0; j < pack.targets.cols(); ++j) w.f64(pack.targets(i, j));
    }
  }
  if (pack.theta) {
    for (Eigen::Index i = 0; i < pack.theta->rows(); ++i) {
      for (Eigen::Index j = 0; j < pack.theta->cols(); ++j) w.f64((*pack.theta)(i, j));
    }
  }
  return w.take();
}

FeatPack decode_featpack(std::span<const std::byte> bytes) {
  const std::size_t size = bytes.size();
  if (size < kFeatPackHeaderBytes) {
    throw FeatPackError(FeatPackErrorKind::kTruncated, size,
                        "truncated header: expected at least " +
                            std::to_string(kFeatPackHeaderBytes) + " bytes, got " +
                            std::to_string(size));
  }
  for (std::size_t i = 0; i < kFeatPackMagic.size(); ++i) {
    if (static_cast<char>(bytes[i]) != kFeatPackMagic[i]) {
      throw FeatPackError(FeatPackErrorKind::kBadMagic, 0,
                          "bad magic: not a FEATPAK1 file");
    }
  }
  Reader r(bytes.subspan(kFeatPackMagic.size()));
  const std::uint32_t flags = r.u32();
  const std::uint64_t n = r.u64();
  const std::uint64_t d = r.u64();
  const std::uint64_t k = r.u64();
  const std::uint64_t z = r.u64();

  if ((flags & ~(kFlagClassLabels | kFlagTheta)) != 0) {
    throw FeatPackError(FeatPackErrorKind::kBadFlags, kFlagsOffset,
                        "unknown flag bits set: " + std::to_string(flags));
  }
  if (n < 1 || d < 1 || k < 1) {
    throw FeatPackError(FeatPackErrorKind::kBadShape, kRowsOffset,
                        "n, D and K must all be at least 1");
  }
  const bool labelled = (flags & kFlagClassLabels) != 0;
  const bool has_theta = (flags & kFlagTheta) != 0;
  if (has_theta != (z > 0)) {
    throw FeatPackError(FeatPackErrorKind::kBadShape, kThetaColsOffset,
                        has_theta ? "theta flag set but Z = 0" : "Z > 0 but theta flag clear");
  }

  auto overflow = [&] {
    return FeatPackError(FeatPackErrorKind::kBadShape, kRowsOffset,
                         "declared dimensions overflow the addressable size");
  };
  const auto f_count = checked_mul(n, d);
  const auto t_count = labelled ? std::optional<std::uint64_t>(n) : checked_mul(n, k);
  const auto th_count = checked_mul(n, z);
  if (!f_count || !t_count || !th_count) throw overflow();
  auto values = checked_add(*f_count, *t_count);
  if (values) values = checked_add(*values, *th_count);
  if (!values) throw overflow();
  const auto payload = checked_mul(*values, 8);
  if (!payload) throw overflow();
  const auto expected = checked_add(*payload, kFeatPackHeaderBytes);
  if (!expected || *expected > std::numeric_limits<std::size_t>::max()) throw overflow();
  if (size < *expected) {
    throw FeatPackError(FeatPackErrorKind::kTruncated, size,
                        "truncated payload: expected " + std::to_string(*expected) +
                            " bytes, got " + std::to_string(size));
  }
  if (size > *expected) {
    throw FeatPackError(FeatPackErrorKind::kTrailingBytes, static_cast<std::size_t>(*expected),
                        "trailing bytes: expected " + std::to_string(*expected) +
                            " bytes, got " + std::to_string(size));
  }

  Reader body(bytes.subspan(kFeatPackHeaderBytes));
  auto finite = [&](double v, std::size_t at, const char* block) {
    if (!std::isfinite(v)) {
      throw FeatPackError(FeatPackErrorKind::kInvalidValue, at,
                          std::string("non-finite value in ") + block);
    }
    return v;
  };

  FeatPack pack;
  const auto rows = static_cast<Eigen::Index>(n);
  pack.features.resize(rows, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < pack.features.cols(); ++j) {
      const std::size_t at = kFeatPackHeaderBytes + body.offset();
      pack.features(i, j) = finite(body.f64(), at, "features");
    }
  }
  if (labelled) {
    if (k > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      throw FeatPackError(FeatPackErrorKind::kBadShape, kLabelsOffset, "class count too large");
    }
    pack.classes = static_cast<std::int64_t>(k);
    pack.labels.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::size_t at = kFeatPackHeaderBytes + body.offset();
      const std::int64_t v = body.i64();
      if (v < 0 || v >= pack.classes) {
        throw FeatPackError(FeatPackErrorKind::kInvalidValue, at,
                            "class label " + std::to_string(v) + " outside [0, " +
                                std::to_string(k) + ")");
      }
      pack.labels[i] = v;
    }
  } else {
    pack.targets.resize(rows, static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < pack.targets.cols(); ++j) {
        const std::size_t at = kFeatPackHeaderBytes + body.offset();
        pack.targets(i, j) = finite(body.f64(), at, "targets");
      }
    }
  }
  if (has_theta) {
    RowMatrix theta(rows, static_cast<Eigen::Index>(z));
    for (Eigen::Index i = 0; i < rows; ++i) {
      const std::size_t row_at = kFeatPackHeaderBytes + body.offset();
      for (Eigen::Index j = 0; j < theta.cols(); ++j) {
        const std::size_t at = kFeatPackHeaderBytes + body.offset();
        const double v = finite(body.f64(), at, "theta");
        if (v < 0.0) {
          throw FeatPackError(FeatPackErrorKind::kInvalidValue, at, "negative theta entry");
        }
        theta(i, j) = v;
      }
      const double sum = theta.row(i).sum();
      if (std::abs(sum - 1.0) > kThetaRowTolerance) {
        std::ostringstream msg;
        msg << "theta row " << i << " sums to " << sum << ", expected 1";
        throw FeatPackError(FeatPackErrorKind::kInvalidValue, row_at, msg.str());
      }
    }
    pack.theta = std::move(theta);
  }
  return pack;
}

void write_featpack(const std::filesystem::path& path, const FeatPack& pack) {
  const std::vector<std::byte> bytes = encode_featpack(pack);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FeatPackError(FeatPackErrorKind::kIo, 0,
                        "cannot open '" + path.string() + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw FeatPackError(FeatPackErrorKind::kIo, 0, "write to '" + path.string() + "' failed");
  }
}

FeatPack read_featpack(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FeatPackError(FeatPackErrorKind::kIo, 0, "cannot open '" + path.string() + "'");
  }
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw FeatPackError(FeatPackErrorKind::kIo, 0, "read of '" + path.string() + "' failed");
  }
  return decode_featpack(std::as_bytes(std::span<const char>(raw)));
}

CsvTable read_csv_features(const std::filesystem::path& path, bool has_header,
                           const ColumnRef& label_column) {
  std::ifstream in(path);
  if (!in) throw CsvError(0, 0, "cannot open '" + path.string() + "'");

  std::vector<std::vector<double>> rows;
  std::vector<std::string> header;
  std::size_t width = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (has_header && header.empty()) {
      header = std::move(cells);
      width = header.size();
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw CsvError(line_no, 0, "ragged row: expected " + std::to_string(width) +
                                     " columns, got " + std::to_string(cells.size()));
    }
    std::vector<double> values(width);
    for (std::size_t c = 0; c < width; ++c) {
      const std::string& cell = cells[c];
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, values[c]);
      if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(values[c])) {
        throw CsvError(line_no, c + 1, "non-numeric cell '" + cell + "'");
      }
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw CsvError(0, 0, "'" + path.string() + "' has no data rows");

  std::size_t label_index = 0;
  if (const auto* name = std::get_if<std::string>(&label_column)) {
    if (!has_header) throw CsvError(0, 0, "label column given by name but the file has no header");
    const auto it = std::find(header.begin(), header.end(), *name);
    if (it == header.end()) throw CsvError(0, 0, "no column named '" + *name + "'");
    label_index = static_cast<std::size_t>(it - header.begin());
  } else {
    label_index = std::get<std::size_t>(label_column);
    if (label_index >= width) {
      throw CsvError(0, 0, "label column index " + std::to_string(label_index) +
                               " out of range for " + std::to_string(width) + " columns");
    }
  }
  if (width < 2) throw CsvError(0, 0, "need at least one feature column besides the label");

  CsvTable table;
  table.features.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(width - 1));
  table.label.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Eigen::Index out_col = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_index) {
        table.label.push_back(rows[r][c]);
      } else {
        table.features(static_cast<Eigen::Index>(r), out_col++) = rows[r][c];
      }
    }
  }
  if (has_header) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c != label_index) table.feature_names.push_back(header[c]);
    }
  }
  return table;
}

std::vector<std::int64_t> labels_from_values(std::span<const double> values) {
  std::vector<std::int64_t> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (v < 0.0 || v != std::floor(v) || v > 9.0e15) {
      throw InvalidInput("label " + std::to_string(v) + " at row " + std::to_string(i) +
                         " is not a nonnegative integer");
    }
    out.push_back(static_cast<std::int64_t>(v));
  }
  return out;
}

}  // namespace evidencerank::io
