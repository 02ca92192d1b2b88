#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "evidencerank/error.hpp"
#include "evidencerank/io.hpp"
#include "evidencerank/random.hpp"

using namespace evidencerank;
using io::FeatPack;
using io::FeatPackError;
using io::FeatPackErrorKind;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "evidencerank-io-test";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

FeatPack random_pack(std::uint64_t seed, bool labels, bool theta) {
  Rng rng = Rng::stream(seed, "pack");
  const auto n = static_cast<Eigen::Index>(1 + rng.below(20));
  const auto d = static_cast<Eigen::Index>(1 + rng.below(9));
  FeatPack p;
  p.features.resize(n, d);
  for (auto& v : p.features.reshaped()) v = rng.normal();
  if (labels) {
    p.classes = static_cast<std::int64_t>(1 + rng.below(5));
    for (Eigen::Index i = 0; i < n; ++i) {
      p.labels.push_back(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(p.classes))));
    }
  } else {
    p.targets.resize(n, static_cast<Eigen::Index>(1 + rng.below(4)));
    for (auto& v : p.targets.reshaped()) v = rng.normal();
  }
  if (theta) {
    RowMatrix t(n, static_cast<Eigen::Index>(1 + rng.below(6)));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = rng.uniform() + 0.01;
      t.row(i) /= t.row(i).sum();
    }
    p.theta = std::move(t);
  }
  return p;
}

FeatPackError decode_error(const std::vector<std::byte>& bytes) {
  try {
    io::decode_featpack(bytes);
  } catch (const FeatPackError& e) {
    return e;
  }
  FAIL("decode accepted a corrupt pack");
  return FeatPackError(FeatPackErrorKind::kIo, 0, "unreachable");
}

void put_u64(std::vector<std::byte>& b, std::size_t at, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b[at + static_cast<std::size_t>(i)] = std::byte((v >> (8 * i)) & 0xff);
}

void put_f64(std::vector<std::byte>& b, std::size_t at, double v) {
  put_u64(b, at, std::bit_cast<std::uint64_t>(v));
}

FeatPack small_regression() {
  FeatPack p;
  p.features.resize(2, 1);
  p.features << 1.5, -2.0;
  p.targets.resize(2, 1);
  p.targets << 3.0, 4.0;
  return p;
}

}  // namespace

TEST_CASE("two-sample single-target pack is 76 bytes") {
  const auto bytes = io::encode_featpack(small_regression());
  CHECK(io::kFeatPackHeaderBytes == 44);
  REQUIRE(bytes.size() == 76);
  CHECK(std::memcmp(bytes.data(), "FEATPAK1", 8) == 0);
  // flags = 0, n = 2, D = 1, K = 1, Z = 0, little-endian
  const unsigned char header[36] = {0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0,
                                    0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(std::memcmp(bytes.data() + 8, header, 36) == 0);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 44, 8);
  CHECK(first == 1.5);
}

TEST_CASE("round trips are bitwise") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FeatPack p = random_pack(seed, seed % 2 == 0, seed % 3 != 0);
    const auto bytes = io::encode_featpack(p);
    const FeatPack q = io::decode_featpack(bytes);
    CHECK(io::encode_featpack(q) == bytes);
    CHECK(q.features == p.features);
    CHECK(q.labels == p.labels);
    CHECK(q.has_class_labels() == p.has_class_labels());
    CHECK(q.theta.has_value() == p.theta.has_value());

    const fs::path path = scratch("roundtrip.featpack");
    io::write_featpack(path, p);
    CHECK(fs::file_size(path) == bytes.size());
    CHECK(io::encode_featpack(io::read_featpack(path)) == bytes);
  }
}

TEST_CASE("flags and theta block") {
  FeatPack p = small_regression();
  auto bytes = io::encode_featpack(p);
  CHECK(std::to_integer<int>(bytes[8]) == 0);
  p.theta = RowMatrix::Constant(2, 2, 0.5);
  bytes = io::encode_featpack(p);
  CHECK(std::to_integer<int>(bytes[8]) == 2);
  CHECK(bytes.size() == 76 + 32);
}

TEST_CASE("corruption produces typed errors with offsets") {
  const FeatPack base = random_pack(3, true, true);
  const auto good = io::encode_featpack(base);
  const std::size_t n = base.samples();
  const std::size_t d = static_cast<std::size_t>(base.features.cols());

  SUBCASE("bad magic") {
    auto b = good;
    b[3] = std::byte{'X'};
    const auto e = decode_error(b);
    CHECK(e.kind() == FeatPackErrorKind::kBadMagic);
    CHECK(e.offset() == 0);
    CHECK(std::string(e.what()).find("byte offset 0") != std::string::npos);
  }
  SUBCASE("short header") {
    std::vector<std::byte> b(good.begin(), good.begin() + 20);
    CHECK(decode_error(b).kind() == FeatPackErrorKind::kTruncated);
  }
  SUBCASE("truncated payload names both lengths") {
    std::vector<std::byte> b(good.begin(), good.end() - 7);
    const auto e = decode_error(b);
    CHECK(e.kind() == FeatPackErrorKind::kTruncated);
    const std::string msg = e.what();
    CHECK(msg.find(std::to_string(good.size())) != std::string::npos);
    CHECK(msg.find(std::to_string(good.size() - 7)) != std::string::npos);
  }
  SUBCASE("trailing bytes") {
    auto b = good;
    b.push_back(std::byte{0});
    const auto e = decode_error(b);
    CHECK(e.kind() == FeatPackErrorKind::kTrailingBytes);
    CHECK(e.offset() == good.size());
  }
  SUBCASE("unknown flag") {
    auto b = good;
    b[8] = std::byte{0x7};
    const auto e = decode_error(b);
    CHECK(e.kind() == FeatPackErrorKind::kBadFlags);
    CHECK(e.offset() == 8);
  }
  SUBCASE("zero dimension") {
    auto b = good;
    put_u64(b, 20, 0);
    const auto e = decode_error(b);
    CHECK(e.kind() == FeatPackErrorKind::kBadShape);
    CHECK(e.offset() == 12);
  }
  SUBCASE("theta flag without Z") {
    auto b = good;
    put_u64(b, 36, 0);
    const auto e = decode_error(b);
    CHECK(e.kind() == FeatPackErrorKind::kBadShape);
    CHECK(e.offset() == 36);
  }
  SUBCASE("overflowing shape") {
    auto b = good;
    put_u64(b, 12, std::numeric_limits<std::uint64_t>::max() / 2);
    CHECK(decode_error(b).kind() == FeatPackErrorKind::kBadShape);
  }
  SUBCASE("non-finite feature") {
    auto b = good;
    const std::size_t at = 44 + 8 * (d + 1 < n * d ? d + 1 : 0);
    put_f64(b, at, std::numeric_limits<double>::quiet_NaN());
    const auto e = decode_error(b);
    CHECK(e.kind() == FeatPackErrorKind::kInvalidValue);
    CHECK(e.offset() == at);
  }
  SUBCASE("label out of range") {
    auto b = good;
    const std::size_t at = 44 + 8 * n * d;
    put_u64(b, at, static_cast<std::uint64_t>(base.classes));
    const auto e = decode_error(b);
    CHECK(e.kind() == FeatPackErrorKind::kInvalidValue);
    CHECK(e.offset() == at);
  }
  SUBCASE("theta row not normalized") {
    auto b = good;
    const std::size_t at = 44 + 8 * (n * d + n);
    put_f64(b, at, 5.0);
    const auto e = decode_error(b);
    CHECK(e.kind() == FeatPackErrorKind::kInvalidValue);
    CHECK(e.offset() == at);
  }
  SUBCASE("negative theta entry") {
    auto b = good;
    const std::size_t at = 44 + 8 * (n * d + n);
    put_f64(b, at, -0.25);
    CHECK(decode_error(b).kind() == FeatPackErrorKind::kInvalidValue);
  }
}

TEST_CASE("corrupt files are reported as input errors") {
  const fs::path path = scratch("corrupt.featpack");
  write_text(path, "NOTAPACK and some more bytes to pass the header size check......");
  CHECK_THROWS_AS(io::read_featpack(path), InvalidInput);
  CHECK_THROWS_AS(io::read_featpack(scratch("missing.featpack")), FeatPackError);
}

TEST_CASE("writer refuses invalid packs") {
  FeatPack p = small_regression();
  p.features(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(io::encode_featpack(p), InvalidInput);
  FeatPack q = small_regression();
  q.theta = RowMatrix::Constant(2, 2, 0.3);
  CHECK_THROWS_AS(io::encode_featpack(q), InvalidInput);
  FeatPack r = small_regression();
  r.targets.resize(3, 1);
  CHECK_THROWS_AS(io::encode_featpack(r), InvalidInput);
}

TEST_CASE("one-hot encoding") {
  const std::vector<std::int64_t> a{0, 1, 2};
  CHECK(io::one_hot(a, 3) == Matrix::Identity(3, 3));
  const std::vector<std::int64_t> b{1, 1};
  Matrix want(2, 2);
  want << 0, 1, 0, 1;
  CHECK(io::one_hot(b, 2) == want);
  const std::vector<std::int64_t> c{0, 2, 2, 1, 2};
  const Matrix h = io::one_hot(c, 3);
  CHECK((h.rowwise().sum().array() == 1.0).all());
  CHECK(h.colwise().sum() == Eigen::RowVector3d(1, 1, 3));
  const std::vector<std::int64_t> bad{3};
  CHECK_THROWS_AS(io::one_hot(bad, 3), InvalidInput);
}

TEST_CASE("pack target matrix uses one-hot for labels") {
  FeatPack p = random_pack(1, true, false);
  const Matrix t = p.target_matrix();
  CHECK(t.cols() == p.classes);
  CHECK(p.outputs() == static_cast<std::size_t>(p.classes));
}

TEST_CASE("CSV with a header and trailing newline") {
  const fs::path path = scratch("three.csv");
  write_text(path, "a,b,label\n1,2,0\n3,4,1\n5,6,2\n");
  const auto t = io::read_csv_features(path, true, io::ColumnRef(std::string("label")));
  CHECK(t.features.rows() == 3);
  CHECK(t.features.cols() == 2);
  CHECK(t.features(2, 1) == 6.0);
  CHECK(t.label == std::vector<double>{0, 1, 2});
  CHECK(t.feature_names == std::vector<std::string>{"a", "b"});

  const auto by_index = io::read_csv_features(path, true, io::ColumnRef(std::size_t{2}));
  CHECK(by_index.features == t.features);
}

TEST_CASE("CSV without a header by index") {
  const fs::path named = scratch("named.csv");
  const fs::path bare = scratch("bare.csv");
  write_text(named, "y,x1,x2\n0.5,1,2\n1.5,3,4\n");
  write_text(bare, "0.5,1,2\n1.5,3,4");
  const auto a = io::read_csv_features(named, true, io::ColumnRef(std::string("y")));
  const auto b = io::read_csv_features(bare, false, io::ColumnRef(std::size_t{0}));
  CHECK(a.features == b.features);
  CHECK(a.label == b.label);
  CHECK(b.feature_names.empty());
}

TEST_CASE("CSV errors carry locations") {
  const fs::path path = scratch("bad.csv");
  write_text(path, "a,b,label\n1,2,0\n3,4\n");
  try {
    io::read_csv_features(path, true, io::ColumnRef(std::string("label")));
    FAIL("ragged row accepted");
  } catch (const io::CsvError& e) {
    CHECK(e.line() == 3);
  }
  write_text(path, "a,b,label\n1,x,0\n");
  try {
    io::read_csv_features(path, true, io::ColumnRef(std::string("label")));
    FAIL("non-numeric cell accepted");
  } catch (const io::CsvError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 2);
  }
  write_text(path, "a,b,label\n1,2,0\n");
  CHECK_THROWS_AS(io::read_csv_features(path, true, io::ColumnRef(std::string("target"))), io::CsvError);
}

TEST_CASE("labels from CSV values") {
  const std::vector<double> ok{0, 2, 1};
  CHECK(io::labels_from_values(ok) == std::vector<std::int64_t>{0, 2, 1});
  const std::vector<double> fractional{0.5};
  CHECK_THROWS_AS(io::labels_from_values(fractional), InvalidInput);
  const std::vector<double> negative{-1};
  CHECK_THROWS_AS(io::labels_from_values(negative), InvalidInput);
}
