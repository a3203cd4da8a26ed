#include <doctest.h>

#include <cmath>
#include <string>

#include "bowslab/error.hpp"
#include "bowslab/fixtures.hpp"
#include "bowslab/pixmap.hpp"
#include "test_support.hpp"

using namespace bowslab;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

FormatError::Kind format_kind(const std::vector<std::uint8_t>& b) {
  try {
    read_pgm(b);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("expected a FormatError");
  return FormatError::Kind::BadRecord;
}

}  // namespace

TEST_CASE("read_pgm: single pixel") {
  auto b = bytes_of("P5\n1 1\n255\n");
  b.push_back(0x7F);
  const Pixmap p = read_pgm(b);
  CHECK(p.width() == 1);
  CHECK(p.height() == 1);
  CHECK(p.at(0, 0) == 127);
}

TEST_CASE("read_pgm: comments and arbitrary whitespace in the header") {
  auto b = bytes_of("P5 # magic\n# a comment line\n2\t1\r\n# another\n255 ");
  b.push_back(10);
  b.push_back(20);
  const Pixmap p = read_pgm(b);
  CHECK(p.width() == 2);
  CHECK(p.at(0, 0) == 10);
  CHECK(p.at(1, 0) == 20);
}

TEST_CASE("read_pgm: a raster beginning with a whitespace byte is not swallowed") {
  auto b = bytes_of("P5\n2 1\n255\n");
  b.push_back('\n');
  b.push_back(' ');
  const Pixmap p = read_pgm(b);
  CHECK(p.at(0, 0) == '\n');
  CHECK(p.at(1, 0) == ' ');
}

TEST_CASE("read_pgm: error kinds") {
  CHECK(format_kind(bytes_of("P2\n1 1\n255\n0")) == FormatError::Kind::MalformedHeader);
  CHECK(format_kind(bytes_of("P5\n1\n")) == FormatError::Kind::MalformedHeader);
  CHECK(format_kind(bytes_of("P5\n0 4\n255\n")) == FormatError::Kind::MalformedHeader);
  CHECK(format_kind(bytes_of("P5\n1 1\n65535\n00")) == FormatError::Kind::UnsupportedMaxval);
  CHECK(format_kind(bytes_of("P5\n1 1\n255")) == FormatError::Kind::MalformedHeader);

  auto truncated = bytes_of("P5\n512 512\n255\n");
  truncated.resize(truncated.size() + 10, 0);
  CHECK(format_kind(truncated) == FormatError::Kind::TruncatedPayload);
}

TEST_CASE("write_pgm: canonical header and byte count") {
  const auto b = write_pgm(Pixmap(1, 1, std::vector<std::uint8_t>{0}));
  CHECK(b.size() == 12);
  CHECK(b.back() == 0x00);
  CHECK(std::string(b.begin(), b.end() - 1) == "P5\n1 1\n255\n");
}

TEST_CASE("PGM round trip is the identity and deterministic") {
  const Pixmap x = testing::random_image(37, 19, 5);
  CHECK(read_pgm(write_pgm(x)) == x);
  CHECK(write_pgm(x) == write_pgm(x));

  const Pixmap f = fixture(0);
  CHECK(read_pgm(write_pgm(f)) == f);
}

TEST_CASE("PGM files on disk") {
  testing::TempDir dir("pixmap");
  const Pixmap x = testing::random_image(16, 8, 9);
  save_pgm(dir / "x.pgm", x);
  CHECK(load_pgm(dir / "x.pgm") == x);
  CHECK_THROWS_AS(load_pgm(dir / "missing.pgm"), IoError);
}

TEST_CASE("read_raw") {
  const std::vector<std::uint8_t> four{1, 2, 3, 4};
  const Pixmap p = read_raw(four, 2, 2);
  CHECK(p.at(0, 0) == 1);
  CHECK(p.at(1, 0) == 2);
  CHECK(p.at(0, 1) == 3);
  CHECK(p.at(1, 1) == 4);

  const std::vector<std::uint8_t> contest(262144, 7);
  CHECK(read_raw(contest, 512, 512).size() == 262144);

  const std::vector<std::uint8_t> five(5, 0);
  try {
    read_raw(five, 2, 2);
    FAIL("expected a length mismatch");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::LengthMismatch);
  }
}

TEST_CASE("Pixmap rejects inconsistent construction") {
  CHECK_THROWS_AS(Pixmap(0, 3), DimensionError);
  CHECK_THROWS_AS(Pixmap(2, 2, std::vector<std::uint8_t>(3)), DimensionError);
}

TEST_CASE("psnr") {
  const Pixmap a = testing::random_image(64, 64, 1);
  const QualityReport same = psnr(a, a);
  CHECK(same.mse == 0.0);
  CHECK(same.infinite());
  CHECK(std::isinf(same.psnr_db));

  Pixmap lo(32, 32, 100), hi(32, 32, 101);
  CHECK(psnr(lo, hi).psnr_db == doctest::Approx(10.0 * std::log10(65025.0)).epsilon(1e-12));
  CHECK(psnr(lo, hi).psnr_db == doctest::Approx(48.1308).epsilon(1e-5));

  Pixmap z(512, 512, 0), one(512, 512, 0);
  one.at(3, 4) = 255;
  const double expected = 10.0 * std::log10(65025.0 / (65025.0 / 262144.0));
  CHECK(psnr(z, one).psnr_db == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(54.185).epsilon(1e-4));

  CHECK_THROWS_AS(psnr(Pixmap(8, 8), Pixmap(8, 16)), DimensionError);
}

TEST_CASE("psnr and mse conversions are inverse") {
  for (double db : {20.0, 30.59, 35.24, 48.0}) CHECK(psnr_from_mse(mse_from_psnr(db)) == doctest::Approx(db).epsilon(1e-12));
  CHECK(mse_from_psnr(std::numeric_limits<double>::infinity()) == 0.0);
}

TEST_CASE("transpose") {
  const Pixmap one(1, 1, 9);
  CHECK(transpose(one) == one);
  const Pixmap m(3, 2, std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6});
  CHECK(transpose(m) == Pixmap(2, 3, std::vector<std::uint8_t>{1, 4, 2, 5, 3, 6}));
  const Pixmap r = testing::random_image(13, 7, 3);
  CHECK(transpose(transpose(r)) == r);
}
