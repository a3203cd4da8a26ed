#include "bowslab/pixmap.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "bowslab/error.hpp"

namespace bowslab {

Pixmap::Pixmap(int width, int height, std::uint8_t fill) {
  if (width <= 0 || height <= 0) throw DimensionError("image dimensions must be positive");
  width_ = width;
  height_ = height;
  samples_.assign(static_cast<std::size_t>(width) * height, fill);
}

Pixmap::Pixmap(int width, int height, std::vector<std::uint8_t> samples) {
  if (width <= 0 || height <= 0) throw DimensionError("image dimensions must be positive");
  if (samples.size() != static_cast<std::size_t>(width) * height)
    throw DimensionError("sample count does not match width x height");
  width_ = width;
  height_ = height;
  samples_ = std::move(samples);
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = static_cast<char>(bytes_[pos_]);
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long number(const char* field) {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) malformed(std::string("PGM ") + field + " out of range");
      ++pos_;
      ++digits;
    }
    if (digits == 0) malformed(std::string("PGM header: expected ") + field);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_whitespace() {
    if (pos_ >= bytes_.size()) malformed("PGM header ends before raster");
    const char c = static_cast<char>(bytes_[pos_]);
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r') malformed("PGM header: missing separator before raster");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

  [[noreturn]] static void malformed(const std::string& msg) {
    throw FormatError(FormatError::Kind::MalformedHeader, msg);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Pixmap read_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    HeaderReader::malformed("not a binary PGM (missing P5 magic)");
  HeaderReader header(bytes);
  header.advance(2);
  const long width = header.number("width");
  const long height = header.number("height");
  const long maxval = header.number("maxval");
  if (width <= 0 || height <= 0) HeaderReader::malformed("PGM dimensions must be positive");
  if (maxval != 255)
    throw FormatError(FormatError::Kind::UnsupportedMaxval, "PGM maxval " + std::to_string(maxval) + " (only 255 supported)");
  header.single_whitespace();

  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t available = bytes.size() - header.pos();
  if (available < count)
    throw FormatError(FormatError::Kind::TruncatedPayload,
                      "PGM payload truncated: expected " + std::to_string(count) + " bytes, found " + std::to_string(available));
  const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(header.pos());
  return Pixmap(static_cast<int>(width), static_cast<int>(height),
                std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(count)));
}

std::vector<std::uint8_t> write_pgm(const Pixmap& img) {
  const std::string head = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.insert(out.end(), img.samples().begin(), img.samples().end());
  return out;
}

Pixmap read_raw(std::span<const std::uint8_t> bytes, int width, int height) {
  if (width <= 0 || height <= 0) throw DimensionError("raw dimensions must be positive");
  const std::size_t expected = static_cast<std::size_t>(width) * height;
  if (bytes.size() != expected)
    throw FormatError(FormatError::Kind::LengthMismatch,
                      "raw length " + std::to_string(bytes.size()) + " != " + std::to_string(expected));
  return Pixmap(width, height, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
}

double psnr_from_mse(double mse) noexcept {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPeak * kPeak / mse);
}

double mse_from_psnr(double psnr_db) noexcept {
  if (std::isinf(psnr_db) && psnr_db > 0) return 0.0;
  return kPeak * kPeak * std::pow(10.0, -psnr_db / 10.0);
}

QualityReport psnr(const Pixmap& a, const Pixmap& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw DimensionError("psnr: image dimensions differ");
  if (a.empty()) throw DimensionError("psnr: empty images");
  double sum = 0.0;
  const auto sa = a.samples();
  const auto sb = b.samples();
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = static_cast<double>(sa[i]) - static_cast<double>(sb[i]);
    sum += d * d;
  }
  QualityReport r;
  r.sample_count = sa.size();
  r.mse = sum / static_cast<double>(sa.size());
  r.psnr_db = psnr_from_mse(r.mse);
  return r;
}

Pixmap transpose(const Pixmap& img) {
  Pixmap out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(y, x) = img.at(x, y);
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Pixmap load_pgm(const std::filesystem::path& path) { return read_pgm(read_file(path)); }

void save_pgm(const std::filesystem::path& path, const Pixmap& img) { write_file(path, write_pgm(img)); }

}  // namespace bowslab
