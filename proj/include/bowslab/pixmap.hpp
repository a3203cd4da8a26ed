#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace bowslab {

// 8-bit grayscale image, row-major.
class Pixmap {
 public:
  Pixmap() = default;
  // Constant image.
  Pixmap(int width, int height, std::uint8_t fill = 0);
  Pixmap(int width, int height, std::vector<std::uint8_t> samples);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  std::uint8_t at(int x, int y) const { return samples_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return samples_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const std::uint8_t> samples() const noexcept { return samples_; }
  std::span<std::uint8_t> samples() noexcept { return samples_; }

  friend bool operator==(const Pixmap&, const Pixmap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> samples_;
};

struct QualityReport {
  double mse = 0.0;
  double psnr_db = std::numeric_limits<double>::infinity();  // +inf iff mse == 0
  std::size_t sample_count = 0;

  bool infinite() const noexcept { return mse == 0.0; }
};

constexpr double kPeak = 255.0;

// Binary P5, maxval 255. Comment lines are accepted anywhere in the header.
Pixmap read_pgm(std::span<const std::uint8_t> bytes);
// Canonical header "P5\n<w> <h>\n255\n", no comments.
std::vector<std::uint8_t> write_pgm(const Pixmap& img);

Pixmap read_raw(std::span<const std::uint8_t> bytes, int width, int height);

QualityReport psnr(const Pixmap& a, const Pixmap& b);
double psnr_from_mse(double mse) noexcept;
double mse_from_psnr(double psnr_db) noexcept;

// Swaps rows and columns.
Pixmap transpose(const Pixmap& img);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
Pixmap load_pgm(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const Pixmap& img);

}  // namespace bowslab
