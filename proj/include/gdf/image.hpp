#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace gdf {

/// Grayscale image with intensities in [0, 1], row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

  float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width - 1.0 && y <= height - 1.0;
  }
  bool operator==(const GrayImage&) const = default;
};

/// Per-pixel binary mask (0 or 1), row-major.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), bits(static_cast<size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return bits[static_cast<size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x]; }
  size_t count() const;
  bool operator==(const BinaryMask&) const = default;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bilinear interpolation; the caller guarantees (x, y) lies inside the image.
float sample_bilinear(const GrayImage& img, double x, double y);

/// Rounds intensities to the 8-bit grid so in-memory and on-disk images agree.
void quantize_8bit(GrayImage& img);

void write_pgm8(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm8(const std::filesystem::path& path);
void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask_pgm(const std::filesystem::path& path);
/// 16-bit big-endian PGM holding raw values (used for millimeter depth).
void write_pgm16(const std::filesystem::path& path, int width, int height,
                 const std::vector<std::uint16_t>& values);
std::vector<std::uint16_t> read_pgm16(const std::filesystem::path& path, int& width,
                                      int& height);

}  // namespace gdf
