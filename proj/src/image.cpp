#include "gdf/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

namespace gdf {

size_t BinaryMask::count() const {
  return static_cast<size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

float sample_bilinear(const GrayImage& img, double x, double y) {
  const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, img.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1.0 - ax) * img.at(x0, y0) + ax * img.at(x1, y0);
  const double bottom = (1.0 - ax) * img.at(x0, y1) + ax * img.at(x1, y1);
  return static_cast<float>((1.0 - ay) * top + ay * bottom);
}

void quantize_8bit(GrayImage& img) {
  for (float& p : img.pixels) {
    p = static_cast<float>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  }
}

namespace {

void write_header(std::ofstream& out, int w, int h, int maxval) {
  out << "P5\n" << w << " " << h << "\n" << maxval << "\n";
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

// Reads a binary PGM header, returning the stream positioned at the raster.
std::ifstream open_pgm(const std::filesystem::path& path, int& w, int& h, int& maxval) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError("not a binary PGM: " + path.string());
  auto next_int = [&]() {
    int value = 0;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      in >> value;
      break;
    }
    return value;
  };
  w = next_int();
  h = next_int();
  maxval = next_int();
  in.get();
  if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw IoError("malformed PGM header: " + path.string());
  }
  return in;
}

}  // namespace

void write_pgm8(const std::filesystem::path& path, const GrayImage& img) {
  auto out = open_out(path);
  write_header(out, img.width, img.height, 255);
  std::vector<char> raster(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), raster.begin(), [](float p) {
    return static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f)));
  });
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

GrayImage read_pgm8(const std::filesystem::path& path) {
  int w = 0, h = 0, maxval = 0;
  auto in = open_pgm(path, w, h, maxval);
  if (maxval > 255) throw IoError("expected 8-bit PGM: " + path.string());
  std::vector<unsigned char> raster(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!in) throw IoError("truncated PGM: " + path.string());
  GrayImage img(w, h);
  for (size_t i = 0; i < raster.size(); ++i) img.pixels[i] = raster[i] / 255.0f;
  return img;
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  auto out = open_out(path);
  write_header(out, mask.width, mask.height, 255);
  std::vector<char> raster(mask.bits.size());
  std::transform(mask.bits.begin(), mask.bits.end(), raster.begin(),
                 [](std::uint8_t b) { return static_cast<char>(b ? 255 : 0); });
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

BinaryMask read_mask_pgm(const std::filesystem::path& path) {
  const GrayImage img = read_pgm8(path);
  BinaryMask mask(img.width, img.height);
  for (size_t i = 0; i < img.pixels.size(); ++i) mask.bits[i] = img.pixels[i] > 0.5f ? 1 : 0;
  return mask;
}

void write_pgm16(const std::filesystem::path& path, int width, int height,
                 const std::vector<std::uint16_t>& values) {
  auto out = open_out(path);
  write_header(out, width, height, 65535);
  std::vector<char> raster(values.size() * 2);
  for (size_t i = 0; i < values.size(); ++i) {
    raster[2 * i] = static_cast<char>(values[i] >> 8);
    raster[2 * i + 1] = static_cast<char>(values[i] & 0xff);
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::uint16_t> read_pgm16(const std::filesystem::path& path, int& width, int& height) {
  int maxval = 0;
  auto in = open_pgm(path, width, height, maxval);
  if (maxval < 256) throw IoError("expected 16-bit PGM: " + path.string());
  std::vector<unsigned char> raster(static_cast<size_t>(width) * height * 2);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!in) throw IoError("truncated PGM: " + path.string());
  std::vector<std::uint16_t> values(static_cast<size_t>(width) * height);
  for (size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<std::uint16_t>((raster[2 * i] << 8) | raster[2 * i + 1]);
  }
  return values;
}

}  // namespace gdf
