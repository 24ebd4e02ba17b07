#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fexgan {

/// 8-bit interleaved RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0);

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  bool empty() const { return width == 0 || height == 0; }

  friend bool operator==(const Image&, const Image&) = default;
};

void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> bytes);

/// Cheap signature check used when scanning directories.
bool has_png_signature(const std::filesystem::path& path);

/// Tiles equally sized images row-major with white gutters between cells.
Image tile_images(std::span<const Image> cells, int rows, int cols, int gutter = 2);

}  // namespace fexgan
