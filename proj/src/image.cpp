#include "fexgan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <string>

#include "fexgan/errors.hpp"

namespace fexgan {

namespace {

png_image rgb_header(const Image& img) {
  png_image header;
  std::memset(&header, 0, sizeof header);
  header.version = PNG_IMAGE_VERSION;
  header.width = static_cast<png_uint_32>(img.width);
  header.height = static_cast<png_uint_32>(img.height);
  header.format = PNG_FORMAT_RGB;
  return header;
}

void check_writable(const Image& img) {
  if (img.empty() || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    throw DomainError("cannot encode an empty or inconsistent image");
  }
}

Image finish_read(png_image& header, const std::string& what) {
  header.format = PNG_FORMAT_RGB;
  Image img(static_cast<int>(header.width), static_cast<int>(header.height));
  if (!png_image_finish_read(&header, nullptr, img.pixels.data(), 0, nullptr)) {
    std::string msg = header.message;
    png_image_free(&header);
    throw IoError("cannot decode PNG " + what + ": " + msg);
  }
  return img;
}

}  // namespace

Image::Image(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

void write_png(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Image read_png(const std::filesystem::path& path) {
  png_image header;
  std::memset(&header, 0, sizeof header);
  header.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&header, path.c_str())) {
    std::string msg = header.message;
    png_image_free(&header);
    throw IoError("cannot read PNG " + path.string() + ": " + msg);
  }
  return finish_read(header, path.string());
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  check_writable(img);
  png_image header = rgb_header(img);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&header, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG size query failed: ") + header.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&header, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + header.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image header;
  std::memset(&header, 0, sizeof header);
  header.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&header, bytes.data(), bytes.size())) {
    std::string msg = header.message;
    png_image_free(&header);
    throw IoError("cannot decode PNG payload: " + msg);
  }
  return finish_read(header, "payload");
}

bool has_png_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  png_byte sig[8];
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

Image tile_images(std::span<const Image> cells, int rows, int cols, int gutter) {
  if (rows < 1 || cols < 1) throw DomainError("grid needs rows, cols >= 1");
  if (cells.size() > static_cast<std::size_t>(rows) * cols) {
    throw DomainError("more cells than grid slots");
  }
  if (cells.empty()) throw DomainError("grid needs at least one cell");
  const int cw = cells.front().width;
  const int ch = cells.front().height;
  for (const auto& c : cells) {
    if (c.width != cw || c.height != ch) throw ShapeError("grid cells differ in size");
  }
  Image out(cols * cw + (cols - 1) * gutter, rows * ch + (rows - 1) * gutter, 255);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const int r = static_cast<int>(i) / cols;
    const int c = static_cast<int>(i) % cols;
    const int x0 = c * (cw + gutter);
    const int y0 = r * (ch + gutter);
    for (int y = 0; y < ch; ++y) {
      std::copy_n(cells[i].at(0, y), static_cast<std::size_t>(cw) * 3, out.at(x0, y0 + y));
    }
  }
  return out;
}

}  // namespace fexgan
