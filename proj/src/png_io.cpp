#include "cxr/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

namespace cxr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

int quantize(Scalar v, int max_value) {
  const Scalar clipped = std::min(1.0, std::max(0.0, v));
  return static_cast<int>(std::lround(clipped * max_value));
}

}  // namespace

GrayImage read_png_gray(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open PNG: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("malformed PNG: " + path);
  }

  png_init_io(png, file.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_COLOR)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  bit_depth = png_get_bit_depth(png, info);

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<std::vector<png_byte>> rows(height,
                                          std::vector<png_byte>(row_bytes));
  std::vector<png_bytep> row_ptrs(height);
  for (png_uint_32 r = 0; r < height; ++r) row_ptrs[r] = rows[r].data();
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  GrayImage out(static_cast<Index>(height), static_cast<Index>(width));
  const Scalar max_value = bit_depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 r = 0; r < height; ++r) {
    const png_byte* row = rows[r].data();
    for (png_uint_32 c = 0; c < width; ++c) {
      unsigned int v;
      if (bit_depth == 16) {
        v = (static_cast<unsigned int>(row[2 * c]) << 8) | row[2 * c + 1];
      } else {
        v = row[c];
      }
      out.pixels(static_cast<Index>(r), static_cast<Index>(c)) =
          static_cast<Scalar>(v) / max_value;
    }
  }
  return out;
}

void write_png_gray(const std::string& path, const GrayImage& img,
                    int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw ConfigError("write_png_gray: bit depth must be 8 or 16");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot write PNG: " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path);
  }

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), bit_depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int max_value = bit_depth == 16 ? 65535 : 255;
  const std::size_t row_bytes =
      static_cast<std::size_t>(img.width()) * (bit_depth / 8);
  std::vector<png_byte> row(row_bytes);
  for (Index r = 0; r < img.height(); ++r) {
    for (Index c = 0; c < img.width(); ++c) {
      const int v = quantize(img.pixels(r, c), max_value);
      if (bit_depth == 16) {
        row[2 * static_cast<std::size_t>(c)] = static_cast<png_byte>(v >> 8);
        row[2 * static_cast<std::size_t>(c) + 1] =
            static_cast<png_byte>(v & 0xff);
      } else {
        row[static_cast<std::size_t>(c)] = static_cast<png_byte>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open PGM: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError("not a raw PGM (P5): " + path);
  long width = 0, height = 0, max_value = 0;
  in >> width >> height >> max_value;
  if (!in || width < 1 || height < 1 || max_value < 1 || max_value > 65535)
    throw DataError("malformed PGM header: " + path);
  in.get();  // single whitespace after header
  const bool wide = max_value > 255;
  const std::size_t n =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<unsigned char> raw(n * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!in) throw DataError("truncated PGM: " + path);
  GrayImage out(height, width);
  for (Index r = 0; r < height; ++r) {
    for (Index c = 0; c < width; ++c) {
      const std::size_t i =
          static_cast<std::size_t>(r) * static_cast<std::size_t>(width) +
          static_cast<std::size_t>(c);
      const unsigned int v =
          wide ? (static_cast<unsigned int>(raw[2 * i]) << 8) | raw[2 * i + 1]
               : raw[i];
      out.pixels(r, c) = static_cast<Scalar>(v) / static_cast<Scalar>(max_value);
    }
  }
  return out;
}

void write_pgm(const std::string& path, const GrayImage& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw ConfigError("write_pgm: bit depth must be 8 or 16");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write PGM: " + path);
  const int max_value = bit_depth == 16 ? 65535 : 255;
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << max_value
      << '\n';
  for (Index r = 0; r < img.height(); ++r) {
    for (Index c = 0; c < img.width(); ++c) {
      const int v = quantize(img.pixels(r, c), max_value);
      if (bit_depth == 16) {
        out.put(static_cast<char>(v >> 8));
        out.put(static_cast<char>(v & 0xff));
      } else {
        out.put(static_cast<char>(v));
      }
    }
  }
}

GrayImage read_gray_image(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0)
    return read_pgm(path);
  return read_png_gray(path);
}

}  // namespace cxr
