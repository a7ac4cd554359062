#pragma once

#include <string>

#include "cxr/imaging.hpp"

namespace cxr {

/// Read an 8-bit or 16-bit grayscale PNG; intensities scaled to [0,1] by the
/// source bit-depth maximum.
GrayImage read_png_gray(const std::string& path);

/// Write a grayscale PNG (bit_depth 8 or 16), quantizing [0,1] intensities.
void write_png_gray(const std::string& path, const GrayImage& img,
                    int bit_depth = 16);

/// Raw portable graymap (P5, 8- or 16-bit) fallback for tests.
GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& img,
               int bit_depth = 16);

/// Dispatch on file extension (.png / .pgm).
GrayImage read_gray_image(const std::string& path);

}  // namespace cxr
