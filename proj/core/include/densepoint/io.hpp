#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "densepoint/annotation.hpp"
#include "densepoint/grid.hpp"

namespace densepoint {

// Annotation file: JSON array of
//   {"id": str, "width": int, "height": int,
//    "points": [{"x": num, "y": num, "w": num, "h": num}, ...]}
// Parse failures raise FormatError with the line number; out-of-bounds points
// raise ValidationError naming the image id.
std::vector<ImageRecord> load_annotations(const std::filesystem::path& path);
std::vector<ImageRecord> parse_annotations(const std::string& text,
                                           const std::string& source_name = "<memory>");
void store_annotations(const std::vector<ImageRecord>& records,
                       const std::filesystem::path& path);

// Grid file: "DPG1", u32 LE height, u32 LE width, height*width f64 LE.
void store_grid(const DenseGrid& grid, const std::filesystem::path& path);
DenseGrid load_grid(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_grid(const DenseGrid& grid);
DenseGrid decode_grid(const std::vector<std::uint8_t>& bytes);

// Grid value -> 8-bit intensity. normalize maps [min,max] linearly onto
// [0,255] (all zeros when min == max); otherwise [0,1] is clamped and scaled.
// Rounds half away from zero.
std::vector<std::uint8_t> grid_to_gray8(const DenseGrid& grid, bool normalize);

// Binary P5, maxval 255.
void export_pgm(const DenseGrid& grid, const std::filesystem::path& path, bool normalize);

struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major

  static RgbImage from_gray(const DenseGrid& grid, bool normalize);
  void set(std::size_t y, std::size_t x, std::array<std::uint8_t, 3> color);
  // 1-pixel outline, clipped to the image.
  void draw_circle(double cx, double cy, double radius, std::array<std::uint8_t, 3> color);
};

// Binary P6, maxval 255.
void export_ppm(const RgbImage& image, const std::filesystem::path& path);

// Whole-file helpers shared by the CLI and the dataset writers.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace densepoint
