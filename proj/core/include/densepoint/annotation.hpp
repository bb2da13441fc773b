#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "densepoint/grid.hpp"

namespace densepoint {

// A labelled head: centre (x = column, y = row, origin at the top-left pixel
// centre) and the extent of its box.
struct PointAnnotation {
  double x = 0.0;
  double y = 0.0;
  double box_w = 1.0;
  double box_h = 1.0;

  friend bool operator==(const PointAnnotation&, const PointAnnotation&) = default;
};

struct ImageRecord {
  std::string id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<PointAnnotation> points;
  // Grayscale intensities in [0,1], height x width. Absent for label-only records.
  std::optional<DenseGrid> pixels;

  // Throws ValidationError naming the record id on any bound or box violation.
  void validate() const;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// Keeps the points whose centres fall inside the window and shifts them into
// window coordinates. Pixels are cropped too when present.
ImageRecord crop_record(const ImageRecord& record, std::size_t x0, std::size_t y0,
                        std::size_t width, std::size_t height);

// Mirror around the vertical axis: x -> width-1-x.
ImageRecord flip_record_horizontal(const ImageRecord& record);

}  // namespace densepoint
