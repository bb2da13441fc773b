#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace densepoint {

// Row-major 2-D raster of doubles. Row index is y, column index is x.
// Used for images, heatmaps, density maps and their gradients.
class DenseGrid {
 public:
  DenseGrid(std::size_t height, std::size_t width, double fill = 0.0);
  DenseGrid(std::size_t height, std::size_t width, std::vector<double> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  double operator()(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
  double& operator()(std::size_t y, std::size_t x) { return values_[y * width_ + x]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool same_shape(const DenseGrid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool all_finite() const;

  double sum() const;
  double min() const;
  double max() const;

  // Mirror columns: x -> width-1-x.
  DenseGrid flipped_horizontal() const;
  // Sub-rectangle [y0, y0+h) x [x0, x0+w); must lie inside the grid.
  DenseGrid crop(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) const;

  friend bool operator==(const DenseGrid&, const DenseGrid&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<double> values_;
};

// Throws ValidationError when shapes differ; `what` names the caller.
void require_same_shape(const DenseGrid& a, const DenseGrid& b, const char* what);

}  // namespace densepoint
