#include "densepoint/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "densepoint/errors.hpp"

namespace densepoint {

DenseGrid::DenseGrid(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(height * width, fill) {
  if (height == 0 || width == 0) {
    throw ValidationError("DenseGrid: height and width must be >= 1");
  }
}

DenseGrid::DenseGrid(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height == 0 || width == 0) {
    throw ValidationError("DenseGrid: height and width must be >= 1");
  }
  if (values_.size() != height * width) {
    throw ValidationError("DenseGrid: " + std::to_string(values_.size()) +
                          " values for a " + std::to_string(height) + "x" +
                          std::to_string(width) + " grid");
  }
}

bool DenseGrid::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double DenseGrid::sum() const {
  // Neumaier summation: density sums must equal head counts to ~1e-9.
  double s = 0.0;
  double c = 0.0;
  for (double v : values_) {
    const double t = s + v;
    if (std::abs(s) >= std::abs(v)) {
      c += (s - t) + v;
    } else {
      c += (v - t) + s;
    }
    s = t;
  }
  return s + c;
}

double DenseGrid::min() const { return *std::min_element(values_.begin(), values_.end()); }

double DenseGrid::max() const { return *std::max_element(values_.begin(), values_.end()); }

DenseGrid DenseGrid::flipped_horizontal() const {
  DenseGrid out(height_, width_);
  for (std::size_t y = 0; y < height_; ++y) {
    for (std::size_t x = 0; x < width_; ++x) {
      out(y, width_ - 1 - x) = (*this)(y, x);
    }
  }
  return out;
}

DenseGrid DenseGrid::crop(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) const {
  if (y0 + h > height_ || x0 + w > width_) {
    throw ValidationError("DenseGrid::crop: window exceeds grid bounds");
  }
  DenseGrid out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>((y0 + y) * width_ + x0), w,
                out.values_.begin() + static_cast<std::ptrdiff_t>(y * w));
  }
  return out;
}

void require_same_shape(const DenseGrid& a, const DenseGrid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": shape mismatch (" + std::to_string(a.height()) +
                          "x" + std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                          "x" + std::to_string(b.width()) + ")");
  }
}

}  // namespace densepoint
