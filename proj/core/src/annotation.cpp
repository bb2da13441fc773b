#include "densepoint/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "densepoint/errors.hpp"

namespace densepoint {

void ImageRecord::validate() const {
  if (width == 0 || height == 0) {
    throw ValidationError("image '" + id + "': width and height must be >= 1");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PointAnnotation& p = points[i];
    const bool in_bounds = std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 &&
                           p.y >= 0.0 && p.x < static_cast<double>(width) &&
                           p.y < static_cast<double>(height);
    if (!in_bounds) {
      throw ValidationError("image '" + id + "': point " + std::to_string(i) + " (" +
                            std::to_string(p.x) + ", " + std::to_string(p.y) +
                            ") outside " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
    if (!(p.box_w > 0.0) || !(p.box_h > 0.0) || !std::isfinite(p.box_w) ||
        !std::isfinite(p.box_h)) {
      throw ValidationError("image '" + id + "': point " + std::to_string(i) +
                            " has a non-positive box");
    }
  }
  if (pixels && (pixels->height() != height || pixels->width() != width)) {
    throw ValidationError("image '" + id + "': pixel grid does not match declared size");
  }
}

ImageRecord crop_record(const ImageRecord& record, std::size_t x0, std::size_t y0,
                        std::size_t width, std::size_t height) {
  if (x0 + width > record.width || y0 + height > record.height) {
    throw ValidationError("image '" + record.id + "': crop window exceeds image");
  }
  ImageRecord out;
  out.id = record.id;
  out.width = width;
  out.height = height;
  const double lx = static_cast<double>(x0);
  const double ly = static_cast<double>(y0);
  for (const PointAnnotation& p : record.points) {
    const double x = p.x - lx;
    const double y = p.y - ly;
    if (x >= 0.0 && y >= 0.0 && x < static_cast<double>(width) && y < static_cast<double>(height)) {
      out.points.push_back({x, y, p.box_w, p.box_h});
    }
  }
  if (record.pixels) {
    out.pixels = record.pixels->crop(y0, x0, height, width);
  }
  return out;
}

ImageRecord flip_record_horizontal(const ImageRecord& record) {
  ImageRecord out = record;
  const double last = static_cast<double>(record.width) - 1.0;
  for (PointAnnotation& p : out.points) {
    // Sub-pixel labels in (width-1, width) would mirror to a negative x.
    p.x = std::max(0.0, last - p.x);
  }
  if (record.pixels) {
    out.pixels = record.pixels->flipped_horizontal();
  }
  return out;
}

}  // namespace densepoint
