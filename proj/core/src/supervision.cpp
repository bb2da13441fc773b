#include "densepoint/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "densepoint/errors.hpp"

namespace densepoint {

void SupervisionConfig::validate() const {
  if (!(sigma_c > 0.0) || knn_k < 1 || !(sigma_coeff > 0.0) || !(sigma_d_min > 0.0) ||
      !(truncate_radius_sigmas > 0.0) || density_stride < 1) {
    throw ValidationError("SupervisionConfig: all fields must be strictly positive");
  }
}

std::size_t strided_extent(std::size_t extent, int stride) {
  const auto s = static_cast<std::size_t>(stride);
  return (extent + s - 1) / s;
}

double adaptive_sigma(std::span<const PointAnnotation> points, std::size_t index,
                      const SupervisionConfig& cfg) {
  if (index >= points.size()) {
    throw ValidationError("adaptive_sigma: index " + std::to_string(index) + " out of range (" +
                          std::to_string(points.size()) + " points)");
  }
  if (points.size() == 1) {
    return cfg.sigma_d_min;
  }
  std::vector<double> dist;
  dist.reserve(points.size() - 1);
  const PointAnnotation& self = points[index];
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j != index) {
      dist.push_back(std::hypot(points[j].x - self.x, points[j].y - self.y));
    }
  }
  const std::size_t k = std::min(dist.size(), static_cast<std::size_t>(cfg.knn_k));
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    total += dist[i];
  }
  return std::max(cfg.sigma_coeff * total, cfg.sigma_d_min);
}

namespace {

// Pixel of a head centre; labels within half a pixel of the far edge round
// onto the last row/column.
std::ptrdiff_t centre_pixel(double coord, std::size_t extent) {
  const auto r = static_cast<std::ptrdiff_t>(std::round(coord));
  return std::clamp<std::ptrdiff_t>(r, 0, static_cast<std::ptrdiff_t>(extent) - 1);
}

}  // namespace

DenseGrid make_heatmap(const ImageRecord& record, const SupervisionConfig& cfg) {
  cfg.validate();
  record.validate();
  DenseGrid heat(record.height, record.width, 0.0);
  const auto h = static_cast<std::ptrdiff_t>(record.height);
  const auto w = static_cast<std::ptrdiff_t>(record.width);

  for (std::size_t i = 0; i < record.points.size(); ++i) {
    const double sigma = adaptive_sigma(record.points, i, cfg);
    const double radius = cfg.truncate_radius_sigmas * sigma;
    const double radius_sq = radius * radius;
    const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    const std::ptrdiff_t cx = centre_pixel(record.points[i].x, record.width);
    const std::ptrdiff_t cy = centre_pixel(record.points[i].y, record.height);
    const auto reach = static_cast<std::ptrdiff_t>(std::floor(radius));

    for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, cy - reach);
         y <= std::min(h - 1, cy + reach); ++y) {
      for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(0, cx - reach);
           x <= std::min(w - 1, cx + reach); ++x) {
        const auto dx = static_cast<double>(x - cx);
        const auto dy = static_cast<double>(y - cy);
        const double d2 = dx * dx + dy * dy;
        if (d2 > radius_sq) {
          continue;
        }
        double& cell = heat(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        cell = std::max(cell, std::exp(-d2 * inv_two_var));
      }
    }
  }
  return heat;
}

DenseGrid make_density(const ImageRecord& record, const SupervisionConfig& cfg) {
  cfg.validate();
  record.validate();
  const std::size_t out_h = strided_extent(record.height, cfg.density_stride);
  const std::size_t out_w = strided_extent(record.width, cfg.density_stride);
  DenseGrid density(out_h, out_w, 0.0);

  const double stride = static_cast<double>(cfg.density_stride);
  const double sigma = cfg.sigma_c;
  const double radius = cfg.truncate_radius_sigmas * sigma;
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  const auto h = static_cast<std::ptrdiff_t>(out_h);
  const auto w = static_cast<std::ptrdiff_t>(out_w);

  std::vector<double> kernel;
  for (const PointAnnotation& p : record.points) {
    const double cx = p.x / stride;
    const double cy = p.y / stride;
    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(cx - radius)));
    const std::ptrdiff_t x1 = std::min(w - 1, static_cast<std::ptrdiff_t>(std::floor(cx + radius)));
    const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(cy - radius)));
    const std::ptrdiff_t y1 = std::min(h - 1, static_cast<std::ptrdiff_t>(std::floor(cy + radius)));

    kernel.assign(static_cast<std::size_t>((x1 - x0 + 1) * (y1 - y0 + 1)), 0.0);
    double mass = 0.0;
    std::size_t k = 0;
    for (std::ptrdiff_t y = y0; y <= y1; ++y) {
      for (std::ptrdiff_t x = x0; x <= x1; ++x, ++k) {
        const double dx = static_cast<double>(x) - cx;
        const double dy = static_cast<double>(y) - cy;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= radius * radius) {
          kernel[k] = std::exp(-d2 * inv_two_var);
          mass += kernel[k];
        }
      }
    }
    if (!(mass > 0.0)) {
      // Unreachable for sane configs: the nearest output pixel is always inside the radius.
      const auto nx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::round(cx)), 0, w - 1);
      const auto ny = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::round(cy)), 0, h - 1);
      density(static_cast<std::size_t>(ny), static_cast<std::size_t>(nx)) += 1.0;
      continue;
    }
    k = 0;
    for (std::ptrdiff_t y = y0; y <= y1; ++y) {
      for (std::ptrdiff_t x = x0; x <= x1; ++x, ++k) {
        density(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) += kernel[k] / mass;
      }
    }
  }
  return density;
}

}  // namespace densepoint
