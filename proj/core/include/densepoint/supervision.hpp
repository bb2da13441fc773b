#pragma once

#include <cstddef>
#include <span>

#include "densepoint/annotation.hpp"
#include "densepoint/grid.hpp"

namespace densepoint {

struct SupervisionConfig {
  double sigma_c = 3.0;                 // density kernel std, output-pixel units
  int knn_k = 3;                        // neighbours used for the adaptive heatmap sigma
  double sigma_coeff = 0.1;             // sigma_d = sigma_coeff * sum of k-NN distances
  double sigma_d_min = 1.0;             // floor for isolated or coincident heads
  double truncate_radius_sigmas = 3.0;  // kernels are exactly 0 beyond this many sigmas
  int density_stride = 2;

  void validate() const;
};

// Scale-adaptive heatmap sigma of points[index]: sigma_coeff times the summed
// distance to its knn_k nearest other heads (fewer if fewer exist), floored at
// sigma_d_min. A lone head gets sigma_d_min.
double adaptive_sigma(std::span<const PointAnnotation> points, std::size_t index,
                      const SupervisionConfig& cfg);

// Full-resolution localization target. Each head stamps
//   exp(-((x-cx)^2 + (y-cy)^2) / (2 sigma_d^2))
// centred on its rounded pixel, truncated to exactly 0 beyond
// truncate_radius_sigmas * sigma_d; overlapping kernels combine by maximum.
DenseGrid make_heatmap(const ImageRecord& record, const SupervisionConfig& cfg);

// Counting target at density_stride. Each head adds a Gaussian of std sigma_c
// (coordinates divided by the stride) renormalised over the pixels it covers
// so it contributes exactly unit mass, border clipping included.
DenseGrid make_density(const ImageRecord& record, const SupervisionConfig& cfg);

// ceil(extent / stride)
std::size_t strided_extent(std::size_t extent, int stride);

}  // namespace densepoint
