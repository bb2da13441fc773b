#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "densepoint/grid.hpp"

namespace densepoint {

struct LossConfig {
  // Down-weight on every non-positive pixel of the focal term. Fixed, not tunable.
  static constexpr double kNegativeWeight = 1.0 / 16.0;

  double gamma = 2.0;              // focal exponent on the predicted probability
  double delta = 4.0;              // (1 - p)^delta relief for negatives near heads
  double fp_region_thresh = 0.1;   // prediction above this on background => false positive
  double lambda1 = 1.0;            // weight of the false-positive loss
  double lambda2 = 1000.0;         // weight of the density regression loss
  double prob_eps = 1e-7;          // predictions are clamped to [eps, 1 - eps] before logs

  void validate() const;
};

struct LossResult {
  double value = 0.0;
  DenseGrid grad;  // d value / d prediction, same shape as the prediction
};

// Negative-suppressed focal loss over a predicted heatmap in (0,1).
//
// Pixels with gt == 1 exactly are positives and contribute
//   (1 - q)^gamma * log(q);
// every other pixel contributes
//   (1/16) * (1 - gt)^delta * q^gamma * log(1 - q),
// with q the prediction clamped to [prob_eps, 1 - prob_eps]. The negated sum is
// divided by max(1, #positives). Clamped pixels receive zero gradient.
LossResult nsf_loss(const DenseGrid& pred, const DenseGrid& gt_heatmap, const LossConfig& cfg);

// Row-major indices j with gt_heatmap[j] == 0 exactly and pred[j] > fp_region_thresh.
std::vector<std::size_t> fp_region(const DenseGrid& gt_heatmap, const DenseGrid& pred,
                                   const LossConfig& cfg);

// -(1/|F|) * sum_{j in F} q_j^gamma * log(1 - q_j); zero (and zero gradient) when
// F is empty. F is treated as a constant set.
LossResult fp_loss(const DenseGrid& pred, std::span<const std::size_t> region,
                   const LossConfig& cfg);

// Mean squared error over all pixels.
LossResult mse_loss(const DenseGrid& pred_density, const DenseGrid& gt_density);

struct TotalLoss {
  double value = 0.0;
  double nsf = 0.0;
  double fp = 0.0;
  double reg = 0.0;
  DenseGrid grad_heatmap;  // nsf.grad + lambda1 * fp.grad
  DenseGrid grad_density;  // lambda2 * reg.grad
};

// L = L_nsf + lambda1 * L_fp + lambda2 * L_r, split into per-head gradients.
TotalLoss total_loss(const LossResult& nsf, const LossResult& fp, const LossResult& reg,
                     const LossConfig& cfg);

// Convenience: builds the false-positive region from the current prediction
// and evaluates all three terms.
TotalLoss evaluate_total_loss(const DenseGrid& pred_heatmap, const DenseGrid& gt_heatmap,
                              const DenseGrid& pred_density, const DenseGrid& gt_density,
                              const LossConfig& cfg);

}  // namespace densepoint
