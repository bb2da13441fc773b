#include "densepoint/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "densepoint/errors.hpp"

namespace densepoint {

void LossConfig::validate() const {
  if (!(gamma >= 0.0) || !(delta >= 0.0) || !(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw ValidationError("LossConfig: gamma, delta, lambda1, lambda2 must be >= 0");
  }
  if (!(fp_region_thresh > 0.0 && fp_region_thresh < 1.0)) {
    throw ValidationError("LossConfig: fp_region_thresh must lie in (0,1)");
  }
  if (!(prob_eps > 0.0 && prob_eps < 0.5)) {
    throw ValidationError("LossConfig: prob_eps must lie in (0,0.5)");
  }
}

namespace {

// Compensated accumulator so the reduction does not depend on grid size.
class NeumaierSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

void require_finite(const DenseGrid& g, const char* what) {
  if (!g.all_finite()) {
    throw ValidationError(std::string(what) + ": non-finite input value");
  }
}

struct Clamped {
  double q;
  bool active;  // false when clamped; the gradient is zero there
};

Clamped clamp_prob(double p, double eps) {
  if (p < eps) {
    return {eps, false};
  }
  if (p > 1.0 - eps) {
    return {1.0 - eps, false};
  }
  return {p, true};
}

// d/dq of q^gamma * log(1-q)
double neg_term_derivative(double q, double gamma) {
  const double log_neg = std::log(1.0 - q);
  const double pow_q = std::pow(q, gamma);
  const double dpow = gamma == 0.0 ? 0.0 : gamma * std::pow(q, gamma - 1.0);
  return dpow * log_neg - pow_q / (1.0 - q);
}

}  // namespace

LossResult nsf_loss(const DenseGrid& pred, const DenseGrid& gt_heatmap, const LossConfig& cfg) {
  require_same_shape(pred, gt_heatmap, "nsf_loss");
  require_finite(pred, "nsf_loss");
  for (double p : gt_heatmap.values()) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("nsf_loss: ground-truth value outside [0,1]");
    }
  }

  std::size_t positives = 0;
  for (double p : gt_heatmap.values()) {
    positives += p == 1.0 ? 1 : 0;
  }
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, positives));

  LossResult out{0.0, DenseGrid(pred.height(), pred.width(), 0.0)};
  NeumaierSum acc;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const auto [q, active] = clamp_prob(pred[j], cfg.prob_eps);
    const double p = gt_heatmap[j];
    double term = 0.0;
    double dterm = 0.0;
    if (p == 1.0) {
      const double one_minus = 1.0 - q;
      const double log_q = std::log(q);
      const double focal = std::pow(one_minus, cfg.gamma);
      term = focal * log_q;
      const double dfocal =
          cfg.gamma == 0.0 ? 0.0 : -cfg.gamma * std::pow(one_minus, cfg.gamma - 1.0);
      dterm = dfocal * log_q + focal / q;
    } else {
      const double weight = LossConfig::kNegativeWeight * std::pow(1.0 - p, cfg.delta);
      term = weight * std::pow(q, cfg.gamma) * std::log(1.0 - q);
      dterm = weight * neg_term_derivative(q, cfg.gamma);
    }
    acc.add(term);
    out.grad[j] = active ? -norm * dterm : 0.0;
  }
  out.value = -norm * acc.value();
  return out;
}

std::vector<std::size_t> fp_region(const DenseGrid& gt_heatmap, const DenseGrid& pred,
                                   const LossConfig& cfg) {
  require_same_shape(gt_heatmap, pred, "fp_region");
  std::vector<std::size_t> region;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    if (gt_heatmap[j] == 0.0 && pred[j] > cfg.fp_region_thresh) {
      region.push_back(j);
    }
  }
  return region;
}

LossResult fp_loss(const DenseGrid& pred, std::span<const std::size_t> region,
                   const LossConfig& cfg) {
  require_finite(pred, "fp_loss");
  LossResult out{0.0, DenseGrid(pred.height(), pred.width(), 0.0)};
  if (region.empty()) {
    return out;
  }
  const double norm = 1.0 / static_cast<double>(region.size());
  NeumaierSum acc;
  for (std::size_t j : region) {
    if (j >= pred.size()) {
      throw ValidationError("fp_loss: region index " + std::to_string(j) + " out of range");
    }
    const auto [q, active] = clamp_prob(pred[j], cfg.prob_eps);
    acc.add(std::pow(q, cfg.gamma) * std::log(1.0 - q));
    // Duplicate indices count twice, consistent with the value.
    out.grad[j] += active ? -norm * neg_term_derivative(q, cfg.gamma) : 0.0;
  }
  out.value = -norm * acc.value();
  return out;
}

LossResult mse_loss(const DenseGrid& pred_density, const DenseGrid& gt_density) {
  require_same_shape(pred_density, gt_density, "mse_loss");
  require_finite(pred_density, "mse_loss");
  require_finite(gt_density, "mse_loss");
  const double n = static_cast<double>(pred_density.size());
  LossResult out{0.0, DenseGrid(pred_density.height(), pred_density.width(), 0.0)};
  NeumaierSum acc;
  for (std::size_t j = 0; j < pred_density.size(); ++j) {
    const double diff = pred_density[j] - gt_density[j];
    acc.add(diff * diff);
    out.grad[j] = 2.0 * diff / n;
  }
  out.value = acc.value() / n;
  return out;
}

TotalLoss total_loss(const LossResult& nsf, const LossResult& fp, const LossResult& reg,
                     const LossConfig& cfg) {
  require_same_shape(nsf.grad, fp.grad, "total_loss");
  TotalLoss out{nsf.value + cfg.lambda1 * fp.value + cfg.lambda2 * reg.value,
                nsf.value,
                fp.value,
                reg.value,
                nsf.grad,
                reg.grad};
  for (std::size_t j = 0; j < out.grad_heatmap.size(); ++j) {
    out.grad_heatmap[j] += cfg.lambda1 * fp.grad[j];
  }
  for (std::size_t j = 0; j < out.grad_density.size(); ++j) {
    out.grad_density[j] *= cfg.lambda2;
  }
  return out;
}

TotalLoss evaluate_total_loss(const DenseGrid& pred_heatmap, const DenseGrid& gt_heatmap,
                              const DenseGrid& pred_density, const DenseGrid& gt_density,
                              const LossConfig& cfg) {
  const LossResult nsf = nsf_loss(pred_heatmap, gt_heatmap, cfg);
  const auto region = fp_region(gt_heatmap, pred_heatmap, cfg);
  const LossResult fp = fp_loss(pred_heatmap, region, cfg);
  const LossResult reg = mse_loss(pred_density, gt_density);
  return total_loss(nsf, fp, reg, cfg);
}

}  // namespace densepoint
