#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "densepoint/annotation.hpp"
#include "densepoint/losses.hpp"
#include "densepoint/micronet.hpp"
#include "densepoint/supervision.hpp"

namespace densepoint {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias-corrected moment estimates.
class Adam {
 public:
  Adam(std::size_t parameter_count, AdamConfig cfg);

  void step(std::span<double> params, std::span<const double> grads);
  std::size_t steps() const { return steps_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t steps_ = 0;
};

struct TrainConfig {
  int epochs = 60;
  int batch = 1;
  AdamConfig adam;
  int crop = 64;            // square crops; must not exceed the training images
  double flip_prob = 0.5;   // horizontal flip probability
  std::uint64_t seed = 0;   // drives shuffling, crops and flips

  void validate() const;
};

struct EpochLoss {
  int epoch = 0;  // 1-based
  double nsf = 0.0;
  double fp = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<EpochLoss> curve;
  std::size_t steps = 0;
};

using EpochObserver = std::function<void(const EpochLoss&)>;

// Each epoch visits the dataset once in a shuffled order, in batches. For
// every sample: random crop, random horizontal flip, targets built on the
// crop, forward, total loss, backward. Gradients are averaged over the batch
// before an Adam step. A non-finite loss throws NumericalError.
TrainResult train(MicroNet& net, std::span<const ImageRecord> dataset, const TrainConfig& cfg,
                  const LossConfig& loss_cfg, const SupervisionConfig& sup_cfg,
                  const EpochObserver& observer = {});

// "epoch,l_nsf,l_fp,l_r,total" with 17 significant digits.
std::string loss_curve_csv(std::span<const EpochLoss> curve);

}  // namespace densepoint
