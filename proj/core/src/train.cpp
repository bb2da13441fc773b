#include "densepoint/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "densepoint/errors.hpp"
#include "densepoint/rng.hpp"

namespace densepoint {

Adam::Adam(std::size_t parameter_count, AdamConfig cfg)
    : cfg_(cfg), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ValidationError("Adam::step: size mismatch");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(cfg_.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / correction1;
    const double v_hat = v_[i] / correction2;
    params[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
  }
}

void TrainConfig::validate() const {
  if (epochs < 0 || batch < 1 || crop < 2 || crop % 2 != 0) {
    throw ValidationError("TrainConfig: need epochs >= 0, batch >= 1 and an even crop >= 2");
  }
  if (!(adam.lr >= 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
    throw ValidationError("TrainConfig: invalid Adam hyper-parameters");
  }
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
    throw ValidationError("TrainConfig: flip_prob must lie in [0,1]");
  }
}

TrainResult train(MicroNet& net, std::span<const ImageRecord> dataset, const TrainConfig& cfg,
                  const LossConfig& loss_cfg, const SupervisionConfig& sup_cfg,
                  const EpochObserver& observer) {
  cfg.validate();
  loss_cfg.validate();
  sup_cfg.validate();
  if (dataset.empty()) {
    throw ValidationError("train: empty dataset");
  }
  const auto crop = static_cast<std::size_t>(cfg.crop);
  for (const ImageRecord& r : dataset) {
    if (!r.pixels) {
      throw ValidationError("train: record '" + r.id + "' has no pixels");
    }
    if (r.width < crop || r.height < crop) {
      throw ValidationError("train: record '" + r.id + "' is smaller than the crop size");
    }
  }

  Rng rng(cfg.seed);
  Adam adam(net.parameter_count(), cfg.adam);
  TrainResult result;
  std::vector<std::size_t> order(dataset.size());
  std::vector<double> grads(net.parameter_count());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }

    EpochLoss sums{epoch};
    std::size_t samples = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      std::fill(grads.begin(), grads.end(), 0.0);

      for (std::size_t k = start; k < stop; ++k) {
        const ImageRecord& source = dataset[order[k]];
        const auto x0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(source.width - crop)));
        const auto y0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(source.height - crop)));
        ImageRecord sample = crop_record(source, x0, y0, crop, crop);
        if (rng.bernoulli(cfg.flip_prob)) {
          sample = flip_record_horizontal(sample);
        }
        const DenseGrid gt_heat = make_heatmap(sample, sup_cfg);
        const DenseGrid gt_density = make_density(sample, sup_cfg);

        const ForwardTrace trace = net.forward_trace(*sample.pixels);
        const Prediction pred = MicroNet::prediction_of(trace);
        const TotalLoss loss =
            evaluate_total_loss(pred.heatmap, gt_heat, pred.density, gt_density, loss_cfg);
        if (!std::isfinite(loss.value)) {
          char msg[256];
          std::snprintf(msg, sizeof msg,
                        "train: non-finite loss at step %zu (epoch %d, image '%s'): "
                        "l_nsf=%g l_fp=%g l_r=%g",
                        adam.steps() + 1, epoch, source.id.c_str(), loss.nsf, loss.fp, loss.reg);
          throw NumericalError(msg);
        }
        const std::vector<double> g = net.backward(trace, loss.grad_heatmap, loss.grad_density);
        for (std::size_t i = 0; i < grads.size(); ++i) {
          grads[i] += inv_batch * g[i];
        }
        sums.nsf += loss.nsf;
        sums.fp += loss.fp;
        sums.reg += loss.reg;
        sums.total += loss.value;
        ++samples;
      }
      for (double g : grads) {
        if (!std::isfinite(g)) {
          throw NumericalError("train: non-finite gradient at step " + std::to_string(adam.steps() + 1));
        }
      }
      adam.step(net.parameters(), grads);
    }

    const double n = static_cast<double>(samples);
    EpochLoss mean{epoch, sums.nsf / n, sums.fp / n, sums.reg / n, sums.total / n};
    result.curve.push_back(mean);
    if (observer) {
      observer(mean);
    }
  }
  result.steps = adam.steps();
  return result;
}

std::string loss_curve_csv(std::span<const EpochLoss> curve) {
  std::string out = "epoch,l_nsf,l_fp,l_r,total\n";
  char line[160];
  for (const EpochLoss& e : curve) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.nsf, e.fp, e.reg,
                  e.total);
    out += line;
  }
  return out;
}

}  // namespace densepoint
