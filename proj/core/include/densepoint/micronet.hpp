#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "densepoint/grid.hpp"
#include "densepoint/layers.hpp"
#include "densepoint/rng.hpp"

namespace densepoint {

// A shared trunk producing stride-2 features, a localization head that
// upsamples back to full resolution and ends in a sigmoid, and a counting
// head that stays at stride 2.
struct MicroNetSpec {
  int input_channels = 1;
  std::vector<LayerSpec> trunk;
  std::vector<LayerSpec> loc_head;
  std::vector<LayerSpec> count_head;

  // Structural checks that do not depend on the input size.
  void validate() const;
  std::string describe() const;
  friend bool operator==(const MicroNetSpec&, const MicroNetSpec&) = default;
};

// Trunk:  conv(k3,s1,16)+ReLU, conv(k3,s2,32)+ReLU, conv(k3,s1,32)+ReLU
// Loc:    deconv(k4,s2,16)+ReLU, conv(k3,s1,8)+ReLU, conv(k1,s1,1)+Sigmoid
// Count:  conv(k3,d2,16)+ReLU, conv(k3,d4,16)+ReLU, conv(k3,s1,8)+PReLU,
//         conv(k1,s1,1)+PReLU
MicroNetSpec default_micronet_spec();

// Same topology with 4-channel layers and two conv-type layers per head; used
// for finite-difference checks.
MicroNetSpec reduced_micronet_spec();

enum class Branch { trunk, loc, count };

struct Prediction {
  DenseGrid heatmap;  // input size, values in (0,1)
  DenseGrid density;  // ceil(input / 2)
};

// Activations of every layer, kept for the backward pass.
struct ForwardTrace {
  std::vector<FeatureMap> trunk;  // [0] is the input image
  std::vector<FeatureMap> loc;    // [0] aliases the trunk output
  std::vector<FeatureMap> count;
};

class MicroNet {
 public:
  // All parameters zero except PReLU slopes (0.25).
  explicit MicroNet(MicroNetSpec spec);

  // Fan-in scaled uniform weights, zero biases, PReLU slopes 0.25 and the last
  // localization bias at logit(0.01).
  static MicroNet initialized(MicroNetSpec spec, Rng& rng);

  const MicroNetSpec& spec() const { return spec_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  void set_parameters(std::span<const double> values);

  std::span<double> layer_parameters(Branch branch, std::size_t layer);
  std::span<const double> layer_parameters(Branch branch, std::size_t layer) const;

  // FNV-1a of describe(); stored in checkpoints.
  std::uint64_t architecture_digest() const;

  // Input must have even height and width.
  Prediction forward(const DenseGrid& image) const;
  ForwardTrace forward_trace(const DenseGrid& image) const;
  static Prediction prediction_of(const ForwardTrace& trace);

  // Gradient of sum(grad_heatmap * heatmap) + sum(grad_density * density) with
  // respect to every parameter, laid out like parameters().
  std::vector<double> backward(const DenseGrid& image, const DenseGrid& grad_heatmap,
                               const DenseGrid& grad_density) const;
  std::vector<double> backward(const ForwardTrace& trace, const DenseGrid& grad_heatmap,
                               const DenseGrid& grad_density) const;

 private:
  const std::vector<LayerSpec>& layers(Branch branch) const;
  std::size_t offset(Branch branch, std::size_t layer) const;

  MicroNetSpec spec_;
  std::vector<double> params_;
  std::vector<std::size_t> trunk_offsets_;
  std::vector<std::size_t> loc_offsets_;
  std::vector<std::size_t> count_offsets_;
};

// Checkpoint: "DPW1", u64 LE architecture digest, u64 LE parameter count,
// then the parameters as f64 LE.
void save_checkpoint(const MicroNet& net, const std::filesystem::path& path);
MicroNet load_checkpoint(const std::filesystem::path& path, const MicroNetSpec& spec);

std::uint64_t fnv1a64(std::string_view text);

}  // namespace densepoint
