#include "densepoint/micronet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "densepoint/errors.hpp"
#include "densepoint/io.hpp"

namespace densepoint {

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

MicroNetSpec default_micronet_spec() {
  MicroNetSpec s;
  s.input_channels = 1;
  s.trunk = {LayerSpec::conv(1, 16, 3, 1, 1),  LayerSpec::relu(16),
             LayerSpec::conv(16, 32, 3, 2, 1), LayerSpec::relu(32),
             LayerSpec::conv(32, 32, 3, 1, 1), LayerSpec::relu(32)};
  s.loc_head = {LayerSpec::deconv(32, 16, 4, 2, 1), LayerSpec::relu(16),
                LayerSpec::conv(16, 8, 3, 1, 1),    LayerSpec::relu(8),
                LayerSpec::conv(8, 1, 1, 1, 0),     LayerSpec::sigmoid(1)};
  s.count_head = {LayerSpec::conv(32, 16, 3, 1, 2, 2), LayerSpec::relu(16),
                  LayerSpec::conv(16, 16, 3, 1, 4, 4), LayerSpec::relu(16),
                  LayerSpec::conv(16, 8, 3, 1, 1),     LayerSpec::prelu(8),
                  LayerSpec::conv(8, 1, 1, 1, 0),      LayerSpec::prelu(1)};
  return s;
}

MicroNetSpec reduced_micronet_spec() {
  MicroNetSpec s;
  s.input_channels = 1;
  s.trunk = {LayerSpec::conv(1, 4, 3, 2, 1), LayerSpec::relu(4)};
  s.loc_head = {LayerSpec::deconv(4, 4, 4, 2, 1), LayerSpec::relu(4),
                LayerSpec::conv(4, 1, 1, 1, 0), LayerSpec::sigmoid(1)};
  s.count_head = {LayerSpec::conv(4, 4, 3, 1, 1), LayerSpec::prelu(4),
                  LayerSpec::conv(4, 1, 1, 1, 0), LayerSpec::prelu(1)};
  return s;
}

void MicroNetSpec::validate() const {
  if (trunk.empty() || loc_head.empty() || count_head.empty()) {
    throw ValidationError("MicroNetSpec: trunk and both heads need at least one layer");
  }
  // Shapes are checked on a nominal 16x16 input; size-specific checks happen in forward().
  FeatureShape shape{input_channels, 16, 16};
  for (const LayerSpec& l : trunk) shape = l.output_shape(shape);
  FeatureShape loc = shape;
  for (const LayerSpec& l : loc_head) loc = l.output_shape(loc);
  FeatureShape count = shape;
  for (const LayerSpec& l : count_head) count = l.output_shape(count);
  if (loc.channels != 1 || count.channels != 1) {
    throw ValidationError("MicroNetSpec: both heads must end with a single channel");
  }
  if (loc_head.back().kind != LayerKind::sigmoid) {
    throw ValidationError("MicroNetSpec: localization head must end in a sigmoid");
  }
  if (loc.height != 16 || loc.width != 16 || count.height != 8 || count.width != 8) {
    throw ValidationError("MicroNetSpec: heads must output stride 1 (loc) and stride 2 (count)");
  }
}

std::string MicroNetSpec::describe() const {
  std::string s = "in" + std::to_string(input_channels) + "|trunk";
  for (const LayerSpec& l : trunk) s += ":" + l.describe();
  s += "|loc";
  for (const LayerSpec& l : loc_head) s += ":" + l.describe();
  s += "|count";
  for (const LayerSpec& l : count_head) s += ":" + l.describe();
  return s;
}

MicroNet::MicroNet(MicroNetSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t total = 0;
  auto lay_out = [&total](const std::vector<LayerSpec>& branch, std::vector<std::size_t>& offsets) {
    for (const LayerSpec& l : branch) {
      offsets.push_back(total);
      total += l.parameter_count();
    }
  };
  lay_out(spec_.trunk, trunk_offsets_);
  lay_out(spec_.loc_head, loc_offsets_);
  lay_out(spec_.count_head, count_offsets_);
  params_.assign(total, 0.0);
  for (Branch b : {Branch::trunk, Branch::loc, Branch::count}) {
    const auto& branch = layers(b);
    for (std::size_t i = 0; i < branch.size(); ++i) {
      if (branch[i].kind == LayerKind::prelu) {
        auto slopes = layer_parameters(b, i);
        std::fill(slopes.begin(), slopes.end(), 0.25);
      }
    }
  }
}

MicroNet MicroNet::initialized(MicroNetSpec spec, Rng& rng) {
  MicroNet net(std::move(spec));
  for (Branch b : {Branch::trunk, Branch::loc, Branch::count}) {
    const auto& branch = net.layers(b);
    for (std::size_t i = 0; i < branch.size(); ++i) {
      const LayerSpec& l = branch[i];
      if (l.kind != LayerKind::conv && l.kind != LayerKind::deconv) {
        continue;
      }
      auto p = net.layer_parameters(b, i);
      const std::size_t weights = p.size() - static_cast<std::size_t>(l.out_channels);
      // A stride-s transposed conv sees in*k*k/s^2 inputs per output pixel.
      double fan_in = static_cast<double>(l.in_channels) * l.kernel * l.kernel;
      if (l.kind == LayerKind::deconv) {
        fan_in /= static_cast<double>(l.stride) * l.stride;
      }
      const double bound = std::sqrt(6.0 / fan_in);
      for (std::size_t k = 0; k < weights; ++k) {
        p[k] = rng.uniform(-bound, bound);
      }
    }
  }
  // Sigmoid prior of 0.01 on the heatmap.
  const auto& loc = net.spec_.loc_head;
  for (std::size_t i = loc.size(); i-- > 0;) {
    if (loc[i].kind == LayerKind::conv || loc[i].kind == LayerKind::deconv) {
      auto p = net.layer_parameters(Branch::loc, i);
      p[p.size() - 1] = std::log(0.01 / 0.99);
      break;
    }
  }
  return net;
}

void MicroNet::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw ValidationError("MicroNet::set_parameters: expected " + std::to_string(params_.size()) +
                          " values, got " + std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

const std::vector<LayerSpec>& MicroNet::layers(Branch branch) const {
  switch (branch) {
    case Branch::trunk: return spec_.trunk;
    case Branch::loc: return spec_.loc_head;
    case Branch::count: return spec_.count_head;
  }
  return spec_.trunk;
}

std::size_t MicroNet::offset(Branch branch, std::size_t layer) const {
  const auto& offsets = branch == Branch::trunk ? trunk_offsets_
                        : branch == Branch::loc ? loc_offsets_
                                                : count_offsets_;
  if (layer >= offsets.size()) {
    throw ValidationError("MicroNet: layer index out of range");
  }
  return offsets[layer];
}

std::span<double> MicroNet::layer_parameters(Branch branch, std::size_t layer) {
  return std::span(params_).subspan(offset(branch, layer), layers(branch)[layer].parameter_count());
}

std::span<const double> MicroNet::layer_parameters(Branch branch, std::size_t layer) const {
  return std::span(params_).subspan(offset(branch, layer), layers(branch)[layer].parameter_count());
}

std::uint64_t MicroNet::architecture_digest() const { return fnv1a64(spec_.describe()); }

ForwardTrace MicroNet::forward_trace(const DenseGrid& image) const {
  if (spec_.input_channels != 1) {
    throw ValidationError("MicroNet::forward: only single-channel input is supported");
  }
  if (image.height() % 2 != 0 || image.width() % 2 != 0) {
    throw ValidationError("MicroNet::forward: input dimensions must be even, got " +
                          std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
  ForwardTrace trace;
  FeatureMap input(FeatureShape{1, static_cast<int>(image.height()), static_cast<int>(image.width())});
  std::copy(image.values().begin(), image.values().end(), input.data.begin());
  trace.trunk.push_back(std::move(input));
  for (std::size_t i = 0; i < spec_.trunk.size(); ++i) {
    trace.trunk.push_back(layer_forward(spec_.trunk[i], layer_parameters(Branch::trunk, i), trace.trunk.back()));
  }
  trace.loc.push_back(trace.trunk.back());
  for (std::size_t i = 0; i < spec_.loc_head.size(); ++i) {
    trace.loc.push_back(layer_forward(spec_.loc_head[i], layer_parameters(Branch::loc, i), trace.loc.back()));
  }
  trace.count.push_back(trace.trunk.back());
  for (std::size_t i = 0; i < spec_.count_head.size(); ++i) {
    trace.count.push_back(layer_forward(spec_.count_head[i], layer_parameters(Branch::count, i), trace.count.back()));
  }

  const FeatureShape& loc = trace.loc.back().shape;
  const FeatureShape& count = trace.count.back().shape;
  if (static_cast<std::size_t>(loc.height) != image.height() ||
      static_cast<std::size_t>(loc.width) != image.width() ||
      static_cast<std::size_t>(count.height) != image.height() / 2 ||
      static_cast<std::size_t>(count.width) != image.width() / 2) {
    throw ValidationError("MicroNet::forward: head output shapes do not match the stride contract");
  }
  return trace;
}

Prediction MicroNet::prediction_of(const ForwardTrace& trace) {
  const FeatureMap& loc = trace.loc.back();
  const FeatureMap& count = trace.count.back();
  return {DenseGrid(static_cast<std::size_t>(loc.shape.height), static_cast<std::size_t>(loc.shape.width), loc.data),
          DenseGrid(static_cast<std::size_t>(count.shape.height), static_cast<std::size_t>(count.shape.width), count.data)};
}

Prediction MicroNet::forward(const DenseGrid& image) const { return prediction_of(forward_trace(image)); }

std::vector<double> MicroNet::backward(const DenseGrid& image, const DenseGrid& grad_heatmap,
                                       const DenseGrid& grad_density) const {
  return backward(forward_trace(image), grad_heatmap, grad_density);
}

std::vector<double> MicroNet::backward(const ForwardTrace& trace, const DenseGrid& grad_heatmap,
                                       const DenseGrid& grad_density) const {
  const FeatureShape loc_shape = trace.loc.back().shape;
  const FeatureShape count_shape = trace.count.back().shape;
  if (grad_heatmap.height() != static_cast<std::size_t>(loc_shape.height) ||
      grad_heatmap.width() != static_cast<std::size_t>(loc_shape.width) ||
      grad_density.height() != static_cast<std::size_t>(count_shape.height) ||
      grad_density.width() != static_cast<std::size_t>(count_shape.width)) {
    throw ValidationError("MicroNet::backward: gradient grids do not match the output shapes");
  }
  std::vector<double> grads(params_.size(), 0.0);
  auto grad_span = [&](Branch b, std::size_t i) {
    return std::span(grads).subspan(offset(b, i), layers(b)[i].parameter_count());
  };

  FeatureMap g(loc_shape);
  std::copy(grad_heatmap.values().begin(), grad_heatmap.values().end(), g.data.begin());
  for (std::size_t i = spec_.loc_head.size(); i-- > 0;) {
    g = layer_backward(spec_.loc_head[i], layer_parameters(Branch::loc, i), trace.loc[i],
                       trace.loc[i + 1], g, grad_span(Branch::loc, i));
  }
  FeatureMap trunk_grad = std::move(g);

  FeatureMap c(count_shape);
  std::copy(grad_density.values().begin(), grad_density.values().end(), c.data.begin());
  for (std::size_t i = spec_.count_head.size(); i-- > 0;) {
    c = layer_backward(spec_.count_head[i], layer_parameters(Branch::count, i), trace.count[i],
                       trace.count[i + 1], c, grad_span(Branch::count, i));
  }
  for (std::size_t k = 0; k < trunk_grad.data.size(); ++k) {
    trunk_grad.data[k] += c.data[k];
  }

  for (std::size_t i = spec_.trunk.size(); i-- > 0;) {
    trunk_grad = layer_backward(spec_.trunk[i], layer_parameters(Branch::trunk, i), trace.trunk[i],
                                trace.trunk[i + 1], trunk_grad, grad_span(Branch::trunk, i));
  }
  return grads;
}

namespace {
constexpr char kCheckpointMagic[4] = {'D', 'P', 'W', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}
}  // namespace

void save_checkpoint(const MicroNet& net, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u64(bytes, net.architecture_digest());
  put_u64(bytes, net.parameter_count());
  for (double v : net.parameters()) put_u64(bytes, std::bit_cast<std::uint64_t>(v));
  write_binary_file(path, bytes);
}

MicroNet load_checkpoint(const std::filesystem::path& path, const MicroNetSpec& spec) {
  const auto bytes = read_binary_file(path);
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad magic header (expected DPW1)");
  }
  MicroNet net(spec);
  if (get_u64(bytes.data() + 4) != net.architecture_digest()) {
    throw FormatError(path.string() + ": checkpoint was written for a different architecture");
  }
  const std::uint64_t count = get_u64(bytes.data() + 12);
  if (count != net.parameter_count() || bytes.size() != 20 + 8 * count) {
    throw FormatError(path.string() + ": parameter payload length mismatch");
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<double>(get_u64(bytes.data() + 20 + 8 * i));
  }
  net.set_parameters(values);
  return net;
}

}  // namespace densepoint
