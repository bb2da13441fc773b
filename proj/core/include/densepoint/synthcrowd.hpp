#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "densepoint/annotation.hpp"
#include "densepoint/rng.hpp"

namespace densepoint {

struct SceneConfig {
  int image_size = 128;
  int count_min = 5;
  int count_max = 15;
  double radius_min = 2.0;
  double radius_max = 6.0;
  double min_separation = 6.0;
  double noise_std = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

// Square scene with N ~ U{count_min..count_max} heads on integer pixel
// centres, pairwise at least min_separation apart and at least r from every
// edge. Each head is a cosine blob (1 + cos(pi d / r)) / 2 for d < r; blobs
// combine by maximum. Gaussian noise is added and pixels clamped to [0,1].
// Boxes are 2r x 2r. Throws ConfigError if a head cannot be placed within
// 10,000 attempts.
ImageRecord generate_scene(const SceneConfig& cfg, Rng& rng, const std::string& id = "scene");

struct DatasetSplit {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> val;
  std::vector<ImageRecord> test;
};

// Each split draws from its own stream derived from seed.
DatasetSplit generate_split(const SceneConfig& cfg, std::size_t n_train, std::size_t n_val,
                            std::size_t n_test, std::uint64_t seed);

// Layout: <dir>/<name>.json (annotations) and <dir>/<name>/<id>.dpg (pixels).
void write_split(const std::filesystem::path& dir, const std::string& name,
                 const std::vector<ImageRecord>& records);
std::vector<ImageRecord> read_split(const std::filesystem::path& dir, const std::string& name);

}  // namespace densepoint
