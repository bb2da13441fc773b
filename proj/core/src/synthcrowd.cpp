#include "densepoint/synthcrowd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "densepoint/errors.hpp"
#include "densepoint/io.hpp"

namespace densepoint {

namespace {
constexpr int kMaxPlacementAttempts = 10000;
}

void SceneConfig::validate() const {
  if (image_size < 2) {
    throw ConfigError("SceneConfig: image_size must be >= 2");
  }
  if (count_min < 0 || count_max < count_min) {
    throw ConfigError("SceneConfig: need 0 <= count_min <= count_max");
  }
  if (!(radius_min > 0.0) || radius_max < radius_min) {
    throw ConfigError("SceneConfig: need 0 < radius_min <= radius_max");
  }
  if (min_separation < 2.0 * radius_min) {
    throw ConfigError("SceneConfig: min_separation must be >= 2 * radius_min");
  }
  if (!(noise_std >= 0.0)) {
    throw ConfigError("SceneConfig: noise_std must be >= 0");
  }
  if (2.0 * std::ceil(radius_max) >= image_size) {
    throw ConfigError("SceneConfig: heads of radius_max do not fit in the image");
  }
}

ImageRecord generate_scene(const SceneConfig& cfg, Rng& rng, const std::string& id) {
  cfg.validate();
  const auto size = static_cast<std::size_t>(cfg.image_size);
  ImageRecord record;
  record.id = id;
  record.width = size;
  record.height = size;

  const auto count = static_cast<int>(rng.uniform_int(cfg.count_min, cfg.count_max));
  std::vector<double> radii;
  for (int n = 0; n < count; ++n) {
    const double r = rng.uniform(cfg.radius_min, cfg.radius_max);
    // Integer centres in [ceil(r), size-1-ceil(r)] keep the whole blob inside.
    const auto margin = static_cast<std::int64_t>(std::ceil(r));
    const auto hi = static_cast<std::int64_t>(size) - 1 - margin;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      const auto x = static_cast<double>(rng.uniform_int(margin, hi));
      const auto y = static_cast<double>(rng.uniform_int(margin, hi));
      const bool clear = std::all_of(record.points.begin(), record.points.end(), [&](const PointAnnotation& p) {
        return std::hypot(p.x - x, p.y - y) >= cfg.min_separation;
      });
      if (clear) {
        record.points.push_back({x, y, 2.0 * r, 2.0 * r});
        radii.push_back(r);
        placed = true;
      }
    }
    if (!placed) {
      throw ConfigError("generate_scene: could not place head " + std::to_string(n + 1) + " of " +
                        std::to_string(count) + " after " + std::to_string(kMaxPlacementAttempts) +
                        " attempts; density infeasible");
    }
  }

  DenseGrid pixels(size, size, 0.0);
  for (std::size_t i = 0; i < record.points.size(); ++i) {
    const double r = radii[i];
    const auto cx = static_cast<std::ptrdiff_t>(record.points[i].x);
    const auto cy = static_cast<std::ptrdiff_t>(record.points[i].y);
    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(r));
    for (std::ptrdiff_t y = cy - reach; y <= cy + reach; ++y) {
      for (std::ptrdiff_t x = cx - reach; x <= cx + reach; ++x) {
        const double d = std::hypot(static_cast<double>(x - cx), static_cast<double>(y - cy));
        if (d < r) {
          double& cell = pixels(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
          cell = std::max(cell, 0.5 * (1.0 + std::cos(std::numbers::pi * d / r)));
        }
      }
    }
  }
  if (cfg.noise_std > 0.0) {
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      pixels[i] = std::clamp(pixels[i] + cfg.noise_std * rng.normal(), 0.0, 1.0);
    }
  }
  record.pixels = std::move(pixels);
  return record;
}

DatasetSplit generate_split(const SceneConfig& cfg, std::size_t n_train, std::size_t n_val,
                            std::size_t n_test, std::uint64_t seed) {
  cfg.validate();
  Rng master(seed);
  Rng train_rng = master.split();
  Rng val_rng = master.split();
  Rng test_rng = master.split();

  auto make = [&cfg](std::size_t n, Rng& rng, const char* prefix) {
    std::vector<ImageRecord> out;
    out.reserve(n);
    char id[64];
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(id, sizeof id, "%s_%04zu", prefix, i);
      Rng scene_rng = rng.split();
      out.push_back(generate_scene(cfg, scene_rng, id));
    }
    return out;
  };
  DatasetSplit split;
  split.train = make(n_train, train_rng, "train");
  split.val = make(n_val, val_rng, "val");
  split.test = make(n_test, test_rng, "test");
  return split;
}

void write_split(const std::filesystem::path& dir, const std::string& name,
                 const std::vector<ImageRecord>& records) {
  const auto pixel_dir = dir / name;
  std::error_code ec;
  std::filesystem::create_directories(pixel_dir, ec);
  if (ec) {
    throw IoError("cannot create '" + pixel_dir.string() + "': " + ec.message());
  }
  store_annotations(records, dir / (name + ".json"));
  for (const ImageRecord& r : records) {
    if (r.pixels) {
      store_grid(*r.pixels, pixel_dir / (r.id + ".dpg"));
    }
  }
}

std::vector<ImageRecord> read_split(const std::filesystem::path& dir, const std::string& name) {
  std::vector<ImageRecord> records = load_annotations(dir / (name + ".json"));
  for (ImageRecord& r : records) {
    const auto path = dir / name / (r.id + ".dpg");
    if (std::filesystem::exists(path)) {
      r.pixels = load_grid(path);
    }
    r.validate();
  }
  return records;
}

}  // namespace densepoint
