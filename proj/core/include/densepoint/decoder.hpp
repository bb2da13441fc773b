#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "densepoint/annotation.hpp"
#include "densepoint/grid.hpp"

namespace densepoint {

struct Detection {
  int x = 0;  // column
  int y = 0;  // row
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DecodeConfig {
  double threshold = 0.4;
  double search_lo = 0.3;
  double search_hi = 0.5;
  double search_step = 0.01;

  void validate_search() const;
};

// Pixels not exceeded by any in-bounds 3x3 neighbour. A 4-connected run of
// equal-valued candidates yields only its row-major-first pixel. Row-major
// order, unthresholded.
std::vector<Detection> local_peaks(const DenseGrid& heatmap);

// local_peaks with confidence >= threshold, by descending confidence then
// row-major position.
std::vector<Detection> decode(const DenseGrid& heatmap, const DecodeConfig& cfg);

double count_from_density(const DenseGrid& density);

// search_lo, search_lo + step, ..., search_hi (both ends inclusive).
std::vector<double> threshold_grid(const DecodeConfig& cfg);

enum class MatchMode;

struct ValidationImage {
  DenseGrid heatmap;
  ImageRecord record;
};

// Threshold from threshold_grid() with the best micro-averaged F1 over the
// set; ties go to the larger threshold.
double search_threshold(std::span<const ValidationImage> val_set, const DecodeConfig& cfg,
                        MatchMode mode);

// One JSON object per line: {"id": str, "points": [[x, y, conf], ...]}
void write_detections_jsonl(std::ostream& out, const std::string& id,
                            std::span<const Detection> detections);

struct ImageDetections {
  std::string id;
  std::vector<Detection> detections;
};
std::vector<ImageDetections> parse_detections_jsonl(const std::string& text);

}  // namespace densepoint
