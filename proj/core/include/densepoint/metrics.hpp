#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "densepoint/annotation.hpp"
#include "densepoint/decoder.hpp"

namespace densepoint {

// small: radius min(h,w)/2 (strict); large: sqrt(h^2 + w^2)/2 (lenient).
enum class MatchMode { small, large };

const char* to_string(MatchMode mode);

double match_radius(const PointAnnotation& gt, MatchMode mode);

struct MatchResult {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (pred index, gt index)
  double total_distance = 0.0;
};

// A prediction may match a ground truth iff their distance is strictly below
// that ground truth's radius. Returns a maximum-cardinality matching; among
// those, one of minimum total distance.
MatchResult match_points(std::span<const Detection> preds, std::span<const PointAnnotation> gts,
                         MatchMode mode);

struct LocalizationScores {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  // Ratios with 0 for any zero denominator.
  static LocalizationScores from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
  friend bool operator==(const LocalizationScores&, const LocalizationScores&) = default;
};

struct CountingScores {
  double mae = 0.0;
  double mse = 0.0;               // root mean squared error
  std::optional<double> nae;      // absent when every ground-truth count is 0

  friend bool operator==(const CountingScores&, const CountingScores&) = default;
};

struct CountPair {
  double predicted = 0.0;
  std::size_t truth = 0;
};

// NAE averages |p - g| / g over pairs with g > 0 only.
CountingScores counting_scores(std::span<const CountPair> pairs);

struct ImageEvaluation {
  std::vector<Detection> detections;
  ImageRecord record;
  double predicted_count = 0.0;
};

struct EvalReport {
  std::size_t images = 0;
  LocalizationScores small;
  LocalizationScores large;
  CountingScores counting;
  std::optional<double> threshold;  // decode threshold the detections were produced with

  const LocalizationScores& localization(MatchMode mode) const {
    return mode == MatchMode::small ? small : large;
  }
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// TP/FP/FN are summed over images before ratios are taken (micro-average).
EvalReport evaluate(std::span<const ImageEvaluation> dataset);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_to_table(const EvalReport& report);

}  // namespace densepoint
