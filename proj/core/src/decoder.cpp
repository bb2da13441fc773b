#include "densepoint/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "densepoint/errors.hpp"
#include "densepoint/metrics.hpp"

namespace densepoint {

using json = nlohmann::json;

void DecodeConfig::validate_search() const {
  if (!(search_lo <= search_hi) || !(search_step > 0.0)) {
    throw ValidationError("DecodeConfig: need search_lo <= search_hi and search_step > 0");
  }
}

std::vector<Detection> local_peaks(const DenseGrid& heatmap) {
  const std::size_t h = heatmap.height();
  const std::size_t w = heatmap.width();
  std::vector<char> candidate(heatmap.size(), 0);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t y0 = y == 0 ? 0 : y - 1;
    const std::size_t y1 = std::min(h - 1, y + 1);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t x0 = x == 0 ? 0 : x - 1;
      const std::size_t x1 = std::min(w - 1, x + 1);
      const double v = heatmap(y, x);
      bool is_max = true;
      for (std::size_t ny = y0; ny <= y1 && is_max; ++ny) {
        for (std::size_t nx = x0; nx <= x1; ++nx) {
          if (heatmap(ny, nx) > v) {
            is_max = false;
            break;
          }
        }
      }
      candidate[y * w + x] = is_max ? 1 : 0;
    }
  }

  // Collapse equal-valued 4-connected candidate plateaus onto their first pixel.
  std::vector<Detection> peaks;
  std::vector<char> visited(heatmap.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < heatmap.size(); ++i) {
    if (!candidate[i] || visited[i]) {
      continue;
    }
    const double v = heatmap[i];
    peaks.push_back({static_cast<int>(i % w), static_cast<int>(i / w), v});
    visited[i] = 1;
    stack.assign(1, i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const std::size_t cy = cur / w;
      const std::size_t cx = cur % w;
      auto visit = [&](std::size_t n) {
        if (candidate[n] && !visited[n] && heatmap[n] == v) {
          visited[n] = 1;
          stack.push_back(n);
        }
      };
      if (cy > 0) visit(cur - w);
      if (cy + 1 < h) visit(cur + w);
      if (cx > 0) visit(cur - 1);
      if (cx + 1 < w) visit(cur + 1);
    }
  }
  return peaks;
}

std::vector<Detection> decode(const DenseGrid& heatmap, const DecodeConfig& cfg) {
  std::vector<Detection> peaks = local_peaks(heatmap);
  std::erase_if(peaks, [&](const Detection& d) { return !(d.confidence >= cfg.threshold); });
  std::stable_sort(peaks.begin(), peaks.end(), [](const Detection& a, const Detection& b) {
    return a.confidence > b.confidence;
  });
  return peaks;
}

double count_from_density(const DenseGrid& density) { return density.sum(); }

std::vector<double> threshold_grid(const DecodeConfig& cfg) {
  cfg.validate_search();
  const double tol = 1e-9 * std::max(1.0, cfg.search_step);
  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    // Snap to 1e-12 so 0.3 + 7 * 0.01 reads back as 0.37.
    double tau = std::round((cfg.search_lo + static_cast<double>(i) * cfg.search_step) * 1e12) / 1e12;
    if (tau > cfg.search_hi - tol) {
      grid.push_back(cfg.search_hi);
      break;
    }
    grid.push_back(i == 0 ? cfg.search_lo : tau);
  }
  return grid;
}

double search_threshold(std::span<const ValidationImage> val_set, const DecodeConfig& cfg,
                        MatchMode mode) {
  if (val_set.empty()) {
    throw ValidationError("search_threshold: empty validation set");
  }
  const std::vector<double> taus = threshold_grid(cfg);

  // Decode once at the lowest threshold; higher thresholds are prefixes
  // because decode() sorts by descending confidence.
  std::vector<std::vector<Detection>> candidates;
  candidates.reserve(val_set.size());
  DecodeConfig lowest = cfg;
  lowest.threshold = taus.front();
  for (const ValidationImage& item : val_set) {
    candidates.push_back(decode(item.heatmap, lowest));
  }

  double best_tau = taus.front();
  double best_f1 = -1.0;
  for (double tau : taus) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < val_set.size(); ++i) {
      const auto& dets = candidates[i];
      const auto kept = static_cast<std::size_t>(
          std::find_if(dets.begin(), dets.end(),
                       [&](const Detection& d) { return !(d.confidence >= tau); }) -
          dets.begin());
      const MatchResult m =
          match_points(std::span(dets).first(kept), val_set[i].record.points, mode);
      tp += m.tp;
      fp += m.fp;
      fn += m.fn;
    }
    const double f1 = LocalizationScores::from_counts(tp, fp, fn).f1;
    if (f1 >= best_f1) {
      best_f1 = f1;
      best_tau = tau;
    }
  }
  return best_tau;
}

void write_detections_jsonl(std::ostream& out, const std::string& id,
                            std::span<const Detection> detections) {
  json points = json::array();
  for (const Detection& d : detections) {
    points.push_back(json::array({d.x, d.y, d.confidence}));
  }
  out << json{{"id", id}, {"points", points}}.dump() << '\n';
}

std::vector<ImageDetections> parse_detections_jsonl(const std::string& text) {
  std::vector<ImageDetections> all;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      const json obj = json::parse(line);
      ImageDetections item;
      item.id = obj.at("id").get<std::string>();
      for (const json& p : obj.at("points")) {
        if (!p.is_array() || p.size() != 3) {
          throw FormatError("point must be [x, y, conf]");
        }
        item.detections.push_back({p[0].get<int>(), p[1].get<int>(), p[2].get<double>()});
      }
      all.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw FormatError("detections line " + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("detections line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return all;
}

}  // namespace densepoint
