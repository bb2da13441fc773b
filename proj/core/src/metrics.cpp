#include "densepoint/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "densepoint/errors.hpp"

namespace densepoint {

using json = nlohmann::json;

const char* to_string(MatchMode mode) { return mode == MatchMode::small ? "small" : "large"; }

double match_radius(const PointAnnotation& gt, MatchMode mode) {
  if (!(gt.box_w > 0.0) || !(gt.box_h > 0.0)) {
    throw ValidationError("match_radius: ground-truth box must be positive");
  }
  return mode == MatchMode::small ? std::min(gt.box_w, gt.box_h) / 2.0
                                  : std::hypot(gt.box_w, gt.box_h) / 2.0;
}

namespace {

// Min-cost assignment of every row to a distinct column (rows <= cols).
// cost is row-major rows x cols. Returns the column chosen for each row.
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t rows,
                                          std::size_t cols) {
  const double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting path with potentials, 1-based with a virtual column 0.
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> owner(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(rows, 0);
  for (std::size_t j = 1; j <= cols; ++j) {
    if (owner[j] != 0) {
      assignment[owner[j] - 1] = j - 1;
    }
  }
  return assignment;
}

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
  std::vector<std::size_t> parent;
};

struct Edge {
  std::size_t pred;
  std::size_t gt;
  double distance;
};

}  // namespace

MatchResult match_points(std::span<const Detection> preds, std::span<const PointAnnotation> gts,
                         MatchMode mode) {
  std::vector<double> radius(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    radius[g] = match_radius(gts[g], mode);
  }

  std::vector<Edge> edges;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double d = std::hypot(static_cast<double>(preds[p].x) - gts[g].x,
                                  static_cast<double>(preds[p].y) - gts[g].y);
      if (d < radius[g]) {
        edges.push_back({p, g, d});
      }
    }
  }

  // Nodes 0..P-1 are predictions, P..P+G-1 ground truths. Matchings never
  // cross connected components, so each component is solved on its own.
  const std::size_t np = preds.size();
  DisjointSets sets(np + gts.size());
  for (const Edge& e : edges) {
    sets.unite(e.pred, np + e.gt);
  }
  std::vector<std::vector<std::size_t>> component_edges(np + gts.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    component_edges[sets.find(edges[k].pred)].push_back(k);
  }

  MatchResult result;
  for (const auto& edge_ids : component_edges) {
    if (edge_ids.empty()) {
      continue;
    }
    std::vector<std::size_t> comp_preds, comp_gts;
    for (std::size_t k : edge_ids) {
      comp_preds.push_back(edges[k].pred);
      comp_gts.push_back(edges[k].gt);
    }
    std::sort(comp_preds.begin(), comp_preds.end());
    comp_preds.erase(std::unique(comp_preds.begin(), comp_preds.end()), comp_preds.end());
    std::sort(comp_gts.begin(), comp_gts.end());
    comp_gts.erase(std::unique(comp_gts.begin(), comp_gts.end()), comp_gts.end());

    // Non-edges cost more than any sum of real edges, so the optimum first
    // maximises the number of real pairs and then minimises their distance.
    double penalty = 1.0;
    for (std::size_t k : edge_ids) {
      penalty += edges[k].distance;
    }
    const bool preds_are_rows = comp_preds.size() <= comp_gts.size();
    const std::size_t rows = preds_are_rows ? comp_preds.size() : comp_gts.size();
    const std::size_t cols = preds_are_rows ? comp_gts.size() : comp_preds.size();
    std::vector<double> cost(rows * cols, penalty);
    std::vector<double> dist(rows * cols, -1.0);
    for (std::size_t k : edge_ids) {
      const auto pi = static_cast<std::size_t>(
          std::lower_bound(comp_preds.begin(), comp_preds.end(), edges[k].pred) - comp_preds.begin());
      const auto gi = static_cast<std::size_t>(
          std::lower_bound(comp_gts.begin(), comp_gts.end(), edges[k].gt) - comp_gts.begin());
      const std::size_t cell = preds_are_rows ? pi * cols + gi : gi * cols + pi;
      cost[cell] = edges[k].distance;
      dist[cell] = edges[k].distance;
    }
    const auto assignment = solve_assignment(cost, rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t c = assignment[r];
      const double d = dist[r * cols + c];
      if (d < 0.0) {
        continue;
      }
      const std::size_t p = preds_are_rows ? comp_preds[r] : comp_preds[c];
      const std::size_t g = preds_are_rows ? comp_gts[c] : comp_gts[r];
      result.pairs.emplace_back(p, g);
      result.total_distance += d;
    }
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  result.tp = result.pairs.size();
  result.fp = preds.size() - result.tp;
  result.fn = gts.size() - result.tp;
  return result;
}

LocalizationScores LocalizationScores::from_counts(std::size_t tp, std::size_t fp,
                                                   std::size_t fn) {
  LocalizationScores s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  const auto dtp = static_cast<double>(tp);
  s.precision = tp + fp == 0 ? 0.0 : dtp / static_cast<double>(tp + fp);
  s.recall = tp + fn == 0 ? 0.0 : dtp / static_cast<double>(tp + fn);
  s.f1 = s.precision + s.recall == 0.0
             ? 0.0
             : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

CountingScores counting_scores(std::span<const CountPair> pairs) {
  if (pairs.empty()) {
    throw ValidationError("counting_scores: empty list");
  }
  double abs_sum = 0.0, sq_sum = 0.0, rel_sum = 0.0;
  std::size_t rel_n = 0;
  for (const CountPair& p : pairs) {
    const double truth = static_cast<double>(p.truth);
    const double err = p.predicted - truth;
    abs_sum += std::abs(err);
    sq_sum += err * err;
    if (p.truth > 0) {
      rel_sum += std::abs(err) / truth;
      ++rel_n;
    }
  }
  const auto n = static_cast<double>(pairs.size());
  CountingScores s;
  s.mae = abs_sum / n;
  s.mse = std::sqrt(sq_sum / n);
  if (rel_n > 0) {
    s.nae = rel_sum / static_cast<double>(rel_n);
  }
  return s;
}

EvalReport evaluate(std::span<const ImageEvaluation> dataset) {
  if (dataset.empty()) {
    throw ValidationError("evaluate: empty dataset");
  }
  std::size_t tp[2] = {0, 0}, fp[2] = {0, 0}, fn[2] = {0, 0};
  std::vector<CountPair> counts;
  counts.reserve(dataset.size());
  for (const ImageEvaluation& item : dataset) {
    for (int m = 0; m < 2; ++m) {
      const MatchResult r = match_points(item.detections, item.record.points,
                                         m == 0 ? MatchMode::small : MatchMode::large);
      tp[m] += r.tp;
      fp[m] += r.fp;
      fn[m] += r.fn;
    }
    counts.push_back({item.predicted_count, item.record.points.size()});
  }
  EvalReport report;
  report.images = dataset.size();
  report.small = LocalizationScores::from_counts(tp[0], fp[0], fn[0]);
  report.large = LocalizationScores::from_counts(tp[1], fp[1], fn[1]);
  report.counting = counting_scores(counts);
  return report;
}

namespace {

json scores_to_json(const LocalizationScores& s) {
  return {{"tp", s.tp},
          {"fp", s.fp},
          {"fn", s.fn},
          {"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1}};
}

LocalizationScores scores_from_json(const json& j) {
  LocalizationScores s;
  s.tp = j.at("tp").get<std::size_t>();
  s.fp = j.at("fp").get<std::size_t>();
  s.fn = j.at("fn").get<std::size_t>();
  s.precision = j.at("precision").get<double>();
  s.recall = j.at("recall").get<double>();
  s.f1 = j.at("f1").get<double>();
  return s;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  json j;
  j["images"] = report.images;
  j["threshold"] = report.threshold ? json(*report.threshold) : json(nullptr);
  j["localization"] = {{"small", scores_to_json(report.small)},
                       {"large", scores_to_json(report.large)}};
  j["counting"] = {{"mae", report.counting.mae},
                   {"mse", report.counting.mse},
                   {"nae", report.counting.nae ? json(*report.counting.nae) : json(nullptr)}};
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.images = j.at("images").get<std::size_t>();
    if (!j.at("threshold").is_null()) {
      r.threshold = j.at("threshold").get<double>();
    }
    r.small = scores_from_json(j.at("localization").at("small"));
    r.large = scores_from_json(j.at("localization").at("large"));
    const json& c = j.at("counting");
    r.counting.mae = c.at("mae").get<double>();
    r.counting.mse = c.at("mse").get<double>();
    if (!c.at("nae").is_null()) {
      r.counting.nae = c.at("nae").get<double>();
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
}

std::string report_to_table(const EvalReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "images: %zu", report.images);
  out += line;
  if (report.threshold) {
    std::snprintf(line, sizeof line, "    threshold: %.2f", *report.threshold);
    out += line;
  }
  out += "\n\n";
  std::snprintf(line, sizeof line, "%-8s %6s %6s %6s %9s %9s %9s\n", "radius", "TP", "FP", "FN",
                "Pre.", "Rec.", "F1");
  out += line;
  for (MatchMode mode : {MatchMode::small, MatchMode::large}) {
    const LocalizationScores& s = report.localization(mode);
    std::snprintf(line, sizeof line, "%-8s %6zu %6zu %6zu %9.4f %9.4f %9.4f\n",
                  mode == MatchMode::small ? "sigma_s" : "sigma_l", s.tp, s.fp, s.fn,
                  s.precision, s.recall, s.f1);
    out += line;
  }
  out += "\n";
  std::snprintf(line, sizeof line, "MAE %.4f   MSE %.4f   NAE ", report.counting.mae,
                report.counting.mse);
  out += line;
  if (report.counting.nae) {
    std::snprintf(line, sizeof line, "%.4f\n", *report.counting.nae);
    out += line;
  } else {
    out += "n/a\n";
  }
  return out;
}

}  // namespace densepoint
