#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "densepoint/errors.hpp"
#include "densepoint/metrics.hpp"
#include "densepoint/rng.hpp"
#include "oracles.hpp"

using namespace densepoint;

namespace {

struct Instance {
  std::vector<Detection> preds;
  std::vector<PointAnnotation> gts;
};

Instance random_instance(Rng& rng, int max_preds, int max_gts, int extent) {
  Instance in;
  const auto np = rng.uniform_int(0, max_preds);
  const auto ng = rng.uniform_int(0, max_gts);
  for (std::int64_t i = 0; i < np; ++i) {
    in.preds.push_back({static_cast<int>(rng.uniform_int(0, extent)),
                        static_cast<int>(rng.uniform_int(0, extent)), rng.uniform()});
  }
  for (std::int64_t i = 0; i < ng; ++i) {
    in.gts.push_back({static_cast<double>(rng.uniform_int(0, extent)),
                      static_cast<double>(rng.uniform_int(0, extent)),
                      static_cast<double>(rng.uniform_int(1, 8)),
                      static_cast<double>(rng.uniform_int(1, 8))});
  }
  return in;
}

std::vector<double> radii(const std::vector<PointAnnotation>& gts, MatchMode mode) {
  std::vector<double> r;
  for (const auto& g : gts) {
    r.push_back(mode == MatchMode::small ? std::min(g.box_w, g.box_h) / 2.0
                                         : std::sqrt(g.box_w * g.box_w + g.box_h * g.box_h) / 2.0);
  }
  return r;
}

}  // namespace

TEST(MatchRadius, Formulas) {
  const PointAnnotation g{0, 0, 4, 3};
  EXPECT_EQ(match_radius(g, MatchMode::large), 2.5);
  EXPECT_EQ(match_radius(g, MatchMode::small), 1.5);
}

TEST(MatchPoints, ExactHitLarge) {
  const std::vector<Detection> p{{5, 5, 0.9}};
  const std::vector<PointAnnotation> g{{5, 5, 4, 3}};
  const MatchResult m = match_points(p, g, MatchMode::large);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fp, 0u);
  EXPECT_EQ(m.fn, 0u);
}

TEST(MatchPoints, TooFarUnderSmall) {
  const std::vector<Detection> p{{7, 5, 0.9}};
  const std::vector<PointAnnotation> g{{5, 5, 4, 3}};
  const MatchResult m = match_points(p, g, MatchMode::small);
  EXPECT_EQ(m.tp, 0u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(match_points(p, g, MatchMode::large).tp, 1u);
}

TEST(MatchPoints, RadiusIsStrict) {
  const std::vector<Detection> p{{8, 5, 0.9}};
  const std::vector<PointAnnotation> g{{5, 5, 8, 6}};  // large radius exactly 5
  EXPECT_EQ(match_points(p, g, MatchMode::large).tp, 1u);
  const std::vector<Detection> q{{10, 5, 0.9}};
  EXPECT_EQ(match_points(q, g, MatchMode::large).tp, 0u);
}

TEST(MatchPoints, NoPredictions) {
  const std::vector<PointAnnotation> g{{1, 1, 2, 2}, {5, 5, 2, 2}, {9, 9, 2, 2}};
  const MatchResult m = match_points({}, g, MatchMode::large);
  EXPECT_EQ(m.tp, 0u);
  EXPECT_EQ(m.fp, 0u);
  EXPECT_EQ(m.fn, 3u);
}

TEST(MatchPoints, PrefersMaximumCardinalityOverGreedy) {
  // Greedy nearest-first would pair p0-g1 and strand g0.
  const std::vector<Detection> p{{5, 0, 0.9}, {8, 0, 0.8}};
  const std::vector<PointAnnotation> g{{2, 0, 8, 8}, {6, 0, 8, 8}};
  const MatchResult m = match_points(p, g, MatchMode::small);
  EXPECT_EQ(m.tp, 2u);
}

TEST(MatchPoints, MinimumDistanceAmongMaximumMatchings) {
  const std::vector<Detection> p{{0, 0, 0.9}, {3, 0, 0.9}};
  const std::vector<PointAnnotation> g{{3, 0, 10, 10}, {0, 0, 10, 10}};
  const MatchResult m = match_points(p, g, MatchMode::small);
  EXPECT_EQ(m.tp, 2u);
  EXPECT_EQ(m.total_distance, 0.0);
}

TEST(MatchPoints, AgreesWithBruteForce) {
  Rng rng(500);
  for (int t = 0; t < 300; ++t) {
    const Instance in = random_instance(rng, 6, 6, 12);
    for (MatchMode mode : {MatchMode::small, MatchMode::large}) {
      const auto r = radii(in.gts, mode);
      const auto brute = oracle::brute_force_match(in.preds, in.gts, r);
      const MatchResult m = match_points(in.preds, in.gts, mode);
      ASSERT_EQ(m.tp, brute.tp);
      EXPECT_EQ(m.fp, in.preds.size() - m.tp);
      EXPECT_EQ(m.fn, in.gts.size() - m.tp);
      EXPECT_NEAR(m.total_distance, brute.distance, 1e-9);
      ASSERT_EQ(m.pairs.size(), m.tp);
      std::vector<bool> pu(in.preds.size()), gu(in.gts.size());
      for (const auto& [pi, gi] : m.pairs) {
        EXPECT_FALSE(pu[pi]);
        EXPECT_FALSE(gu[gi]);
        pu[pi] = gu[gi] = true;
        const double d = std::hypot(in.preds[pi].x - in.gts[gi].x, in.preds[pi].y - in.gts[gi].y);
        EXPECT_LT(d, r[gi]);
      }
    }
  }
}

TEST(MatchPoints, PermutationInvariantCounts) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    Instance in = random_instance(rng, 10, 10, 20);
    const auto base = match_points(in.preds, in.gts, MatchMode::large);
    std::reverse(in.preds.begin(), in.preds.end());
    std::rotate(in.gts.begin(), in.gts.begin() + static_cast<std::ptrdiff_t>(in.gts.size() / 2),
                in.gts.end());
    const auto perm = match_points(in.preds, in.gts, MatchMode::large);
    EXPECT_EQ(base.tp, perm.tp);
    EXPECT_NEAR(base.total_distance, perm.total_distance, 1e-9);
  }
}

TEST(MatchPoints, LargeRadiusNeverMatchesFewer) {
  Rng rng(13);
  for (int t = 0; t < 200; ++t) {
    const Instance in = random_instance(rng, 15, 15, 30);
    EXPECT_GE(match_points(in.preds, in.gts, MatchMode::large).tp,
              match_points(in.preds, in.gts, MatchMode::small).tp);
  }
}

TEST(MatchPoints, ScalesToCrowdedScenes) {
  Rng rng(14);
  std::vector<Detection> p;
  std::vector<PointAnnotation> g;
  for (int i = 0; i < 400; ++i) {
    const int x = static_cast<int>(rng.uniform_int(0, 200));
    const int y = static_cast<int>(rng.uniform_int(0, 200));
    g.push_back({static_cast<double>(x), static_cast<double>(y), 6, 6});
    p.push_back({x + static_cast<int>(rng.uniform_int(-2, 2)), y, 0.5});
  }
  const MatchResult m = match_points(p, g, MatchMode::large);
  EXPECT_GE(m.tp, 390u);
}

TEST(LocalizationScores, Arithmetic) {
  const auto s = LocalizationScores::from_counts(2, 1, 1);
  EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
  const auto z = LocalizationScores::from_counts(0, 0, 4);
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f1, 0.0);
}

TEST(CountingScores, Examples) {
  const std::vector<CountPair> one{{10, 10}};
  const auto a = counting_scores(one);
  EXPECT_EQ(a.mae, 0.0);
  EXPECT_EQ(a.mse, 0.0);
  EXPECT_EQ(a.nae, 0.0);
  const std::vector<CountPair> two{{12, 10}, {7, 10}};
  const auto b = counting_scores(two);
  EXPECT_DOUBLE_EQ(b.mae, 2.5);
  EXPECT_DOUBLE_EQ(b.mse, std::sqrt(6.5));
  ASSERT_TRUE(b.nae.has_value());
  EXPECT_DOUBLE_EQ(*b.nae, 0.25);
}

TEST(CountingScores, ZeroTruthExcludedFromNae) {
  const std::vector<CountPair> mixed{{1, 0}, {12, 10}};
  EXPECT_DOUBLE_EQ(*counting_scores(mixed).nae, 0.2);
  const std::vector<CountPair> zeros{{1, 0}, {0, 0}};
  EXPECT_FALSE(counting_scores(zeros).nae.has_value());
  EXPECT_THROW(counting_scores({}), ValidationError);
}

TEST(Evaluate, PerfectImage) {
  ImageRecord rec{"a", 16, 16, {{4, 4, 4, 4}, {10, 10, 4, 4}}, std::nullopt};
  const std::vector<ImageEvaluation> ds{{{{4, 4, 0.9}, {10, 10, 0.8}}, rec, 2.0}};
  const EvalReport r = evaluate(ds);
  EXPECT_EQ(r.images, 1u);
  EXPECT_EQ(r.large.f1, 1.0);
  EXPECT_EQ(r.small.f1, 1.0);
  EXPECT_EQ(r.counting.mae, 0.0);
}

TEST(Evaluate, MicroAveraged) {
  ImageRecord a{"a", 16, 16, {{4, 4, 4, 4}}, std::nullopt};
  ImageRecord b{"b", 16, 16, {{4, 4, 4, 4}}, std::nullopt};
  const std::vector<ImageEvaluation> ds{{{{4, 4, 0.9}}, a, 1.0}, {{{14, 14, 0.9}}, b, 1.0}};
  const EvalReport r = evaluate(ds);
  EXPECT_EQ(r.large.tp, 1u);
  EXPECT_EQ(r.large.fp, 1u);
  EXPECT_EQ(r.large.fn, 1u);
  EXPECT_DOUBLE_EQ(r.large.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.large.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.large.f1, 0.5);
}

TEST(Evaluate, NoPredictionsAnywhere) {
  ImageRecord a{"a", 16, 16, {{4, 4, 4, 4}}, std::nullopt};
  const std::vector<ImageEvaluation> ds{{{}, a, 0.0}};
  const EvalReport r = evaluate(ds);
  EXPECT_EQ(r.large.precision, 0.0);
  EXPECT_EQ(r.large.recall, 0.0);
  EXPECT_EQ(r.large.f1, 0.0);
}

TEST(EvalReport, JsonRoundTrip) {
  ImageRecord a{"a", 16, 16, {{4, 4, 4, 4}, {9, 9, 2, 2}}, std::nullopt};
  const std::vector<ImageEvaluation> ds{{{{4, 4, 0.9}, {12, 9, 0.7}}, a, 1.0 / 3.0}};
  EvalReport r = evaluate(ds);
  r.threshold = 0.37;
  const std::string text = report_to_json(r);
  EXPECT_EQ(report_from_json(text), r);
  EXPECT_EQ(report_to_json(report_from_json(text)), text);
  EXPECT_FALSE(report_to_table(r).empty());
}

TEST(EvalReport, MalformedJsonIsFormatError) {
  EXPECT_THROW(report_from_json("{\"images\": 3}"), FormatError);
  EXPECT_THROW(report_from_json("nope"), FormatError);
}
