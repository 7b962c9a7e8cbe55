// Copyright 2026 The pgfc-lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "oracles.h"
#include "pgfc_lab/geometry.h"
#include "pgfc_lab/rng.h"
#include "pgfc_lab/wire_format.h"

namespace pgfc_lab {
namespace {

using ::testing::HasSubstr;

TEST(BboxList, EmptyAndSingle) {
  EXPECT_EQ(*SerializeBboxList(std::vector<BBox>{}), "<bbox_list></bbox_list>");
  EXPECT_EQ(*SerializeBboxList(std::vector<BBox>{{0.1, 0.5, 0.25, 0.75}}),
            "<bbox_list><bbox>0.100, 0.500, 0.250, 0.750</bbox></bbox_list>");
}

TEST(BboxList, HalfEvenRounding) {
  // 0.0625 and 0.1875 are exact binary fractions, so the tie is real.
  EXPECT_EQ(*FormatCoord(0.0625), "0.062");
  EXPECT_EQ(*FormatCoord(0.1875), "0.188");
  EXPECT_EQ(*FormatCoord(1.0), "1.000");
}

TEST(BboxList, LenientWhitespace) {
  auto boxes = ParseBboxList(" <bbox_list>\n <bbox> 0.1 ,0.2,\t0.3 , 0.4 </bbox>\n</bbox_list> ");
  ASSERT_TRUE(boxes.ok()) << boxes.status();
  ASSERT_EQ(boxes->size(), 1u);
  EXPECT_EQ((*boxes)[0], (BBox{0.1, 0.2, 0.3, 0.4}));
}

TEST(BboxList, RejectsStructuralDeviations) {
  for (const char* bad : {
           "<bbox_list><bbox>0.1, 0.2, 0.3</bbox></bbox_list>",
           "<bbox_list><bbox>0.1, 0.2, 0.3, 0.4</bbox>",
           "<bbox_list><bbox>0.3, 0.2, 0.1, 0.4</bbox></bbox_list>",   // x2 < x1
           "<bbox_list><bbox>0.1, 0.2, 1.3, 0.4</bbox></bbox_list>",   // out of range
           "<bbox_list><bbox>0.1, abc, 0.3, 0.4</bbox></bbox_list>",
           "<bbox_list><bbox>0.1, 0.2, 0.3, 0.4</bbox></bbox_list> trailing",
           "<bbox_list><bbox>nan, 0.2, 0.3, 0.4</bbox></bbox_list>",
           "",
       }) {
    EXPECT_FALSE(ParseBboxList(bad).ok()) << bad;
  }
}

TEST(ContourList, Goldens) {
  EXPECT_EQ(*SerializeContourList(std::vector<Polygon>{{{{0, 0}, {1, 0}, {0, 1}}}}),
            "<contour_list><polygon>[0.000, 0.000], [1.000, 0.000], [0.000, 1.000]"
            "</polygon></contour_list>");
  EXPECT_EQ(*SerializeContourList(std::vector<Polygon>{}), "<contour_list></contour_list>");
}

TEST(ContourList, RejectsShortPolygonsAndBadBrackets) {
  EXPECT_FALSE(ParseContourList(
                   "<contour_list><polygon>[0.1, 0.1], [0.2, 0.2]</polygon></contour_list>")
                   .ok());
  EXPECT_FALSE(ParseContourList("<contour_list><polygon>[0.1, 0.1], [0.2, 0.2], [0.3, 0.1"
                                "</polygon></contour_list>")
                   .ok());
  EXPECT_FALSE(SerializeContourList(std::vector<Polygon>{{{{0, 0}, {1, 1}}}}).ok());
}

TEST(ContourList, RoundTripRandom) {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    std::vector<Polygon> polys(1 + rng.UniformInt(3));
    for (Polygon& p : polys) {
      p.vertices.resize(3 + rng.UniformInt(48));
      for (Point2& v : p.vertices) v = {Quantize3(rng.Uniform()), Quantize3(rng.Uniform())};
    }
    auto back = ParseContourList(*SerializeContourList(polys));
    ASSERT_TRUE(back.ok());
    EXPECT_EQ(*back, polys);
  }
}

TEST(DetectionResult, ClassedLayout) {
  const DetectionSet set{{{"tumor", {{0.1, 0.2, 0.3, 0.4}}}}};
  const std::string want =
      "<detection_result>\n"
      "  <bbox_list class=\"tumor\">\n"
      "    <bbox>0.100, 0.200, 0.300, 0.400</bbox>\n"
      "  </bbox_list>\n"
      "</detection_result>";
  EXPECT_EQ(*SerializeDetectionResult(set), want);
  EXPECT_EQ(*ParseDetectionResult(want), set);
  EXPECT_EQ(*SerializeDetectionResult(DetectionSet{}), "<detection_result></detection_result>");
}

TEST(DetectionResult, GroupOrderAndCompactInput) {
  auto set = ParseDetectionResult(
      "<detection_result><bbox_list class=\"b\"></bbox_list>"
      "<bbox_list  class=\"a x\"><bbox>0,0,1,1</bbox></bbox_list></detection_result>");
  ASSERT_TRUE(set.ok()) << set.status();
  ASSERT_EQ(set->groups.size(), 2u);
  EXPECT_EQ(*set->groups[0].label, "b");
  EXPECT_EQ(*set->groups[1].label, "a x");
  EXPECT_EQ(set->BoxCount(), 1u);
}

TEST(DetectionResult, Errors) {
  const auto dup = ParseDetectionResult(
      "<detection_result><bbox_list class=\"a\"></bbox_list>"
      "<bbox_list class=\"a\"></bbox_list></detection_result>");
  EXPECT_FALSE(dup.ok());
  EXPECT_THAT(std::string(dup.status().message()), HasSubstr("duplicate"));
  EXPECT_FALSE(ParseDetectionResult("<detection_result><bbox_list></bbox_list>"
                                    "</detection_result>")
                   .ok());
  EXPECT_FALSE(ParseDetectionResult("<detection_result><bbox_list class=\"a\">"
                                    "</detection_result>")
                   .ok());
  EXPECT_FALSE(ParseDetectionResult("<detection_result><bbox_listclass=\"a\"></bbox_list>"
                                    "</detection_result>")
                   .ok());
  EXPECT_FALSE(SerializeDetectionResult(DetectionSet{{{"a", {}}, {"a", {}}}}).ok());
}

TEST(Milli, Conversions) {
  EXPECT_EQ(*ToMilli(0.5), 500);
  EXPECT_EQ(*ToMilli(1.0), 1000);
  EXPECT_EQ(*ToMilli(0.0), 0);
  EXPECT_FALSE(FromMilli(1001).ok());
  EXPECT_FALSE(FromMilli(-1).ok());
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.Uniform();
    EXPECT_LE(std::abs(*FromMilli(*ToMilli(x)) - x), 5e-4);
  }
}

TEST(Metrics, BoxIou) {
  const BBox a{0.1, 0.1, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(Iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(Iou(a, {0.6, 0.6, 0.9, 0.9}), 0.0);
  EXPECT_NEAR(Iou({0, 0, 0.5, 1}, {0.25, 0, 0.75, 1}), 1.0 / 3.0, 1e-12);
}

TEST(Metrics, MaskDice) {
  BinaryMask a(4, 4), b(4, 4), c(3, 4);
  EXPECT_DOUBLE_EQ(*Dice(a, b), 1.0);  // both empty
  a.set(1, 1, 1);
  EXPECT_DOUBLE_EQ(*Dice(a, a), 1.0);
  EXPECT_DOUBLE_EQ(*Dice(a, b), 0.0);
  EXPECT_FALSE(Dice(a, c).ok());
  EXPECT_FALSE(MaskIou(a, c).ok());
}

TEST(Metrics, AgreeWithOracles) {
  Rng rng(9);
  for (int t = 0; t < 300; ++t) {
    const int h = 1 + rng.UniformInt(10), w = 1 + rng.UniformInt(10);
    const BinaryMask a = oracle::RandomNoise(rng, h, w, rng.Uniform());
    const BinaryMask b = oracle::RandomNoise(rng, h, w, rng.Uniform());
    EXPECT_NEAR(*Dice(a, b), oracle::MaskDice(a, b), 1e-12);
    EXPECT_NEAR(*MaskIou(a, b), oracle::MaskIou(a, b), 1e-12);
  }
}

TEST(MatchAndScore, Trivial) {
  const DetectionSet gt{{{std::nullopt, {{0.1, 0.1, 0.3, 0.3}, {0.5, 0.5, 0.8, 0.9}}}}};
  const DetectionScore same = MatchAndScore(gt, gt);
  EXPECT_EQ(same.f1, 1.0);
  EXPECT_EQ(same.mean_matched_iou, 1.0);
  const DetectionScore none = MatchAndScore(DetectionSet{}, gt);
  EXPECT_EQ(none.f1, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.mean_matched_iou, 0.0);
}

TEST(MatchAndScore, ClassesDoNotCrossMatch) {
  const DetectionSet pred{{{"a", {{0.1, 0.1, 0.3, 0.3}}}}};
  const DetectionSet gt{{{"b", {{0.1, 0.1, 0.3, 0.3}}}}};
  EXPECT_EQ(MatchAndScore(pred, gt).matched, 0);
}

// Exhaustive search over one-to-one assignments, maximizing the number of
// matches and then the summed IoU.
std::pair<int, double> BestMatching(const std::vector<BBox>& p, const std::vector<BBox>& g,
                                    double thresh) {
  std::pair<int, double> best{0, 0.0};
  std::vector<int> assign(p.size(), -1);
  std::function<void(size_t, std::vector<bool>&, int, double)> rec =
      [&](size_t i, std::vector<bool>& used, int n, double sum) {
        if (i == p.size()) {
          if (n > best.first || (n == best.first && sum > best.second)) best = {n, sum};
          return;
        }
        rec(i + 1, used, n, sum);
        for (size_t j = 0; j < g.size(); ++j) {
          const double iou = oracle::BoxIou(p[i], g[j]);
          if (used[j] || iou < thresh) continue;
          used[j] = true;
          rec(i + 1, used, n + 1, sum + iou);
          used[j] = false;
        }
      };
  std::vector<bool> used(g.size(), false);
  rec(0, used, 0, 0.0);
  return best;
}

TEST(MatchAndScore, CraftedGreedyVersusOptimal) {
  // p0 overlaps both ground truths; greedy takes its best pair (p0,g0) first,
  // which leaves p1 able to claim g1 only. Optimal and greedy agree here.
  const std::vector<BBox> p = {{0.10, 0.10, 0.50, 0.50}, {0.30, 0.10, 0.70, 0.50},
                               {0.80, 0.80, 0.90, 0.90}};
  const std::vector<BBox> g = {{0.12, 0.10, 0.52, 0.50}, {0.28, 0.10, 0.68, 0.50}};
  const DetectionScore s =
      MatchAndScore(DetectionSet{{{std::nullopt, p}}}, DetectionSet{{{std::nullopt, g}}});
  const auto best = BestMatching(p, g, 0.5);
  EXPECT_EQ(s.matched, best.first);
  EXPECT_NEAR(s.mean_matched_iou * s.matched, best.second, 1e-12);
  EXPECT_NEAR(s.precision, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.recall, 1.0, 1e-12);
}

TEST(MatchAndScore, GreedyCanLoseToOptimal) {
  // Greedy takes the single best pair (p0,g1) and strands p1; the optimal
  // assignment would have matched both. This divergence is the documented
  // cost of greedy matching.
  const std::vector<BBox> p = {{0.32, 0.0, 0.72, 1.0}, {0.40, 0.0, 0.80, 1.0}};
  const std::vector<BBox> g = {{0.20, 0.0, 0.60, 1.0}, {0.30, 0.0, 0.70, 1.0}};
  const DetectionScore s =
      MatchAndScore(DetectionSet{{{std::nullopt, p}}}, DetectionSet{{{std::nullopt, g}}}, 0.5);
  const auto best = BestMatching(p, g, 0.5);
  EXPECT_EQ(best.first, 2);
  EXPECT_EQ(s.matched, 1);
}

TEST(GlobalBoxIou, IdenticalAndDisjoint) {
  const DetectionSet a{{{std::nullopt, {{0.1, 0.1, 0.3, 0.3}}}}};
  const DetectionSet b{{{std::nullopt, {{0.6, 0.6, 0.9, 0.9}}}}};
  EXPECT_DOUBLE_EQ(GlobalBoxIou(a, a, 100), 1.0);
  EXPECT_DOUBLE_EQ(GlobalBoxIou(a, b, 100), 0.0);
}

}  // namespace
}  // namespace pgfc_lab
