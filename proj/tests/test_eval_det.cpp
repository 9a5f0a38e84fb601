#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gtforge/eval_det.hpp"
#include "gtforge/geometry.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace gtforge;
using testsupport::greedy_ap;
using testsupport::oracle_ap;
using testsupport::OracleFrame;

namespace {

Box3D det(double x, double y, double score, std::uint8_t cls = kClassCar) {
  Box3D b;
  b.center = {x, y, 0.0};
  b.size = {4.0, 2.0, 1.5};
  b.class_id = cls;
  b.score = score;
  return b;
}

Box3D gt(double x, double y, std::uint8_t cls = kClassCar,
         std::int64_t track = 0) {
  Box3D b;
  b.center = {x, y, 0.0};
  b.size = {4.0, 2.0, 1.5};
  b.class_id = cls;
  b.track_id = track;
  return b;
}

}  // namespace

TEST_CASE("match_frame") {
  SUBCASE("greedy trace: near pred matches, far pred is a false positive") {
    const std::vector<Box3D> preds = {det(0.5, 0, 0.9), det(5, 0, 0.8)};
    const std::vector<Box3D> gts = {gt(0, 0)};
    const MatchResult m = match_frame(preds, gts, 1.0);
    REQUIRE(m.matches.size() == 1);
    CHECK(m.matches[0].pred_index == 0);
    CHECK(m.matches[0].distance == doctest::Approx(0.5));
    CHECK(m.unmatched_preds == std::vector<std::size_t>{1});
    CHECK(m.unmatched_gts.empty());
  }
  SUBCASE("no predictions leaves every ground truth unmatched") {
    const std::vector<Box3D> gts = {gt(0, 0), gt(10, 0)};
    const MatchResult m = match_frame({}, gts, 1.0);
    CHECK(m.matches.empty());
    CHECK(m.unmatched_gts.size() == 2);
  }
  SUBCASE("one-to-one: only the higher score wins a contested ground truth") {
    const std::vector<Box3D> preds = {det(0.2, 0, 0.5), det(-0.2, 0, 0.9)};
    const std::vector<Box3D> gts = {gt(0, 0)};
    const MatchResult m = match_frame(preds, gts, 1.0);
    REQUIRE(m.matches.size() == 1);
    CHECK(m.matches[0].pred_index == 1);
    CHECK(m.unmatched_preds == std::vector<std::size_t>{0});
  }
  SUBCASE("matching is invariant to prediction order") {
    Rng rng(601);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<Box3D> preds;
      std::vector<Box3D> gts;
      for (int i = 0; i < 4; ++i)
        gts.push_back(gt(rng.uniform(-20, 20), rng.uniform(-20, 20)));
      for (int i = 0; i < 5; ++i)
        preds.push_back(det(rng.uniform(-20, 20), rng.uniform(-20, 20),
                            rng.uniform(0, 1)));
      const MatchResult a = match_frame(preds, gts, 2.0);

      std::vector<std::size_t> perm(preds.size());
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.next_below(i)]);
      std::vector<Box3D> shuffled;
      for (const std::size_t i : perm) shuffled.push_back(preds[i]);
      const MatchResult b = match_frame(shuffled, gts, 2.0);

      auto matched_gts = [](const MatchResult& m) {
        std::vector<std::size_t> v;
        for (const auto& pair : m.matches) v.push_back(pair.gt_index);
        std::sort(v.begin(), v.end());
        return v;
      };
      CHECK(matched_gts(a) == matched_gts(b));
    }
  }
}

TEST_CASE("class_ap") {
  const EvalConfig config;
  SUBCASE("single true positive is a perfect AP") {
    const std::vector<PredRecord> records = {{0.9, true}};
    CHECK(class_ap(records, 1, config) == doctest::Approx(1.0));
  }
  SUBCASE("no predictions at all scores zero") {
    CHECK(class_ap({}, 1, config) == doctest::Approx(0.0));
  }
  SUBCASE("no ground truth is an error") {
    const std::vector<PredRecord> records = {{0.9, true}};
    try {
      (void)class_ap(records, 0, config);
      FAIL("expected NoGroundTruth");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::no_ground_truth);
    }
  }
  SUBCASE("greedy equals the exhaustive oracle on tiny instances") {
    Rng rng(602);
    for (int trial = 0; trial < 40; ++trial) {
      // ground truths on a spread lattice: no prediction can reach two
      std::vector<OracleFrame> frames(2);
      for (auto& frame : frames) {
        const std::size_t n_gt = 1 + rng.next_below(4);
        for (std::size_t i = 0; i < n_gt; ++i)
          frame.gts.push_back(gt(10.0 * static_cast<double>(i) +
                                     rng.uniform(-0.5, 0.5),
                                 rng.uniform(-0.5, 0.5)));
        const std::size_t n_pred = rng.next_below(5);
        for (std::size_t i = 0; i < n_pred; ++i) {
          const auto target = rng.next_below(n_gt);
          frame.preds.push_back(det(10.0 * static_cast<double>(target) +
                                        rng.uniform(-4.0, 4.0),
                                    rng.uniform(-4.0, 4.0),
                                    rng.uniform(0.05, 1.0)));
        }
      }
      for (const double threshold : {1.0, 2.0, 3.0, 4.0}) {
        const double greedy = greedy_ap(frames, threshold, config);
        const double oracle = oracle_ap(frames, threshold, config);
        CHECK(greedy == doctest::Approx(oracle).epsilon(1e-12));
      }
    }
  }
  SUBCASE("AP is non-increasing as the threshold tightens") {
    Rng rng(603);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<OracleFrame> frames(3);
      for (auto& frame : frames) {
        for (int i = 0; i < 3; ++i)
          frame.gts.push_back(
              gt(rng.uniform(-30, 30), rng.uniform(-30, 30)));
        for (int i = 0; i < 4; ++i)
          frame.preds.push_back(det(rng.uniform(-30, 30), rng.uniform(-30, 30),
                                    rng.uniform(0, 1)));
      }
      double prev = -1.0;
      for (const double threshold : {1.0, 2.0, 3.0, 4.0}) {
        const double ap = greedy_ap(frames, threshold, config);
        CHECK(ap >= prev - 1e-12);
        prev = ap;
      }
    }
  }
}

TEST_CASE("tp_errors") {
  const EvalConfig config;
  SUBCASE("aligned scale error has a closed form") {
    Box3D pred = det(0, 0, 1.0);
    Box3D truth = gt(0, 0);
    pred.size = {2, 2, 1.5};
    truth.size = {4, 2, 1.5};
    // overlap 2*2*1.5 = 6, union 6 + 12 - 6 = 12
    CHECK(aligned_scale_error(pred, truth) == doctest::Approx(0.5));
    CHECK(aligned_scale_error(truth, truth) == doctest::Approx(0.0));
  }
  SUBCASE("orientation error wraps") {
    Box3D pred = det(0, 0, 1.0);
    Box3D truth = gt(0, 0);
    pred.yaw = 3.0;
    truth.yaw = -3.0;
    CHECK(abs_angle_diff(pred.yaw, truth.yaw) ==
          doctest::Approx(2 * kPi - 6.0));
  }
  SUBCASE("no matches above min recall yields the 1.0 penalty") {
    const TpErrors e = tp_errors({}, 100, config);
    CHECK(e.ate == 1.0);
    CHECK(e.ase == 1.0);
    CHECK(e.aoe == 1.0);
    CHECK(e.ave == 1.0);
  }
  SUBCASE("constant errors pass through the recall sampling") {
    std::vector<TpMatch> matches;
    for (int i = 0; i < 10; ++i)
      matches.push_back({1.0 - i * 0.05, 0.25, 0.1, 0.2, 0.3});
    const TpErrors e = tp_errors(matches, 10, config);
    CHECK(e.ate == doctest::Approx(0.25));
    CHECK(e.ase == doctest::Approx(0.1));
    CHECK(e.aoe == doctest::Approx(0.2));
    CHECK(e.ave == doctest::Approx(0.3));
  }
}

TEST_CASE("ods formula") {
  SUBCASE("published benchmark rows") {
    CHECK(ods(0.6115, 0.2825, 0.1980, 0.5223, 1.8763) ==
          doctest::Approx(0.5554).epsilon(1e-4));
    CHECK(ods(0.2488, 0.6597, 0.2389, 0.3736, 0.6982) ==
          doctest::Approx(0.3781).epsilon(1e-4));
    CHECK(ods(0.2244, 1.0238, 0.2230, 0.5942, 2.0138) ==
          doctest::Approx(0.2601).epsilon(1e-4));
  }
  SUBCASE("perfect detector scores 1") { CHECK(ods(1, 0, 0, 0, 0) == 1.0); }
  SUBCASE("errors at and beyond 1 clamp identically") {
    CHECK(ods(0.5, 1.0, 0.2, 0.2, 0.2) == ods(0.5, 5.0, 0.2, 0.2, 0.2));
  }
  SUBCASE("monotone in mAP, antitone in each error") {
    Rng rng(604);
    for (int trial = 0; trial < 50; ++trial) {
      const double map = rng.uniform(0, 1);
      const double e1 = rng.uniform(0, 2), e2 = rng.uniform(0, 2),
                   e3 = rng.uniform(0, 2), e4 = rng.uniform(0, 2);
      const double base = ods(map, e1, e2, e3, e4);
      CHECK(base >= 0.0);
      CHECK(base <= 1.0);
      CHECK(ods(std::min(1.0, map + 0.1), e1, e2, e3, e4) >= base);
      CHECK(ods(map, e1 + 0.1, e2, e3, e4) <= base + 1e-12);
    }
  }
}

TEST_CASE("evaluate_detections") {
  const EvalConfig config;

  SUBCASE("predictions identical to ground truth with score 1") {
    std::vector<AnnotationFrame> gt_frames(2);
    gt_frames[0].timestamp_us = 0;
    gt_frames[0].boxes = {gt(0, 0, kClassCar, 1), gt(10, 5, kClassPedestrian, 2)};
    gt_frames[1].timestamp_us = 100000;
    gt_frames[1].boxes = {gt(3, -2, kClassCar, 1)};

    std::vector<AnnotationFrame> pred_frames = gt_frames;
    for (auto& frame : pred_frames)
      for (auto& box : frame.boxes) {
        box.track_id.reset();
        box.score = 1.0;
      }

    const DetectionSummary s = evaluate_detections(gt_frames, pred_frames, config);
    CHECK(s.map == doctest::Approx(1.0));
    CHECK(s.mate == doctest::Approx(0.0));
    CHECK(s.mase == doctest::Approx(0.0));
    CHECK(s.maoe == doctest::Approx(0.0));
    CHECK(s.mave == doctest::Approx(0.0));
    CHECK(s.ods_score == doctest::Approx(1.0));
    CHECK(s.skipped_classes.size() == 2);  // no rider or large_vehicle GT
  }
  SUBCASE("empty predictions everywhere") {
    std::vector<AnnotationFrame> gt_frames(1);
    gt_frames[0].timestamp_us = 0;
    gt_frames[0].boxes = {gt(0, 0, kClassCar, 1), gt(5, 0, kClassRider, 2)};
    std::vector<AnnotationFrame> pred_frames(1);
    pred_frames[0].timestamp_us = 0;

    const DetectionSummary s = evaluate_detections(gt_frames, pred_frames, config);
    CHECK(s.map == doctest::Approx(0.0));
    CHECK(s.mate == doctest::Approx(1.0));
    CHECK(s.mave == doctest::Approx(1.0));
    CHECK(s.ods_score == doctest::Approx(0.0));
  }
  SUBCASE("frame sets must agree") {
    std::vector<AnnotationFrame> gt_frames(1);
    gt_frames[0].timestamp_us = 0;
    std::vector<AnnotationFrame> pred_frames(1);
    pred_frames[0].timestamp_us = 7;
    try {
      (void)evaluate_detections(gt_frames, pred_frames, config);
      FAIL("expected FrameSetMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::frame_set_mismatch);
    }
  }
  SUBCASE("boxes outside the evaluation range are dropped") {
    std::vector<AnnotationFrame> gt_frames(1);
    gt_frames[0].timestamp_us = 0;
    gt_frames[0].boxes = {gt(0, 0, kClassCar, 1), gt(70, 0, kClassCar, 2)};
    std::vector<AnnotationFrame> pred_frames(1);
    pred_frames[0].timestamp_us = 0;
    Box3D hit = det(0, 0, 1.0);
    pred_frames[0].boxes = {hit};

    const DetectionSummary s = evaluate_detections(gt_frames, pred_frames, config);
    // the far GT is outside |x| <= 60, so the single in-range pair is perfect
    CHECK(s.per_class.at(kClassCar).gt_count == 1);
    CHECK(s.map == doctest::Approx(1.0));
  }
}
