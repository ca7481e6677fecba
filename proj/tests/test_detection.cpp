#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ccas/detection.hpp"
#include "ccas/errors.hpp"
#include "ccas/fs_util.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace ccas;
namespace fs = std::filesystem;

#define CHECK_NEAR(a, b, tol) CHECK(std::fabs((a) - (b)) <= (tol))

namespace {

Box box_of(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

struct RandomEvalCase {
  GroundTruthSet gt;
  DetectionSet det;
  std::map<std::string, std::vector<std::array<double, 4>>> oracle_gt;
  std::vector<oracle::Det> oracle_det;
};

// Shared image universe, >= 1 ground-truth box overall, <= 6 detections and
// <= 4 ground-truth boxes per image.
RandomEvalCase random_eval_case(std::mt19937& rng) {
  std::uniform_int_distribution<int> image_count(1, 4);
  std::uniform_int_distribution<int> gt_count(0, 4);
  std::uniform_int_distribution<int> det_count(0, 6);
  std::uniform_int_distribution<int> prompt_pick(0, 2);

  RandomEvalCase c;
  c.gt.class_name = "target";
  c.det.config_label = "random";
  const int images = image_count(rng);
  for (int i = 0; i < images; ++i) {
    const std::string id = "img" + std::to_string(i);
    std::vector<Box> boxes;
    std::vector<std::array<double, 4>> raw;
    // The first image always holds a box so AP stays defined.
    const int gts = std::max(gt_count(rng), i == 0 ? 1 : 0);
    for (int g = 0; g < gts; ++g) {
      const auto b = testgen::random_box(rng);
      boxes.push_back(box_of(b));
      raw.push_back(b);
    }
    c.gt.images.push_back({id, boxes});
    c.oracle_gt[id] = raw;

    std::vector<Detection> dets;
    const int dets_n = det_count(rng);
    for (int d = 0; d < dets_n; ++d) {
      const auto b = testgen::random_box(rng);
      const double score = testgen::random_score(rng);
      const std::string prompt = "p" + std::to_string(prompt_pick(rng));
      dets.push_back({box_of(b), score, prompt});
      c.oracle_det.push_back({id, b, score, prompt});
    }
    c.det.by_image[id] = dets;
  }
  return c;
}

}  // namespace

TEST_CASE("iou analytic values") {
  const Box a{0.0, 0.0, 2.0, 2.0};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {10.0, 10.0, 12.0, 12.0}) == 0.0);
  CHECK(iou(a, {2.0, 0.0, 4.0, 2.0}) == 0.0);  // edge contact only
  CHECK_NEAR(iou(a, {1.0, 1.0, 3.0, 3.0}), 1.0 / 7.0, 1e-12);
  CHECK_NEAR(iou({0.0, 0.0, 4.0, 4.0}, {0.0, 0.0, 2.0, 4.0}), 0.5, 1e-12);
}

TEST_CASE("iou is symmetric, bounded, and agrees with the oracle") {
  std::mt19937 rng(4242);
  for (int i = 0; i < 2000; ++i) {
    const auto ra = testgen::random_box(rng);
    const auto rb = testgen::random_box(rng);
    const Box a = box_of(ra);
    const Box b = box_of(rb);
    const double ab = iou(a, b);
    REQUIRE(ab == iou(b, a));
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 1.0);
    REQUIRE(std::fabs(ab - oracle::iou(ra, rb)) <= 1e-12);
  }
}

TEST_CASE("degenerate boxes are rejected") {
  const Box flat{0.0, 0.0, 2.0, 0.0};
  const Box inverted{3.0, 0.0, 1.0, 2.0};
  const Box ok{0.0, 0.0, 1.0, 1.0};
  CHECK_THROWS_AS(iou(flat, ok), Error);
  CHECK_THROWS_AS(iou(ok, inverted), Error);
  try {
    iou(flat, ok);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("degenerate box") != std::string::npos);
  }
}

TEST_CASE("merging one set without overlaps keeps every detection, score-sorted") {
  DetectionSet set;
  set.config_label = "solo";
  set.by_image["img1"] = {{{0.0, 0.0, 5.0, 5.0}, 0.3, "a"}, {{20.0, 20.0, 25.0, 25.0}, 0.9, "b"}};
  const DetectionSet merged = merge_prompt_detections({set});
  CHECK(merged.config_label == "solo");
  REQUIRE(merged.by_image.at("img1").size() == 2);
  CHECK(merged.by_image.at("img1")[0].score == 0.9);
  CHECK(merged.by_image.at("img1")[1].score == 0.3);
}

TEST_CASE("the same box from two prompts collapses to the higher score") {
  DetectionSet a;
  a.config_label = "cfg";
  a.by_image["img1"] = {{{0.0, 0.0, 10.0, 10.0}, 0.7, "prompt one"}};
  DetectionSet b;
  b.config_label = "cfg";
  b.by_image["img1"] = {{{0.0, 0.0, 10.0, 10.0}, 0.9, "prompt two"}};
  const DetectionSet merged = merge_prompt_detections({a, b});
  REQUIRE(merged.by_image.at("img1").size() == 1);
  CHECK(merged.by_image.at("img1")[0].score == 0.9);
  CHECK(merged.by_image.at("img1")[0].prompt_text == "prompt two");
}

TEST_CASE("greedy suppression only consults kept boxes") {
  // b2 overlaps b1 (7/13 > 0.5) and is suppressed; b3 overlaps b2 but only
  // reaches 0.25 against the kept b1, so it survives.
  DetectionSet set;
  set.config_label = "chain";
  set.by_image["img1"] = {{{0.0, 0.0, 10.0, 10.0}, 0.9, "a"},
                          {{0.0, 3.0, 10.0, 13.0}, 0.8, "b"},
                          {{0.0, 6.0, 10.0, 16.0}, 0.7, "c"}};
  const DetectionSet merged = merge_prompt_detections({set}, 0.5);
  const auto& kept = merged.by_image.at("img1");
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].box == Box{0.0, 0.0, 10.0, 10.0});
  CHECK(kept[1].box == Box{0.0, 6.0, 10.0, 16.0});
}

TEST_CASE("suppression needs overlap strictly above the threshold") {
  DetectionSet set;
  set.config_label = "edge";
  // Exactly 0.5 overlap: kept.
  set.by_image["img1"] = {{{0.0, 0.0, 4.0, 4.0}, 0.9, "a"}, {{0.0, 0.0, 2.0, 4.0}, 0.8, "b"}};
  const DetectionSet merged = merge_prompt_detections({set}, 0.5);
  CHECK(merged.by_image.at("img1").size() == 2);
}

TEST_CASE("merge is idempotent") {
  std::mt19937 rng(777);
  for (int round = 0; round < 20; ++round) {
    const RandomEvalCase c = random_eval_case(rng);
    const DetectionSet once = merge_prompt_detections({c.det}, 0.5);
    const DetectionSet twice = merge_prompt_detections({once}, 0.5);
    REQUIRE(once.by_image.size() == twice.by_image.size());
    for (const auto& [id, dets] : once.by_image) {
      REQUIRE(twice.by_image.at(id) == dets);
    }
  }
}

TEST_CASE("merge rejects mismatched image universes, naming the odd images") {
  DetectionSet a;
  a.config_label = "cfg";
  a.by_image["img1"] = {};
  a.by_image["img2"] = {{{0.0, 0.0, 1.0, 1.0}, 0.5, "p"}};
  DetectionSet b;
  b.config_label = "cfg";
  b.by_image["img1"] = {};
  try {
    merge_prompt_detections({a, b});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("img2") != std::string::npos);
  }
  CHECK_THROWS_AS(merge_prompt_detections({}), Error);
}

TEST_CASE("invalid detections are rejected during merge") {
  DetectionSet bad_box;
  bad_box.config_label = "cfg";
  bad_box.by_image["img1"] = {{{5.0, 0.0, 1.0, 1.0}, 0.5, "p"}};
  CHECK_THROWS_AS(merge_prompt_detections({bad_box}), Error);

  DetectionSet bad_score;
  bad_score.config_label = "cfg";
  bad_score.by_image["img1"] = {{{0.0, 0.0, 1.0, 1.0}, 1.5, "p"}};
  try {
    merge_prompt_detections({bad_score});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("outside [0, 1]") != std::string::npos);
  }
}

TEST_CASE("average precision analytic cases") {
  GroundTruthSet gt;
  gt.class_name = "target";
  gt.images = {{"img1", {{0.0, 0.0, 10.0, 10.0}, {20.0, 20.0, 30.0, 30.0}}}};

  SUBCASE("perfect single detection on a one-box task") {
    GroundTruthSet one;
    one.class_name = "target";
    one.images = {{"img1", {{0.0, 0.0, 10.0, 10.0}}}};
    DetectionSet det;
    det.config_label = "perfect";
    det.by_image["img1"] = {{{0.0, 0.0, 10.0, 10.0}, 0.9, "p"}};
    const EvalResult r = average_precision(one, det);
    CHECK(r.ap == 1.0);
    CHECK(r.tp == 1);
    CHECK(r.fp == 0);
    CHECK(r.num_gt == 1);
    REQUIRE(r.pr_points.size() == 1);
    CHECK(r.pr_points[0] == PrPoint{1.0, 1.0});
  }

  SUBCASE("no detections scores zero") {
    DetectionSet det;
    det.config_label = "empty";
    det.by_image["img1"] = {};
    const EvalResult r = average_precision(gt, det);
    CHECK(r.ap == 0.0);
    CHECK(r.tp == 0);
    CHECK(r.fp == 0);
    CHECK(r.pr_points.empty());
  }

  SUBCASE("one hit then one miss on a two-box task is exactly one half") {
    DetectionSet det;
    det.config_label = "half";
    det.by_image["img1"] = {{{0.0, 0.0, 10.0, 10.0}, 0.9, "p"},
                            {{50.0, 50.0, 60.0, 60.0}, 0.8, "p"}};
    const EvalResult r = average_precision(gt, det);
    CHECK(r.ap == 0.5);
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    REQUIRE(r.pr_points.size() == 2);
    CHECK(r.pr_points[0] == PrPoint{0.5, 1.0});
    CHECK(r.pr_points[1] == PrPoint{0.5, 0.5});
  }

  SUBCASE("a detection on an image without ground truth counts as a false positive") {
    GroundTruthSet with_empty = gt;
    with_empty.images.push_back({"img2", {}});
    DetectionSet det;
    det.config_label = "stray";
    det.by_image["img2"] = {{{0.0, 0.0, 5.0, 5.0}, 0.9, "p"}};
    const EvalResult r = average_precision(with_empty, det);
    CHECK(r.ap == 0.0);
    CHECK(r.fp == 1);
  }
}

TEST_CASE("average precision is undefined without ground-truth boxes") {
  GroundTruthSet gt;
  gt.class_name = "goggles";
  gt.images = {{"img1", {}}};
  DetectionSet det;
  det.config_label = "cfg";
  det.by_image["img1"] = {};
  try {
    average_precision(gt, det);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Eval);
    CHECK(std::string(e.what()).find("goggles") != std::string::npos);
  }
}

TEST_CASE("duplicate ground-truth image ids are rejected") {
  GroundTruthSet gt;
  gt.class_name = "target";
  gt.images = {{"img1", {{0.0, 0.0, 1.0, 1.0}}}, {"img1", {{2.0, 2.0, 3.0, 3.0}}}};
  DetectionSet det;
  det.config_label = "cfg";
  CHECK_THROWS_AS(average_precision(gt, det), Error);
}

TEST_CASE("average precision matches the oracle on random instances") {
  std::mt19937 rng(90210);
  for (int round = 0; round < 300; ++round) {
    const RandomEvalCase c = random_eval_case(rng);
    const EvalResult lib = average_precision(c.gt, c.det);
    const oracle::ApResult ref = oracle::average_precision(c.oracle_gt, c.oracle_det, 0.5);
    REQUIRE(std::fabs(lib.ap - ref.ap) <= 1e-9);
    REQUIRE(lib.tp == ref.tp);
    REQUIRE(lib.fp == ref.fp);
  }
}

TEST_CASE("appending a far-away low-score false positive never raises AP") {
  std::mt19937 rng(1331);
  for (int round = 0; round < 50; ++round) {
    RandomEvalCase c = random_eval_case(rng);
    const double before = average_precision(c.gt, c.det).ap;
    c.det.by_image.begin()->second.push_back({{1000.0, 1000.0, 1001.0, 1001.0}, 0.0, "junk"});
    const double after = average_precision(c.gt, c.det).ap;
    REQUIRE(after <= before + 1e-12);
  }
}

TEST_CASE("detection insertion order does not change the result") {
  std::mt19937 rng(2468);
  for (int round = 0; round < 30; ++round) {
    RandomEvalCase c = random_eval_case(rng);
    const EvalResult base = average_precision(c.gt, c.det);
    for (auto& [id, dets] : c.det.by_image) {
      std::shuffle(dets.begin(), dets.end(), rng);
    }
    const EvalResult shuffled = average_precision(c.gt, c.det);
    CHECK(base.ap == shuffled.ap);
    CHECK(base.tp == shuffled.tp);
    CHECK(base.fp == shuffled.fp);
    CHECK(base.pr_points == shuffled.pr_points);
  }
}

TEST_CASE("compare_configurations reports input order and matches the serial path") {
  GroundTruthSet gt;
  gt.class_name = "target";
  gt.images = {{"img1", {{0.0, 0.0, 10.0, 10.0}}}};

  DetectionSet perfect;
  perfect.config_label = "perfect";
  perfect.by_image["img1"] = {{{0.0, 0.0, 10.0, 10.0}, 0.9, "p"}};
  DetectionSet empty;
  empty.config_label = "empty";
  empty.by_image["img1"] = {};

  const std::vector<EvalResult> results = compare_configurations(gt, {perfect, empty});
  REQUIRE(results.size() == 2);
  CHECK(results[0].config_label == "perfect");
  CHECK(results[0].ap == 1.0);
  CHECK(results[1].config_label == "empty");
  CHECK(results[1].ap == 0.0);

  std::mt19937 rng(8080);
  std::vector<DetectionSet> configs;
  RandomEvalCase shared = random_eval_case(rng);
  configs.push_back(shared.det);
  for (int i = 0; i < 7; ++i) {
    RandomEvalCase extra = random_eval_case(rng);
    // Reuse the shared universe so every configuration is comparable.
    DetectionSet cfg;
    cfg.config_label = "cfg" + std::to_string(i);
    for (const auto& [id, dets] : shared.det.by_image) cfg.by_image[id] = {};
    for (const auto& [id, dets] : extra.det.by_image) {
      if (cfg.by_image.count(id)) cfg.by_image[id] = dets;
    }
    configs.push_back(cfg);
  }
  const auto parallel = compare_configurations(shared.gt, configs, 0.5, 0.5);
  const auto serial = serial::compare_configurations(shared.gt, configs, 0.5, 0.5);
  REQUIRE(parallel.size() == serial.size());
  for (std::size_t i = 0; i < parallel.size(); ++i) {
    CHECK(parallel[i].config_label == serial[i].config_label);
    CHECK(parallel[i].ap == serial[i].ap);
    CHECK(parallel[i].tp == serial[i].tp);
    CHECK(parallel[i].fp == serial[i].fp);
    CHECK(parallel[i].pr_points == serial[i].pr_points);
  }
}

TEST_CASE("fixture files evaluate to the hand-traced values") {
  const std::string dir = CCAS_FIXTURE_DIR;
  const GroundTruthSet gt = load_ground_truth(dir + "/gt_goggles.json");
  CHECK(gt.class_name == "goggles");
  REQUIRE(gt.images.size() == 2);

  const DetectionSet baseline = load_detections(dir + "/detections_baseline.json");
  CHECK(baseline.config_label == "Baseline");
  const DetectionSet top1 = load_detections(dir + "/detections_top1.json");
  const DetectionSet top1_extra = load_detections(dir + "/detections_top1_extra.json");

  const auto results = compare_configurations(
      gt, {baseline, merge_prompt_detections({top1, top1_extra})});
  REQUIRE(results.size() == 2);
  CHECK_NEAR(results[0].ap, 5.0 / 9.0, 1e-12);
  CHECK(results[1].ap == 1.0);
  CHECK(results[1].tp == 3);
}

TEST_CASE("file loading rejections name the file") {
  const std::string dir = CCAS_FIXTURE_DIR;
  const fs::path tmp = fs::temp_directory_path() / "ccas-detection-bad.json";

  SUBCASE("invalid JSON") {
    atomic_write_file(tmp, "{nope");
    try {
      load_ground_truth(tmp);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Data);
      CHECK(std::string(e.what()).find(tmp.string()) != std::string::npos);
    }
  }
  SUBCASE("wrong ground-truth shape") {
    atomic_write_file(tmp, R"({"images": []})");
    CHECK_THROWS_AS(load_ground_truth(tmp), Error);
  }
  SUBCASE("bad box arity") {
    atomic_write_file(tmp,
                      R"({"class": "c", "images": [{"id": "img1", "boxes": [[1, 2, 3]]}]})");
    try {
      load_ground_truth(tmp);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("box must be") != std::string::npos);
    }
  }
  SUBCASE("wrong detections shape") {
    atomic_write_file(tmp, R"({"config": "c"})");
    CHECK_THROWS_AS(load_detections(tmp), Error);
  }
  SUBCASE("detection score outside range") {
    atomic_write_file(
        tmp,
        R"({"config": "c", "detections": [{"image": "img1", "box": [0, 0, 1, 1], "score": 2.0}]})");
    CHECK_THROWS_AS(load_detections(tmp), Error);
  }
  fs::remove(tmp);
}
