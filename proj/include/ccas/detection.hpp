#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ccas {

/// Axis-aligned pixel box; valid when x_min < x_max and y_min < y_max.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  friend auto operator<=>(const Box&, const Box&) = default;
};

/// Intersection over union in [0, 1]; 0 for disjoint boxes.
double iou(const Box& a, const Box& b);

struct Detection {
  Box box;
  double score = 0.0;
  std::string prompt_text;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Predicted boxes for one prompt configuration, grouped per image.
struct DetectionSet {
  std::string config_label;
  std::map<std::string, std::vector<Detection>> by_image;
};

struct GroundTruthSet {
  std::string class_name;
  std::vector<std::pair<std::string, std::vector<Box>>> images;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;

  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

struct EvalResult {
  std::string config_label;
  double ap = 0.0;
  std::vector<PrPoint> pr_points;
  long tp = 0;
  long fp = 0;
  long num_gt = 0;
  double iou_threshold = 0.5;
};

/// Union the per-prompt detections of one configuration, collapse them onto
/// the single target class, and greedily suppress boxes overlapping a kept
/// higher-scored box with IoU strictly above nms_iou. All sets must cover the
/// same image universe.
DetectionSet merge_prompt_detections(const std::vector<DetectionSet>& sets, double nms_iou = 0.5);

/// Single-class AP at one IoU threshold. Detections are ranked by descending
/// score (ties by image id, box, prompt), greedily matched to the highest-IoU
/// unmatched ground truth of their image at IoU >= iou_threshold, and the
/// all-point precision envelope is integrated over recall.
/// Throws Error(Eval) when the ground truth holds no boxes.
EvalResult average_precision(const GroundTruthSet& gt, const DetectionSet& det,
                             double iou_threshold = 0.5);

/// merge + average_precision per configuration; configurations are evaluated
/// in parallel and reported in input order.
std::vector<EvalResult> compare_configurations(const GroundTruthSet& gt,
                                               const std::vector<DetectionSet>& configs,
                                               double nms_iou = 0.5, double iou_threshold = 0.5);

namespace serial {

/// Sequential reference for compare_configurations; identical results.
std::vector<EvalResult> compare_configurations(const GroundTruthSet& gt,
                                               const std::vector<DetectionSet>& configs,
                                               double nms_iou = 0.5, double iou_threshold = 0.5);

}  // namespace serial

// File formats (UTF-8, pixel coordinates):
//   ground truth: {"class": str, "images": [{"id": str, "boxes": [[x0,y0,x1,y1], ...]}]}
//   detections:   {"config": str, "detections": [{"image": str, "box": [4 reals],
//                  "score": real, "prompt": str}]}
GroundTruthSet load_ground_truth(const std::filesystem::path& path);
DetectionSet load_detections(const std::filesystem::path& path);

}  // namespace ccas
