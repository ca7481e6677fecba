#include "ccas/detection.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>
#include <tuple>

#include "json.hpp"

#include "ccas/errors.hpp"
#include "ccas/fs_util.hpp"

namespace ccas {

namespace {

void check_box(const Box& b, const std::string& where) {
  if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max)) {
    throw Error(ErrorKind::Data, where + ": degenerate box [" + std::to_string(b.x_min) + ", " +
                                     std::to_string(b.y_min) + ", " + std::to_string(b.x_max) +
                                     ", " + std::to_string(b.y_max) + "]");
  }
}

void check_score(double score, const std::string& where) {
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    throw Error(ErrorKind::Data, where + ": score " + std::to_string(score) + " outside [0, 1]");
  }
}

struct FlatDet {
  std::string image;
  Detection det;
};

// Total order used everywhere a detection sequence must be reproducible.
bool det_before(const FlatDet& a, const FlatDet& b) {
  if (a.det.score != b.det.score) return a.det.score > b.det.score;
  if (a.image != b.image) return a.image < b.image;
  if (a.det.box != b.det.box) return a.det.box < b.det.box;
  return a.det.prompt_text < b.det.prompt_text;
}

long count_gt_boxes(const GroundTruthSet& gt) {
  long n = 0;
  for (const auto& [id, boxes] : gt.images) n += static_cast<long>(boxes.size());
  return n;
}

void validate_ground_truth(const GroundTruthSet& gt) {
  std::set<std::string> ids;
  for (const auto& [id, boxes] : gt.images) {
    if (!ids.insert(id).second) {
      throw Error(ErrorKind::Data, "ground truth image id '" + id + "' appears twice");
    }
    for (const Box& b : boxes) check_box(b, "ground truth image '" + id + "'");
  }
}

void validate_detections(const DetectionSet& det) {
  for (const auto& [id, dets] : det.by_image) {
    for (const Detection& d : dets) {
      check_box(d.box, "detections for image '" + id + "'");
      check_score(d.score, "detections for image '" + id + "'");
    }
  }
}

EvalResult evaluate_one(const GroundTruthSet& gt, const DetectionSet& config, double nms_iou,
                        double iou_threshold) {
  return average_precision(gt, merge_prompt_detections({config}, nms_iou), iou_threshold);
}

}  // namespace

double iou(const Box& a, const Box& b) {
  check_box(a, "iou");
  check_box(b, "iou");
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min);
  const double area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min);
  return inter / (area_a + area_b - inter);
}

DetectionSet merge_prompt_detections(const std::vector<DetectionSet>& sets, double nms_iou) {
  if (sets.empty()) {
    throw Error(ErrorKind::Data, "merge needs at least one detection set");
  }
  // Every set must speak about the same images.
  std::set<std::string> universe;
  std::set<std::string> common;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::set<std::string> ids;
    for (const auto& [id, dets] : sets[s].by_image) ids.insert(id);
    if (s == 0) {
      universe = ids;
      common = ids;
    } else {
      universe.insert(ids.begin(), ids.end());
      std::set<std::string> kept;
      std::set_intersection(common.begin(), common.end(), ids.begin(), ids.end(),
                            std::inserter(kept, kept.begin()));
      common = std::move(kept);
    }
  }
  if (universe != common) {
    std::string diff;
    for (const std::string& id : universe) {
      if (!common.count(id)) diff += (diff.empty() ? "" : ", ") + id;
    }
    throw Error(ErrorKind::Data, "detection sets cover different image universes; not shared: " + diff);
  }

  for (const DetectionSet& s : sets) validate_detections(s);

  DetectionSet merged;
  merged.config_label = sets.front().config_label;
  for (const std::string& id : universe) {
    std::vector<FlatDet> pool;
    for (const DetectionSet& s : sets) {
      auto it = s.by_image.find(id);
      if (it == s.by_image.end()) continue;
      for (const Detection& d : it->second) pool.push_back({id, d});
    }
    std::sort(pool.begin(), pool.end(), det_before);
    std::vector<Detection> kept;
    for (const FlatDet& fd : pool) {
      bool suppressed = false;
      for (const Detection& k : kept) {
        if (iou(fd.det.box, k.box) > nms_iou) {
          suppressed = true;
          break;
        }
      }
      if (!suppressed) kept.push_back(fd.det);
    }
    merged.by_image[id] = std::move(kept);
  }
  return merged;
}

EvalResult average_precision(const GroundTruthSet& gt, const DetectionSet& det,
                             double iou_threshold) {
  validate_ground_truth(gt);
  validate_detections(det);
  const long num_gt = count_gt_boxes(gt);
  if (num_gt < 1) {
    throw Error(ErrorKind::Eval,
                "average precision is undefined: ground truth for class '" + gt.class_name +
                    "' holds no boxes");
  }

  std::vector<FlatDet> flat;
  for (const auto& [id, dets] : det.by_image) {
    for (const Detection& d : dets) flat.push_back({id, d});
  }
  std::sort(flat.begin(), flat.end(), det_before);

  std::map<std::string, const std::vector<Box>*> gt_by_image;
  std::map<std::string, std::vector<bool>> used;
  for (const auto& [id, boxes] : gt.images) {
    gt_by_image[id] = &boxes;
    used[id] = std::vector<bool>(boxes.size(), false);
  }

  EvalResult result;
  result.config_label = det.config_label;
  result.num_gt = num_gt;
  result.iou_threshold = iou_threshold;

  for (const FlatDet& fd : flat) {
    bool matched = false;
    auto it = gt_by_image.find(fd.image);
    if (it != gt_by_image.end()) {
      const std::vector<Box>& boxes = *it->second;
      std::vector<bool>& taken = used[fd.image];
      double best_iou = -1.0;
      std::size_t best = 0;
      for (std::size_t g = 0; g < boxes.size(); ++g) {
        if (taken[g]) continue;
        const double v = iou(fd.det.box, boxes[g]);
        if (v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
      if (best_iou >= iou_threshold) {
        taken[best] = true;
        matched = true;
      }
    }
    if (matched) ++result.tp; else ++result.fp;
    result.pr_points.push_back(
        {static_cast<double>(result.tp) / static_cast<double>(num_gt),
         static_cast<double>(result.tp) / static_cast<double>(result.tp + result.fp)});
  }

  // All-point interpolation: running max of precision from the tail.
  double envelope = 0.0;
  double ap = 0.0;
  for (std::size_t k = result.pr_points.size(); k-- > 0;) {
    envelope = std::max(envelope, result.pr_points[k].precision);
    const double prev_recall = k == 0 ? 0.0 : result.pr_points[k - 1].recall;
    ap += (result.pr_points[k].recall - prev_recall) * envelope;
  }
  result.ap = ap;
  return result;
}

std::vector<EvalResult> compare_configurations(const GroundTruthSet& gt,
                                               const std::vector<DetectionSet>& configs,
                                               double nms_iou, double iou_threshold) {
  if (configs.empty()) {
    throw Error(ErrorKind::Data, "no prompt configurations to compare");
  }
  std::vector<EvalResult> results(configs.size());
  std::vector<std::exception_ptr> failures(configs.size());
  const long long n = static_cast<long long>(configs.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] =
          evaluate_one(gt, configs[static_cast<std::size_t>(i)], nms_iou, iou_threshold);
    } catch (...) {
      failures[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : failures) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

namespace serial {

std::vector<EvalResult> compare_configurations(const GroundTruthSet& gt,
                                               const std::vector<DetectionSet>& configs,
                                               double nms_iou, double iou_threshold) {
  if (configs.empty()) {
    throw Error(ErrorKind::Data, "no prompt configurations to compare");
  }
  std::vector<EvalResult> results;
  results.reserve(configs.size());
  for (const DetectionSet& c : configs) {
    results.push_back(evaluate_one(gt, c, nms_iou, iou_threshold));
  }
  return results;
}

}  // namespace serial

namespace {

nlohmann::json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    throw Error(ErrorKind::Data, "invalid JSON in " + path.string());
  }
  return doc;
}

Box box_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4 || !std::all_of(j.begin(), j.end(), [](const auto& v) {
        return v.is_number();
      })) {
    throw Error(ErrorKind::Data, where + ": box must be [x_min, y_min, x_max, y_max]");
  }
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  check_box(b, where);
  return b;
}

}  // namespace

GroundTruthSet load_ground_truth(const std::filesystem::path& path) {
  const nlohmann::json doc = parse_json_file(path);
  if (!doc.is_object() || !doc.contains("class") || !doc.contains("images") ||
      !doc["images"].is_array()) {
    throw Error(ErrorKind::Data, path.string() + ": expected {\"class\": ..., \"images\": [...]}");
  }
  GroundTruthSet gt;
  gt.class_name = doc["class"].get<std::string>();
  for (const auto& img : doc["images"]) {
    if (!img.is_object() || !img.contains("id") || !img.contains("boxes")) {
      throw Error(ErrorKind::Data, path.string() + ": image entries need \"id\" and \"boxes\"");
    }
    const std::string id = img["id"].get<std::string>();
    std::vector<Box> boxes;
    for (const auto& jb : img["boxes"]) {
      boxes.push_back(box_from_json(jb, path.string() + " image '" + id + "'"));
    }
    gt.images.emplace_back(id, std::move(boxes));
  }
  validate_ground_truth(gt);
  return gt;
}

DetectionSet load_detections(const std::filesystem::path& path) {
  const nlohmann::json doc = parse_json_file(path);
  if (!doc.is_object() || !doc.contains("config") || !doc.contains("detections") ||
      !doc["detections"].is_array()) {
    throw Error(ErrorKind::Data,
                path.string() + ": expected {\"config\": ..., \"detections\": [...]}");
  }
  DetectionSet set;
  set.config_label = doc["config"].get<std::string>();
  for (const auto& jd : doc["detections"]) {
    if (!jd.is_object() || !jd.contains("image") || !jd.contains("box") || !jd.contains("score")) {
      throw Error(ErrorKind::Data,
                  path.string() + ": detection entries need \"image\", \"box\", \"score\"");
    }
    const std::string image = jd["image"].get<std::string>();
    Detection d;
    d.box = box_from_json(jd["box"], path.string() + " image '" + image + "'");
    d.score = jd["score"].get<double>();
    check_score(d.score, path.string() + " image '" + image + "'");
    d.prompt_text = jd.value("prompt", std::string{});
    set.by_image[image].push_back(std::move(d));
  }
  return set;
}

}  // namespace ccas
