#include "ccas/report.hpp"

#include <cstdio>

#include "json.hpp"

#include "ccas/errors.hpp"
#include "ccas/fs_util.hpp"

namespace ccas {

namespace {

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::string csv_field(const std::string& raw) {
  if (raw.find_first_of(",\"\n") == std::string::npos) return raw;
  std::string quoted = "\"";
  for (char c : raw) {
    if (c == '"') quoted += "\"\"";
    else quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace

std::string similarity_csv_text(const SimilarityMatrix& matrix) {
  std::string out = "target";
  for (std::size_t j = 0; j < matrix.cols; ++j) {
    const int cls = matrix.col_class_index[j];
    const std::string name = cls >= 1 && static_cast<std::size_t>(cls) <= matrix.class_names.size()
                                 ? matrix.class_names[cls - 1]
                                 : "class_" + std::to_string(cls);
    out += "," + csv_field(name + ":" + matrix.col_labels[j]);
  }
  out += "\n";
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    out += csv_field(matrix.row_labels[i]);
    for (std::size_t j = 0; j < matrix.cols; ++j) {
      out += "," + fixed(matrix.at(i, j), 6);
    }
    out += "\n";
  }
  return out;
}

void export_similarity_csv(const SimilarityMatrix& matrix, const std::filesystem::path& path) {
  atomic_write_file(path, similarity_csv_text(matrix));
}

std::string render_ranking_table(const CcasRanking& ranking) {
  const std::string score_header = ranking.sort_variant == CcasVariant::Avg ? "ccas_avg" : "ccas_max";
  std::string out = "prompt  " + score_header + "\n";
  for (const RankedPrompt& e : ranking.entries) {
    const double score = ranking.sort_variant == CcasVariant::Avg ? e.ccas_avg : e.ccas_max;
    out += e.text + "  " + fixed(score, 4) + "\n";
  }
  return out;
}

std::string render_ap_table(const std::vector<EvalResult>& results) {
  std::string out = "configuration  ap\n";
  for (const EvalResult& r : results) {
    out += r.config_label + "  " + fixed(r.ap, 4) + "\n";
  }
  return out;
}

std::string rankings_json(const CcasRanking& ranking) {
  nlohmann::json entries = nlohmann::json::array();
  for (const RankedPrompt& e : ranking.entries) {
    entries.push_back({{"prompt", e.text}, {"ccas_avg", e.ccas_avg}, {"ccas_max", e.ccas_max}});
  }
  nlohmann::json doc = {
      {"variant", ranking.sort_variant == CcasVariant::Avg ? "avg" : "max"},
      {"entries", entries},
  };
  return doc.dump(2) + "\n";
}

CcasRanking parse_rankings_json(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("variant") ||
      !doc.contains("entries") || !doc["entries"].is_array()) {
    throw Error(ErrorKind::Data, "rankings file must be {\"variant\": ..., \"entries\": [...]}");
  }
  const std::string variant = doc["variant"].get<std::string>();
  if (variant != "avg" && variant != "max") {
    throw Error(ErrorKind::Data, "rankings variant must be \"avg\" or \"max\", got '" + variant + "'");
  }
  CcasRanking ranking;
  ranking.sort_variant = variant == "avg" ? CcasVariant::Avg : CcasVariant::Max;
  for (const auto& item : doc["entries"]) {
    if (!item.is_object() || !item.contains("prompt")) {
      throw Error(ErrorKind::Data, "rankings entries need a \"prompt\" field");
    }
    ranking.entries.push_back({item["prompt"].get<std::string>(), item.value("ccas_avg", 0.0),
                               item.value("ccas_max", 0.0)});
  }
  return ranking;
}

std::string selected_prompts_json(const std::vector<std::string>& prompts, CcasVariant variant,
                                  int top_n) {
  nlohmann::json doc = {
      {"variant", variant == CcasVariant::Avg ? "avg" : "max"},
      {"top", top_n},
      {"prompts", prompts},
  };
  return doc.dump(2) + "\n";
}

std::string eval_results_json(const std::vector<EvalResult>& results, double nms_iou) {
  nlohmann::json items = nlohmann::json::array();
  for (const EvalResult& r : results) {
    nlohmann::json pr = nlohmann::json::array();
    for (const PrPoint& p : r.pr_points) pr.push_back({p.recall, p.precision});
    items.push_back({
        {"config", r.config_label},
        {"ap", r.ap},
        {"tp", r.tp},
        {"fp", r.fp},
        {"num_gt", r.num_gt},
        {"iou_threshold", r.iou_threshold},
        {"pr", pr},
    });
  }
  nlohmann::json doc = {{"nms_iou", nms_iou}, {"results", items}};
  return doc.dump(2) + "\n";
}

std::vector<EvalResult> parse_eval_results_json(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("results") ||
      !doc["results"].is_array()) {
    throw Error(ErrorKind::Data, "eval results file must be {\"nms_iou\": ..., \"results\": [...]}");
  }
  std::vector<EvalResult> results;
  for (const auto& item : doc["results"]) {
    if (!item.is_object() || !item.contains("config") || !item.contains("ap")) {
      throw Error(ErrorKind::Data, "eval results entries need \"config\" and \"ap\" fields");
    }
    EvalResult r;
    r.config_label = item["config"].get<std::string>();
    r.ap = item["ap"].get<double>();
    r.tp = item.value("tp", 0L);
    r.fp = item.value("fp", 0L);
    r.num_gt = item.value("num_gt", 0L);
    r.iou_threshold = item.value("iou_threshold", 0.5);
    if (item.contains("pr") && item["pr"].is_array()) {
      for (const auto& p : item["pr"]) {
        if (!p.is_array() || p.size() != 2) {
          throw Error(ErrorKind::Data, "eval results pr points must be [recall, precision] pairs");
        }
        r.pr_points.push_back({p[0].get<double>(), p[1].get<double>()});
      }
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace ccas
