#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ccas/core.hpp"
#include "ccas/detection.hpp"

namespace ccas {

// All emitters are pure: identical inputs give byte-identical text.

/// Header row "target,<class>:<prompt>,..."; one row per target prompt;
/// cells at 6 decimals. Fields containing commas or quotes are RFC 4180
/// quoted.
std::string similarity_csv_text(const SimilarityMatrix& matrix);
void export_similarity_csv(const SimilarityMatrix& matrix, const std::filesystem::path& path);

/// Two-column table, prompt and the ranked variant's score at 4 decimals.
std::string render_ranking_table(const CcasRanking& ranking);

/// Config label and AP at 4 decimals, rows in input order.
std::string render_ap_table(const std::vector<EvalResult>& results);

// Machine-readable artifacts.
std::string rankings_json(const CcasRanking& ranking);
CcasRanking parse_rankings_json(const std::string& text);
std::string selected_prompts_json(const std::vector<std::string>& prompts, CcasVariant variant,
                                  int top_n);
std::string eval_results_json(const std::vector<EvalResult>& results, double nms_iou);
std::vector<EvalResult> parse_eval_results_json(const std::string& text);

}  // namespace ccas
