#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ccas/core.hpp"
#include "ccas/detection.hpp"
#include "ccas/scoring.hpp"

namespace ccas {

/// Fully resolved run configuration. The CLI populates this with precedence
/// flags > environment > config file > defaults; credentials only ever come
/// from the environment.
struct PipelineConfig {
  ClassSpec spec;
  bool include_base_name = true;
  CcasVariant variant = CcasVariant::Avg;
  int top_n = 5;

  std::filesystem::path pool_file;        // offline pool source
  std::filesystem::path reply_file;       // recorded raw LLM reply to parse
  std::filesystem::path embeddings_file;  // offline embedding source

  std::string llm_base_url;
  std::string llm_model = "gpt-4o";
  std::string llm_api_key;
  std::string embed_base_url;
  std::string embed_model = "all-MiniLM-L6-v2";
  std::string embed_api_key;
  double temperature = 1.0;
  int max_retries = 2;
  int backoff_initial_ms = 250;
  std::filesystem::path cache_dir;

  double nms_iou = 0.5;
  double iou_threshold = 0.5;
  std::filesystem::path out_dir;
};

// Artifact names inside out_dir.
inline constexpr const char* kPoolArtifact = "pool.json";
inline constexpr const char* kRawReplyArtifact = "raw_reply.txt";
inline constexpr const char* kEmbeddingsArtifact = "embeddings.jsonl";
inline constexpr const char* kSimilarityArtifact = "similarity.csv";
inline constexpr const char* kRankingsArtifact = "rankings.json";
inline constexpr const char* kRankingAvgArtifact = "ranking_avg.txt";
inline constexpr const char* kRankingMaxArtifact = "ranking_max.txt";
inline constexpr const char* kSelectedArtifact = "selected_prompts.json";
inline constexpr const char* kEvalResultsArtifact = "eval_results.json";
inline constexpr const char* kApTableArtifact = "ap_table.txt";
inline constexpr const char* kEffectiveConfigArtifact = "effective_config.txt";

/// "key = value" per line; '#' comments; values may be quoted.
std::map<std::string, std::string> parse_kv_config(const std::string& text);

/// Fail-fast validation; throws Error(Config). When online stages will run,
/// their base URLs and credentials must already be present.
void validate_config(const PipelineConfig& config, bool needs_generation, bool needs_embedding);

// Stages. Each writes its artifacts into config.out_dir and returns the data
// the next stage consumes, so subcommands can re-run any stage from files.
PromptPool stage_generate(const PipelineConfig& config);
std::map<std::string, EmbeddingVector> stage_embed(const PipelineConfig& config,
                                                   const PromptPool& pool);
CcasRanking stage_score(const PipelineConfig& config, const PromptPool& pool,
                        const std::map<std::string, EmbeddingVector>& embeddings);
std::vector<std::string> stage_select(const PipelineConfig& config, const CcasRanking& ranking);
std::vector<EvalResult> stage_eval(const PipelineConfig& config,
                                   const std::filesystem::path& gt_file,
                                   const std::vector<std::filesystem::path>& detection_files);

/// generate (or load) -> embed -> score -> select, with every artifact
/// written atomically under config.out_dir.
void run_pipeline(const PipelineConfig& config);

/// The audit echo written as effective_config.txt; never contains credentials.
std::string effective_config_text(const PipelineConfig& config);

}  // namespace ccas
