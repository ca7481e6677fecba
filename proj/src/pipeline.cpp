#include "ccas/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "ccas/embedding_math.hpp"
#include "ccas/embedding_provider.hpp"
#include "ccas/errors.hpp"
#include "ccas/fs_util.hpp"
#include "ccas/prompt_gen.hpp"
#include "ccas/report.hpp"

namespace ccas {

std::map<std::string, std::string> parse_kv_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = normalize_text(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config,
                  "config line " + std::to_string(line_no) + " is not key = value: '" + line + "'");
    }
    std::string key = normalize_text(line.substr(0, eq));
    std::string value = normalize_text(line.substr(eq + 1));
    if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                              (value.front() == '\'' && value.back() == '\''))) {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) {
      throw Error(ErrorKind::Config, "config line " + std::to_string(line_no) + " has an empty key");
    }
    out[key] = value;
  }
  return out;
}

void validate_config(const PipelineConfig& config, bool needs_generation, bool needs_embedding) {
  PromptPool probe;
  probe.spec = config.spec;
  probe.target_candidates = {{normalize_text(config.spec.target_name), ClassRole::target(),
                              PromptSource::BaseClassName}};
  for (std::size_t m = 0; m < config.spec.confounder_names.size(); ++m) {
    probe.confounder_candidates.push_back({{normalize_text(config.spec.confounder_names[m]),
                                            ClassRole::confounder(static_cast<int>(m + 1)),
                                            PromptSource::BaseClassName}});
  }
  for (const Violation& v : validate_pool(probe)) {
    throw Error(ErrorKind::Config, "invalid class spec (" + v.code + "): " + v.message);
  }
  if (config.top_n < 1) {
    throw Error(ErrorKind::Config, "--top must be >= 1, got " + std::to_string(config.top_n));
  }
  if (config.nms_iou < 0.0 || config.nms_iou > 1.0) {
    throw Error(ErrorKind::Config, "--nms-iou must lie in [0, 1]");
  }
  if (config.iou_threshold < 0.0 || config.iou_threshold > 1.0) {
    throw Error(ErrorKind::Config, "--iou-threshold must lie in [0, 1]");
  }
  if (config.temperature < 0.0) {
    throw Error(ErrorKind::Config, "--temperature must be >= 0");
  }
  if (config.max_retries < 0) {
    throw Error(ErrorKind::Config, "--max-retries must be >= 0");
  }
  if (config.out_dir.empty()) {
    throw Error(ErrorKind::Config, "--out-dir is required");
  }
  if (needs_generation) {
    if (config.llm_base_url.empty()) {
      throw Error(ErrorKind::Config,
                  "online generation needs --llm-base-url (or provide --pool-file / --reply-file)");
    }
    if (config.llm_api_key.empty()) {
      throw Error(ErrorKind::Config, "online generation needs a credential in CCAS_LLM_API_KEY");
    }
  }
  if (needs_embedding) {
    if (config.embed_base_url.empty()) {
      throw Error(ErrorKind::Config,
                  "online embedding needs --embed-base-url (or provide --embeddings-file)");
    }
    if (config.embed_api_key.empty()) {
      throw Error(ErrorKind::Config, "online embedding needs a credential in CCAS_EMBED_API_KEY");
    }
  }
}

namespace {

void ensure_out_dir(const PipelineConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) {
    throw Error(ErrorKind::Config,
                "cannot create output directory " + config.out_dir.string() + ": " + ec.message());
  }
}

void reject_violations(const PromptPool& pool, const std::string& origin) {
  const std::vector<Violation> violations = validate_pool(pool);
  if (violations.empty()) return;
  std::string msg = origin + " failed validation:";
  for (const Violation& v : violations) msg += "\n  [" + v.code + "] " + v.message;
  throw Error(ErrorKind::Data, msg);
}

std::vector<std::string> pool_texts(const PipelineConfig& config, const PromptPool& pool) {
  std::vector<std::string> texts;
  texts.push_back(normalize_text(config.spec.target_name));  // base class vector, always needed
  for (const PromptCandidate& c : pool.target_candidates) texts.push_back(c.text);
  for (const auto& cls : pool.confounder_candidates) {
    for (const PromptCandidate& c : cls) texts.push_back(c.text);
  }
  return texts;
}

const EmbeddingVector& vector_for(const std::map<std::string, EmbeddingVector>& embeddings,
                                  const std::string& text, const std::string& origin) {
  auto it = embeddings.find(normalize_text(text));
  if (it == embeddings.end()) {
    throw Error(ErrorKind::Data, origin + " has no embedding for text '" + text + "'");
  }
  return it->second;
}

}  // namespace

PromptPool stage_generate(const PipelineConfig& config) {
  ensure_out_dir(config);
  PromptPool pool;
  std::string origin;
  if (!config.pool_file.empty()) {
    pool = load_pool_file(config.pool_file);
    origin = "pool file " + config.pool_file.string();
    if (config.include_base_name) ensure_base_names(pool);
  } else if (!config.reply_file.empty()) {
    pool = parse_pool_reply(read_text_file(config.reply_file), config.spec);
    origin = "reply file " + config.reply_file.string();
    if (config.include_base_name) ensure_base_names(pool);
  } else {
    GenerationRequest request;
    request.spec = config.spec;
    request.model_id = config.llm_model;
    request.temperature = config.temperature;
    request.max_retries = config.max_retries;
    request.include_base_names = config.include_base_name;
    LlmEndpointConfig endpoint{config.llm_base_url, config.llm_api_key, config.backoff_initial_ms};
    GenerationResult generated = generate_pool(request, endpoint);
    atomic_write_file(config.out_dir / kRawReplyArtifact, generated.raw_reply);
    pool = std::move(generated.pool);
    origin = "generated pool";
  }
  reject_violations(pool, origin);
  save_pool_file(pool, config.out_dir / kPoolArtifact);
  return pool;
}

std::map<std::string, EmbeddingVector> stage_embed(const PipelineConfig& config,
                                                   const PromptPool& pool) {
  ensure_out_dir(config);
  const std::vector<std::string> texts = pool_texts(config, pool);
  std::map<std::string, EmbeddingVector> selected;
  if (!config.embeddings_file.empty()) {
    const std::map<std::string, EmbeddingVector> all = load_embedding_file(config.embeddings_file);
    for (const std::string& text : texts) {
      auto it = all.find(normalize_text(text));
      if (it == all.end()) {
        throw Error(ErrorKind::Data, "embedding file " + config.embeddings_file.string() +
                                         " has no record for text '" + text + "'");
      }
      selected[it->first] = it->second;
    }
  } else {
    EmbeddingProvider::Options options;
    options.base_url = config.embed_base_url;
    options.api_key = config.embed_api_key;
    options.retry.max_retries = config.max_retries;
    options.retry.backoff_initial_ms = config.backoff_initial_ms;
    options.cache_dir = config.cache_dir;
    EmbeddingProvider provider(std::move(options));
    const std::vector<EmbeddingVector> vectors = provider.embed_texts(texts, config.embed_model);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      selected[normalize_text(texts[i])] = vectors[i];
    }
  }
  save_embedding_file(selected, config.out_dir / kEmbeddingsArtifact);
  return selected;
}

CcasRanking stage_score(const PipelineConfig& config, const PromptPool& pool,
                        const std::map<std::string, EmbeddingVector>& embeddings) {
  ensure_out_dir(config);
  const std::string origin = "embedding set";

  CcasInputs inputs;
  inputs.base_class_embedding = vector_for(embeddings, config.spec.target_name, origin);
  for (const PromptCandidate& c : pool.target_candidates) {
    inputs.target_candidates.push_back({c.text, vector_for(embeddings, c.text, origin)});
  }
  for (const auto& cls : pool.confounder_candidates) {
    std::vector<LabeledEmbedding> list;
    for (const PromptCandidate& c : cls) {
      list.push_back({c.text, vector_for(embeddings, c.text, origin)});
    }
    inputs.confounder_candidates.push_back(std::move(list));
  }

  const SimilarityMatrix matrix = build_similarity_matrix(
      inputs.target_candidates, inputs.confounder_candidates, config.spec.confounder_names);
  export_similarity_csv(matrix, config.out_dir / kSimilarityArtifact);

  const CcasRanking ranking = rank_prompts(inputs, config.variant);
  atomic_write_file(config.out_dir / kRankingsArtifact, rankings_json(ranking));

  // Both variants are reported regardless of which one drives selection.
  CcasRanking avg = make_ranking(ranking.entries, CcasVariant::Avg);
  CcasRanking max = make_ranking(ranking.entries, CcasVariant::Max);
  atomic_write_file(config.out_dir / kRankingAvgArtifact, render_ranking_table(avg));
  atomic_write_file(config.out_dir / kRankingMaxArtifact, render_ranking_table(max));
  return ranking;
}

std::vector<std::string> stage_select(const PipelineConfig& config, const CcasRanking& ranking) {
  ensure_out_dir(config);
  const std::vector<std::string> selected = select_top_n(ranking, config.top_n);
  atomic_write_file(config.out_dir / kSelectedArtifact,
                    selected_prompts_json(selected, config.variant, config.top_n));
  return selected;
}

std::vector<EvalResult> stage_eval(const PipelineConfig& config,
                                   const std::filesystem::path& gt_file,
                                   const std::vector<std::filesystem::path>& detection_files) {
  ensure_out_dir(config);
  if (detection_files.empty()) {
    throw Error(ErrorKind::Config, "eval needs at least one --detections file");
  }
  GroundTruthSet gt;
  try {
    gt = load_ground_truth(gt_file);
  } catch (const Error& e) {
    throw Error(e.kind(), "ground truth " + gt_file.string() + ": " + e.what());
  }

  // Files sharing a config label form one configuration and are merged.
  std::vector<std::string> order;
  std::map<std::string, std::vector<DetectionSet>> grouped;
  for (const std::filesystem::path& file : detection_files) {
    DetectionSet set = load_detections(file);
    if (!grouped.count(set.config_label)) order.push_back(set.config_label);
    grouped[set.config_label].push_back(std::move(set));
  }

  std::vector<DetectionSet> configs;
  configs.reserve(order.size());
  for (const std::string& label : order) {
    configs.push_back(merge_prompt_detections(grouped[label], config.nms_iou));
  }

  std::vector<EvalResult> results;
  try {
    results = compare_configurations(gt, configs, config.nms_iou, config.iou_threshold);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Eval) {
      throw Error(ErrorKind::Eval, std::string(e.what()) + " (file: " + gt_file.string() + ")");
    }
    throw;
  }
  atomic_write_file(config.out_dir / kEvalResultsArtifact,
                    eval_results_json(results, config.nms_iou));
  atomic_write_file(config.out_dir / kApTableArtifact, render_ap_table(results));
  return results;
}

void run_pipeline(const PipelineConfig& config) {
  const bool needs_generation = config.pool_file.empty() && config.reply_file.empty();
  const bool needs_embedding = config.embeddings_file.empty();
  validate_config(config, needs_generation, needs_embedding);
  ensure_out_dir(config);
  atomic_write_file(config.out_dir / kEffectiveConfigArtifact, effective_config_text(config));

  const PromptPool pool = stage_generate(config);
  const std::map<std::string, EmbeddingVector> embeddings = stage_embed(config, pool);
  const CcasRanking ranking = stage_score(config, pool, embeddings);
  stage_select(config, ranking);
}

std::string effective_config_text(const PipelineConfig& config) {
  std::map<std::string, std::string> kv;
  kv["target"] = config.spec.target_name;
  std::string confounders;
  for (const std::string& name : config.spec.confounder_names) {
    confounders += (confounders.empty() ? "" : ",") + name;
  }
  kv["confounders"] = confounders;
  kv["n"] = std::to_string(config.spec.prompts_per_class);
  kv["include-base-name"] = config.include_base_name ? "true" : "false";
  kv["variant"] = config.variant == CcasVariant::Avg ? "avg" : "max";
  kv["top"] = std::to_string(config.top_n);
  kv["pool-file"] = config.pool_file.string();
  kv["reply-file"] = config.reply_file.string();
  kv["embeddings-file"] = config.embeddings_file.string();
  kv["llm-base-url"] = config.llm_base_url;
  kv["llm-model"] = config.llm_model;
  kv["embed-base-url"] = config.embed_base_url;
  kv["embed-model"] = config.embed_model;
  kv["temperature"] = std::to_string(config.temperature);
  kv["max-retries"] = std::to_string(config.max_retries);
  kv["cache-dir"] = config.cache_dir.string();
  kv["nms-iou"] = std::to_string(config.nms_iou);
  kv["iou-threshold"] = std::to_string(config.iou_threshold);
  kv["out-dir"] = config.out_dir.string();

  std::string out;
  for (const auto& [key, value] : kv) {
    out += key + " = " + value + "\n";
  }
  return out;
}

}  // namespace ccas
