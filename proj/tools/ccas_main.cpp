#include <charconv>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ccas/detection.hpp"
#include "ccas/embedding_provider.hpp"
#include "ccas/errors.hpp"
#include "ccas/fs_util.hpp"
#include "ccas/pipeline.hpp"
#include "ccas/prompt_gen.hpp"
#include "ccas/report.hpp"
#include "ccas/scoring.hpp"

namespace {

using ccas::Error;
using ccas::ErrorKind;
using ccas::PipelineConfig;

// Raw option values for one subcommand. Everything is captured as text so
// the precedence chain (flags > environment > config file > default) can be
// resolved uniformly after parsing.
struct CommonOpts {
  std::string target, confounders, n, include_base_name, variant, top;
  std::string pool_file, reply_file, embeddings_file;
  std::string llm_base_url, llm_model, embed_base_url, embed_model;
  std::string temperature, max_retries, cache_dir;
  std::string nms_iou, iou_threshold, out_dir;
  std::string config_file;

  std::map<std::string, CLI::Option*> options;
  std::map<std::string, const std::string*> slots;
};

void register_common(CLI::App* cmd, CommonOpts& o) {
  auto add = [&](const std::string& key, std::string& slot, const std::string& desc) {
    o.options[key] = cmd->add_option("--" + key, slot, desc);
    o.slots[key] = &slot;
  };
  add("target", o.target, "target class name");
  add("confounders", o.confounders, "comma-separated confounding class names");
  add("n", o.n, "prompts requested per class (default 15)");
  add("include-base-name", o.include_base_name,
      "true/false: prepend each base class name to its prompt pool (default true)");
  add("variant", o.variant, "scoring variant, avg or max (default avg)");
  add("top", o.top, "number of prompts to select (default 5)");
  add("pool-file", o.pool_file, "read the prompt pool from this JSON file instead of generating");
  add("reply-file", o.reply_file, "parse a recorded raw LLM reply instead of calling the service");
  add("embeddings-file", o.embeddings_file,
      "read embeddings from this JSONL file instead of calling the service");
  add("llm-base-url", o.llm_base_url, "chat completion service base URL");
  add("llm-model", o.llm_model, "chat completion model id (default gpt-4o)");
  add("embed-base-url", o.embed_base_url, "embedding service base URL");
  add("embed-model", o.embed_model, "embedding model id (default all-MiniLM-L6-v2)");
  add("temperature", o.temperature, "chat sampling temperature (default 1.0)");
  add("max-retries", o.max_retries, "retries per upstream request (default 2)");
  add("cache-dir", o.cache_dir, "embedding cache directory (empty disables the cache)");
  add("nms-iou", o.nms_iou, "IoU above which merged detections are suppressed (default 0.5)");
  add("iou-threshold", o.iou_threshold, "IoU required for a detection to match GT (default 0.5)");
  add("out-dir", o.out_dir, "directory artifacts are written into");
  cmd->add_option("--config", o.config_file, "key = value configuration file");
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  if (path.empty()) return {};
  std::string text;
  try {
    text = ccas::read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return ccas::parse_kv_config(text);
}

// Resolves one setting from the highest-priority source that supplies it.
class Resolver {
public:
  Resolver(const CommonOpts& opts, std::map<std::string, std::string> file_values)
      : opts_(opts), file_(std::move(file_values)) {}

  std::optional<std::string> value(const std::string& key, const char* env_name = nullptr) const {
    auto opt = opts_.options.find(key);
    if (opt != opts_.options.end() && opt->second->count() > 0) {
      return *opts_.slots.at(key);
    }
    if (env_name != nullptr) {
      if (const char* env = std::getenv(env_name)) return std::string(env);
    }
    auto f = file_.find(key);
    if (f != file_.end()) return f->second;
    return std::nullopt;
  }

  std::string text(const std::string& key, const char* env_name, std::string fallback) const {
    return value(key, env_name).value_or(std::move(fallback));
  }

  int integer(const std::string& key, int fallback) const {
    const auto raw = value(key);
    if (!raw) return fallback;
    int parsed = 0;
    const char* begin = raw->data();
    const char* end = begin + raw->size();
    auto [ptr, ec] = std::from_chars(begin, end, parsed);
    if (ec != std::errc() || ptr != end) {
      throw Error(ErrorKind::Config, "--" + key + " expects an integer, got '" + *raw + "'");
    }
    return parsed;
  }

  double real(const std::string& key, double fallback) const {
    const auto raw = value(key);
    if (!raw) return fallback;
    try {
      std::size_t used = 0;
      const double parsed = std::stod(*raw, &used);
      if (used != raw->size()) throw std::invalid_argument("trailing characters");
      return parsed;
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, "--" + key + " expects a number, got '" + *raw + "'");
    }
  }

  bool boolean(const std::string& key, bool fallback) const {
    const auto raw = value(key);
    if (!raw) return fallback;
    const std::string v = ccas::fold_case(ccas::normalize_text(*raw));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(ErrorKind::Config, "--" + key + " expects true or false, got '" + *raw + "'");
  }

private:
  const CommonOpts& opts_;
  std::map<std::string, std::string> file_;
};

std::vector<std::string> split_confounders(const std::string& list) {
  std::vector<std::string> out;
  std::string current;
  for (const char c : list) {
    if (c == ',') {
      out.push_back(ccas::normalize_text(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!ccas::normalize_text(current).empty() || !out.empty()) {
    out.push_back(ccas::normalize_text(current));
  }
  return out;
}

ccas::CcasVariant parse_variant(const std::string& text) {
  const std::string v = ccas::fold_case(ccas::normalize_text(text));
  if (v == "avg") return ccas::CcasVariant::Avg;
  if (v == "max") return ccas::CcasVariant::Max;
  throw Error(ErrorKind::Config, "--variant must be avg or max, got '" + text + "'");
}

PipelineConfig build_config(const Resolver& r) {
  PipelineConfig cfg;
  cfg.spec.target_name = ccas::normalize_text(r.text("target", nullptr, ""));
  cfg.spec.confounder_names = split_confounders(r.text("confounders", nullptr, ""));
  cfg.spec.prompts_per_class = r.integer("n", 15);
  cfg.include_base_name = r.boolean("include-base-name", true);
  cfg.variant = parse_variant(r.text("variant", nullptr, "avg"));
  cfg.top_n = r.integer("top", cfg.top_n);
  cfg.pool_file = r.text("pool-file", nullptr, "");
  cfg.reply_file = r.text("reply-file", nullptr, "");
  cfg.embeddings_file = r.text("embeddings-file", nullptr, "");
  cfg.llm_base_url = r.text("llm-base-url", "CCAS_LLM_BASE_URL", "");
  cfg.llm_model = r.text("llm-model", "CCAS_LLM_MODEL", cfg.llm_model);
  cfg.embed_base_url = r.text("embed-base-url", "CCAS_EMBED_BASE_URL", "");
  cfg.embed_model = r.text("embed-model", "CCAS_EMBED_MODEL", cfg.embed_model);
  cfg.temperature = r.real("temperature", cfg.temperature);
  cfg.max_retries = r.integer("max-retries", cfg.max_retries);
  cfg.cache_dir = r.text("cache-dir", nullptr, "");
  cfg.nms_iou = r.real("nms-iou", cfg.nms_iou);
  cfg.iou_threshold = r.real("iou-threshold", cfg.iou_threshold);
  cfg.out_dir = r.text("out-dir", nullptr, "");
  // Credentials come from the environment only; flags and config files are
  // rejected channels by construction (no such keys exist).
  if (const char* key = std::getenv("CCAS_LLM_API_KEY")) cfg.llm_api_key = key;
  if (const char* key = std::getenv("CCAS_EMBED_API_KEY")) cfg.embed_api_key = key;
  return cfg;
}

/// Loads the pool file and makes its embedded spec the effective one. Any
/// class names passed explicitly must agree with the file.
ccas::PromptPool adopt_pool_spec(PipelineConfig& cfg) {
  ccas::PromptPool pool = ccas::load_pool_file(cfg.pool_file);
  if (!cfg.spec.target_name.empty() &&
      ccas::normalized_key(cfg.spec.target_name) != ccas::normalized_key(pool.spec.target_name)) {
    throw Error(ErrorKind::Config, "--target '" + cfg.spec.target_name +
                                       "' conflicts with pool file target '" +
                                       pool.spec.target_name + "'");
  }
  if (!cfg.spec.confounder_names.empty()) {
    bool same = cfg.spec.confounder_names.size() == pool.spec.confounder_names.size();
    for (std::size_t m = 0; same && m < pool.spec.confounder_names.size(); ++m) {
      same = ccas::normalized_key(cfg.spec.confounder_names[m]) ==
             ccas::normalized_key(pool.spec.confounder_names[m]);
    }
    if (!same) {
      throw Error(ErrorKind::Config, "--confounders conflicts with the pool file's class list");
    }
  }
  cfg.spec = pool.spec;
  return pool;
}

void reject_pool_violations(const ccas::PromptPool& pool, const std::string& origin) {
  const auto violations = ccas::validate_pool(pool);
  if (violations.empty()) return;
  std::string msg = origin + " failed validation:";
  for (const auto& v : violations) msg += "\n  [" + v.code + "] " + v.message;
  throw Error(ErrorKind::Data, msg);
}

void check_threshold(const char* name, double value) {
  if (value < 0.0 || value > 1.0) {
    throw Error(ErrorKind::Config, std::string(name) + " must lie in [0, 1]");
  }
}

int run_generate(const CommonOpts& o) {
  const Resolver r(o, read_config_file(o.config_file));
  PipelineConfig cfg = build_config(r);
  const bool needs_generation = cfg.pool_file.empty() && cfg.reply_file.empty();
  if (!cfg.pool_file.empty()) adopt_pool_spec(cfg);
  ccas::validate_config(cfg, needs_generation, false);
  ccas::stage_generate(cfg);
  std::cout << "wrote " << (cfg.out_dir / ccas::kPoolArtifact).string() << "\n";
  return 0;
}

int run_embed(const CommonOpts& o) {
  const Resolver r(o, read_config_file(o.config_file));
  PipelineConfig cfg = build_config(r);
  if (cfg.pool_file.empty()) {
    throw Error(ErrorKind::Config, "embed needs --pool-file");
  }
  const ccas::PromptPool pool = adopt_pool_spec(cfg);
  ccas::validate_config(cfg, false, cfg.embeddings_file.empty());
  reject_pool_violations(pool, "pool file " + cfg.pool_file.string());
  ccas::stage_embed(cfg, pool);
  std::cout << "wrote " << (cfg.out_dir / ccas::kEmbeddingsArtifact).string() << "\n";
  return 0;
}

int run_score(const CommonOpts& o) {
  const Resolver r(o, read_config_file(o.config_file));
  PipelineConfig cfg = build_config(r);
  if (cfg.pool_file.empty()) {
    throw Error(ErrorKind::Config, "score needs --pool-file");
  }
  if (cfg.embeddings_file.empty()) {
    throw Error(ErrorKind::Config, "score needs --embeddings-file");
  }
  const ccas::PromptPool pool = adopt_pool_spec(cfg);
  ccas::validate_config(cfg, false, false);
  reject_pool_violations(pool, "pool file " + cfg.pool_file.string());
  const auto embeddings = ccas::load_embedding_file(cfg.embeddings_file);
  const ccas::CcasRanking ranking = ccas::stage_score(cfg, pool, embeddings);
  std::cout << ccas::render_ranking_table(ranking);
  return 0;
}

int run_select(const CommonOpts& o, const std::string& rankings_file) {
  const Resolver r(o, read_config_file(o.config_file));
  PipelineConfig cfg = build_config(r);
  if (rankings_file.empty()) {
    throw Error(ErrorKind::Config, "select needs --rankings-file");
  }
  if (cfg.out_dir.empty()) {
    throw Error(ErrorKind::Config, "--out-dir is required");
  }
  ccas::CcasRanking ranking = ccas::parse_rankings_json(ccas::read_text_file(rankings_file));
  // Without an explicit --variant the file's stored ordering stands.
  if (r.value("variant")) {
    ranking = ccas::make_ranking(ranking.entries, cfg.variant);
  }
  cfg.variant = ranking.sort_variant;
  const std::vector<std::string> selected = ccas::stage_select(cfg, ranking);
  for (const std::string& prompt : selected) std::cout << prompt << "\n";
  return 0;
}

int run_eval(const CommonOpts& o, const std::string& ground_truth,
             const std::vector<std::string>& detections) {
  const Resolver r(o, read_config_file(o.config_file));
  PipelineConfig cfg = build_config(r);
  if (ground_truth.empty()) {
    throw Error(ErrorKind::Config, "eval needs --ground-truth");
  }
  if (detections.empty()) {
    throw Error(ErrorKind::Config, "eval needs at least one --detections file");
  }
  if (cfg.out_dir.empty()) {
    throw Error(ErrorKind::Config, "--out-dir is required");
  }
  check_threshold("--nms-iou", cfg.nms_iou);
  check_threshold("--iou-threshold", cfg.iou_threshold);
  std::vector<std::filesystem::path> files(detections.begin(), detections.end());
  const std::vector<ccas::EvalResult> results = ccas::stage_eval(cfg, ground_truth, files);
  std::cout << ccas::render_ap_table(results);
  return 0;
}

int run_report(const CommonOpts& o, const std::string& rankings_file,
               const std::string& eval_file) {
  const Resolver r(o, read_config_file(o.config_file));
  const PipelineConfig cfg = build_config(r);
  if (rankings_file.empty() && eval_file.empty()) {
    throw Error(ErrorKind::Config, "report needs --rankings-file and/or --eval-file");
  }
  if (!rankings_file.empty()) {
    ccas::CcasRanking ranking = ccas::parse_rankings_json(ccas::read_text_file(rankings_file));
    if (r.value("variant")) {
      ranking = ccas::make_ranking(ranking.entries, cfg.variant);
    }
    std::cout << ccas::render_ranking_table(ranking);
  }
  if (!eval_file.empty()) {
    if (!rankings_file.empty()) std::cout << "\n";
    const auto results = ccas::parse_eval_results_json(ccas::read_text_file(eval_file));
    std::cout << ccas::render_ap_table(results);
  }
  return 0;
}

int run_pipeline_cmd(const CommonOpts& o) {
  const Resolver r(o, read_config_file(o.config_file));
  PipelineConfig cfg = build_config(r);
  if (!cfg.pool_file.empty()) adopt_pool_spec(cfg);
  ccas::run_pipeline(cfg);
  std::cout << "wrote artifacts to " << cfg.out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ccas: prompt refinement and evaluation for open-vocabulary object detection"};
  app.require_subcommand(1);
  app.footer(
      "Environment:\n"
      "  CCAS_LLM_API_KEY      credential for the chat completion service\n"
      "  CCAS_EMBED_API_KEY    credential for the embedding service\n"
      "  CCAS_LLM_BASE_URL, CCAS_LLM_MODEL, CCAS_EMBED_BASE_URL, CCAS_EMBED_MODEL\n"
      "                        defaults for the matching flags\n"
      "Precedence: flags > environment > --config file > built-in defaults.\n"
      "Credentials are read from the environment only and never echoed.\n"
      "Exit codes: 0 ok, 2 config, 3 upstream service, 4 data/parse, 5 evaluation.");

  CommonOpts gen_o, embed_o, score_o, select_o, eval_o, report_o, pipe_o;
  std::string select_rankings, report_rankings, report_eval, eval_gt;
  std::vector<std::string> eval_dets;

  CLI::App* gen = app.add_subcommand("generate", "produce or load the prompt pool");
  register_common(gen, gen_o);

  CLI::App* embed = app.add_subcommand("embed", "embed the pool's prompts");
  register_common(embed, embed_o);

  CLI::App* score = app.add_subcommand("score", "similarity matrix plus CCAS ranking");
  register_common(score, score_o);

  CLI::App* select = app.add_subcommand("select", "pick the top prompts from a ranking");
  register_common(select, select_o);
  select->add_option("--rankings-file", select_rankings, "rankings JSON produced by score");

  CLI::App* eval = app.add_subcommand("eval", "average precision per prompt configuration");
  register_common(eval, eval_o);
  eval->add_option("--ground-truth", eval_gt, "ground truth JSON file");
  eval->add_option("--detections", eval_dets, "detection JSON file (repeatable)");

  CLI::App* report = app.add_subcommand("report", "render tables from machine artifacts");
  register_common(report, report_o);
  report->add_option("--rankings-file", report_rankings, "rankings JSON to render");
  report->add_option("--eval-file", report_eval, "eval results JSON to render");

  CLI::App* pipe = app.add_subcommand("pipeline", "generate, embed, score, and select in one run");
  register_common(pipe, pipe_o);

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return run_generate(gen_o);
    if (embed->parsed()) return run_embed(embed_o);
    if (score->parsed()) return run_score(score_o);
    if (select->parsed()) return run_select(select_o, select_rankings);
    if (eval->parsed()) return run_eval(eval_o, eval_gt, eval_dets);
    if (report->parsed()) return run_report(report_o, report_rankings, report_eval);
    if (pipe->parsed()) return run_pipeline_cmd(pipe_o);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ccas::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
