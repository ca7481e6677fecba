#pragma once

#include <filesystem>
#include <string>

#include "ccas/core.hpp"
#include "ccas/http_client.hpp"

namespace ccas {

struct GenerationRequest {
  ClassSpec spec;
  std::string model_id;
  double temperature = 1.0;
  int max_retries = 2;
  bool include_base_names = true;
};

struct LlmEndpointConfig {
  std::string base_url;
  std::string api_key;
  int backoff_initial_ms = 250;
};

struct GenerationResult {
  PromptPool pool;
  std::string raw_reply;
  int retries_used = 0;
};

/// The generation instruction sent to the chat model, with the prompt count
/// and the class list (target first, then confounders) substituted in.
/// Byte-stable for identical specs.
std::string render_generation_prompt(const ClassSpec& spec);

/// Tolerant parser for chat replies. Accepts per-class header sections with
/// bulleted or numbered phrase lines, or a JSON object mapping class names to
/// phrase arrays (optionally fenced). Headers and keys are matched to classes
/// case-insensitively, longest class name first. Bullets, numbering, and
/// surrounding quotes are stripped; duplicates within a class keep the first
/// occurrence. Throws Error(Data) with the raw text attached when nothing can
/// be parsed, or when a class ends up with zero prompts.
PromptPool parse_pool_reply(const std::string& raw, const ClassSpec& spec);

/// render -> POST /chat/completions -> parse. Ensures each class pool carries
/// its base class name when the request asks for it.
GenerationResult generate_pool(const GenerationRequest& request, const LlmEndpointConfig& endpoint);

// Pool file: {"spec": {"target": str, "confounders": [str], "n": int},
//             "classes": {class_name: [prompt, ...]}}, UTF-8.
std::string serialize_pool(const PromptPool& pool);
PromptPool parse_pool_json(const std::string& text);
PromptPool load_pool_file(const std::filesystem::path& path);
void save_pool_file(const PromptPool& pool, const std::filesystem::path& path);

/// Prepend each class's base name to its pool unless already present.
void ensure_base_names(PromptPool& pool);

}  // namespace ccas
