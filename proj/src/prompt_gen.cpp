#include "ccas/prompt_gen.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <unordered_set>

#include "json.hpp"

#include "ccas/errors.hpp"
#include "ccas/fs_util.hpp"

namespace ccas {

namespace {

constexpr const char* kTemplateHead =
    "Generate an extensive list of possible descriptions, synonyms, and detection-oriented "
    "prompts without negatives, limiting the prompt to a phrase, to detect the following base "
    "object classes with ";
constexpr const char* kTemplateTail = " prompts per class, intended for use with a vision-language model: ";

}  // namespace

std::string render_generation_prompt(const ClassSpec& spec) {
  std::string classes = spec.target_name;
  for (const std::string& name : spec.confounder_names) {
    classes += ", " + name;
  }
  return kTemplateHead + std::to_string(spec.prompts_per_class) + kTemplateTail + classes;
}

namespace {

struct ClassSlot {
  std::string name;
  std::string key;  // normalized
  ClassRole role;
};

std::vector<ClassSlot> class_slots(const ClassSpec& spec) {
  std::vector<ClassSlot> slots;
  slots.push_back({spec.target_name, normalized_key(spec.target_name), ClassRole::target()});
  for (std::size_t m = 0; m < spec.confounder_names.size(); ++m) {
    slots.push_back({spec.confounder_names[m], normalized_key(spec.confounder_names[m]),
                     ClassRole::confounder(static_cast<int>(m + 1))});
  }
  return slots;
}

// Best class for a header or JSON key. An exact name match always wins;
// otherwise the longest class name that contains, or is contained in, the
// candidate. Longest-first keeps "sunglasses prompts" from landing in
// "glasses"; exact-first keeps "glasses" itself out of "sunglasses".
std::optional<std::size_t> match_class(const std::string& candidate,
                                       const std::vector<ClassSlot>& slots) {
  const std::string key = normalized_key(candidate);
  if (key.empty()) return std::nullopt;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (key == slots[i].key) return i;
  }
  std::optional<std::size_t> best;
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::string& cls = slots[i].key;
    const bool hit = key.find(cls) != std::string::npos || cls.find(key) != std::string::npos;
    if (hit && cls.size() > best_len) {
      best = i;
      best_len = cls.size();
    }
  }
  return best;
}

std::string strip_enumeration(std::string line) {
  std::size_t i = 0;
  // bullet characters, including the UTF-8 dot/dash bullets LLMs favor
  static const std::vector<std::string> bullets = {"-", "*", "+", "•", "–", "—"};
  bool stripped = true;
  while (stripped && i < line.size()) {
    stripped = false;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    for (const std::string& b : bullets) {
      if (line.compare(i, b.size(), b) == 0) {
        i += b.size();
        stripped = true;
        break;
      }
    }
    if (!stripped && i < line.size() && (std::isdigit(static_cast<unsigned char>(line[i])) || line[i] == '(')) {
      std::size_t j = i;
      if (line[j] == '(') ++j;
      std::size_t digits = 0;
      while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) {
        ++j;
        ++digits;
      }
      if (digits > 0 && j < line.size() && (line[j] == '.' || line[j] == ')')) {
        i = j + 1;
        stripped = true;
      }
    }
  }
  return line.substr(i);
}

std::string strip_wrapping(std::string text) {
  text = normalize_text(text);
  auto drop_pair = [&](const std::string& open, const std::string& close) {
    if (text.size() >= open.size() + close.size() && text.compare(0, open.size(), open) == 0 &&
        text.compare(text.size() - close.size(), close.size(), close) == 0) {
      text = text.substr(open.size(), text.size() - open.size() - close.size());
      text = normalize_text(text);
      return true;
    }
    return false;
  };
  while (drop_pair("**", "**") || drop_pair("\"", "\"") || drop_pair("'", "'") ||
         drop_pair("`", "`") || drop_pair("“", "”")) {
  }
  return text;
}

void add_phrase(std::vector<PromptCandidate>& pool, std::unordered_set<std::string>& seen,
                const std::string& text, const ClassRole& role, PromptSource source) {
  const std::string clean = normalize_text(text);
  if (clean.empty()) return;
  if (!seen.insert(normalized_key(clean)).second) return;
  pool.push_back({clean, role, source});
}

struct ParsedClasses {
  std::vector<std::vector<PromptCandidate>> pools;        // one per slot
  std::vector<std::unordered_set<std::string>> seen_keys;
  bool any = false;
};

bool parse_json_reply(const std::string& raw, const std::vector<ClassSlot>& slots,
                      ParsedClasses& out) {
  // The object may arrive bare, fenced, or buried in prose.
  std::vector<std::string> attempts;
  attempts.push_back(normalize_text(raw));
  const auto fence = raw.find("```");
  if (fence != std::string::npos) {
    auto body_start = raw.find('\n', fence);
    const auto fence_end = raw.find("```", fence + 3);
    if (body_start != std::string::npos && fence_end != std::string::npos && body_start < fence_end) {
      attempts.push_back(raw.substr(body_start + 1, fence_end - body_start - 1));
    }
  }
  const auto brace = raw.find('{');
  const auto brace_end = raw.rfind('}');
  if (brace != std::string::npos && brace_end != std::string::npos && brace < brace_end) {
    attempts.push_back(raw.substr(brace, brace_end - brace + 1));
  }

  for (const std::string& attempt : attempts) {
    nlohmann::json doc = nlohmann::json::parse(attempt, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) continue;
    bool matched_any = false;
    for (const auto& [key, value] : doc.items()) {
      if (!value.is_array()) continue;
      const auto slot = match_class(key, slots);
      if (!slot) continue;
      for (const auto& item : value) {
        if (!item.is_string()) continue;
        add_phrase(out.pools[*slot], out.seen_keys[*slot], strip_wrapping(item.get<std::string>()),
                   slots[*slot].role, PromptSource::LlmGenerated);
        matched_any = true;
      }
    }
    if (matched_any) {
      out.any = true;
      return true;
    }
  }
  return false;
}

void parse_text_reply(const std::string& raw, const std::vector<ClassSlot>& slots,
                      ParsedClasses& out) {
  std::optional<std::size_t> active;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const auto eol = raw.find('\n', pos);
    std::string line = raw.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? raw.size() + 1 : eol + 1;

    std::string body = strip_enumeration(line);
    // Markdown headers
    while (!body.empty() && body.front() == '#') body.erase(body.begin());
    body = normalize_text(body);
    if (body.empty()) continue;

    const bool has_colon = body.back() == ':';
    std::string head = body;
    if (has_colon) head.pop_back();
    head = strip_wrapping(head);

    const auto slot = match_class(head, slots);
    const bool is_header = slot && (has_colon || normalized_key(head) == slots[*slot].key);
    if (is_header) {
      active = slot;
      out.any = true;
      continue;
    }
    if (has_colon) continue;  // prose lead-in such as "Here are the prompts:"
    if (!active) continue;
    add_phrase(out.pools[*active], out.seen_keys[*active], strip_wrapping(body),
               slots[*active].role, PromptSource::LlmGenerated);
  }
}

PromptPool assemble_pool(const ClassSpec& spec, ParsedClasses&& parsed, const std::string& raw) {
  for (std::size_t i = 0; i < parsed.pools.size(); ++i) {
    if (parsed.pools[i].empty()) {
      const std::string name = i == 0 ? spec.target_name : spec.confounder_names[i - 1];
      throw Error(ErrorKind::Data, "generation incomplete: no prompts recognized for class '" +
                                       name + "'", raw);
    }
  }
  PromptPool pool;
  pool.spec = spec;
  pool.target_candidates = std::move(parsed.pools[0]);
  for (std::size_t i = 1; i < parsed.pools.size(); ++i) {
    pool.confounder_candidates.push_back(std::move(parsed.pools[i]));
  }
  return pool;
}

}  // namespace

PromptPool parse_pool_reply(const std::string& raw, const ClassSpec& spec) {
  const std::vector<ClassSlot> slots = class_slots(spec);
  ParsedClasses parsed;
  parsed.pools.resize(slots.size());
  parsed.seen_keys.resize(slots.size());

  if (!parse_json_reply(raw, slots, parsed)) {
    parse_text_reply(raw, slots, parsed);
  }
  if (!parsed.any) {
    throw Error(ErrorKind::Data, "could not recognize any class list in the model reply", raw);
  }
  return assemble_pool(spec, std::move(parsed), raw);
}

void ensure_base_names(PromptPool& pool) {
  auto ensure = [](std::vector<PromptCandidate>& candidates, const std::string& name,
                   const ClassRole& role) {
    const std::string key = normalized_key(name);
    for (const PromptCandidate& c : candidates) {
      if (normalized_key(c.text) == key) return;
    }
    candidates.insert(candidates.begin(),
                      {normalize_text(name), role, PromptSource::BaseClassName});
  };
  ensure(pool.target_candidates, pool.spec.target_name, ClassRole::target());
  for (std::size_t m = 0; m < pool.confounder_candidates.size() &&
                          m < pool.spec.confounder_names.size();
       ++m) {
    ensure(pool.confounder_candidates[m], pool.spec.confounder_names[m],
           ClassRole::confounder(static_cast<int>(m + 1)));
  }
}

GenerationResult generate_pool(const GenerationRequest& request, const LlmEndpointConfig& endpoint) {
  if (request.model_id.empty()) {
    throw Error(ErrorKind::Config, "generation needs a model id");
  }
  RetryPolicy retry;
  retry.max_retries = request.max_retries;
  retry.backoff_initial_ms = endpoint.backoff_initial_ms;
  ChatClient client(endpoint.base_url, endpoint.api_key, retry);

  GenerationResult result;
  result.raw_reply =
      client.complete(request.model_id, render_generation_prompt(request.spec), request.temperature);
  result.retries_used = client.last_retries();
  result.pool = parse_pool_reply(result.raw_reply, request.spec);
  if (request.include_base_names) {
    ensure_base_names(result.pool);
  }
  return result;
}

std::string serialize_pool(const PromptPool& pool) {
  nlohmann::json spec = {
      {"target", pool.spec.target_name},
      {"confounders", pool.spec.confounder_names},
      {"n", pool.spec.prompts_per_class},
  };
  nlohmann::json classes = nlohmann::json::object();
  auto texts = [](const std::vector<PromptCandidate>& candidates) {
    std::vector<std::string> out;
    out.reserve(candidates.size());
    for (const PromptCandidate& c : candidates) out.push_back(c.text);
    return out;
  };
  classes[pool.spec.target_name] = texts(pool.target_candidates);
  for (std::size_t m = 0; m < pool.confounder_candidates.size(); ++m) {
    if (m < pool.spec.confounder_names.size()) {
      classes[pool.spec.confounder_names[m]] = texts(pool.confounder_candidates[m]);
    }
  }
  nlohmann::json doc = {{"spec", spec}, {"classes", classes}};
  return doc.dump(2) + "\n";
}

PromptPool parse_pool_json(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("spec") || !doc.contains("classes")) {
    throw Error(ErrorKind::Data, "pool file must be {\"spec\": ..., \"classes\": ...}");
  }
  const nlohmann::json& jspec = doc["spec"];
  if (!jspec.contains("target") || !jspec.contains("confounders") || !jspec.contains("n")) {
    throw Error(ErrorKind::Data, "pool file spec needs \"target\", \"confounders\", \"n\"");
  }
  PromptPool pool;
  pool.spec.target_name = jspec["target"].get<std::string>();
  pool.spec.confounder_names = jspec["confounders"].get<std::vector<std::string>>();
  pool.spec.prompts_per_class = jspec["n"].get<int>();

  const nlohmann::json& classes = doc["classes"];
  if (!classes.is_object()) {
    throw Error(ErrorKind::Data, "pool file \"classes\" must map class names to prompt arrays");
  }
  const std::vector<ClassSlot> slots = class_slots(pool.spec);
  for (const auto& [key, value] : classes.items()) {
    bool known = false;
    for (const ClassSlot& slot : slots) {
      if (normalized_key(key) == slot.key) known = true;
    }
    if (!known) {
      throw Error(ErrorKind::Data, "pool file lists unknown class '" + key + "'");
    }
  }

  auto read_class = [&](const ClassSlot& slot) {
    std::vector<PromptCandidate> out;
    for (const auto& [key, value] : classes.items()) {
      if (normalized_key(key) != slot.key) continue;
      if (!value.is_array()) {
        throw Error(ErrorKind::Data, "pool file class '" + key + "' must hold an array of prompts");
      }
      for (const auto& item : value) {
        if (!item.is_string()) {
          throw Error(ErrorKind::Data, "pool file class '" + key + "' holds a non-string prompt");
        }
        const std::string prompt = item.get<std::string>();
        const PromptSource source = normalized_key(prompt) == slot.key
                                        ? PromptSource::BaseClassName
                                        : PromptSource::UserSupplied;
        out.push_back({prompt, slot.role, source});
      }
    }
    return out;
  };

  pool.target_candidates = read_class(slots[0]);
  for (std::size_t i = 1; i < slots.size(); ++i) {
    pool.confounder_candidates.push_back(read_class(slots[i]));
  }
  return pool;
}

PromptPool load_pool_file(const std::filesystem::path& path) {
  try {
    return parse_pool_json(read_text_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void save_pool_file(const PromptPool& pool, const std::filesystem::path& path) {
  atomic_write_file(path, serialize_pool(pool));
}

}  // namespace ccas
