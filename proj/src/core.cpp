#include "ccas/core.hpp"

#include <cctype>
#include <unordered_map>
#include <unordered_set>

namespace ccas {

namespace {

bool is_space_byte(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space_byte(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

std::string fold_case(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string normalized_key(std::string_view text) {
  return fold_case(normalize_text(text));
}

namespace {

void check_spec(const ClassSpec& spec, std::vector<Violation>& out) {
  if (normalize_text(spec.target_name).empty()) {
    out.push_back({"empty_target_name", "target class name is empty"});
  }
  if (spec.prompts_per_class < 1) {
    out.push_back({"bad_prompt_count",
                   "prompts_per_class must be >= 1, got " + std::to_string(spec.prompts_per_class)});
  }
  std::unordered_set<std::string> seen;
  const std::string target_key = normalized_key(spec.target_name);
  for (std::size_t m = 0; m < spec.confounder_names.size(); ++m) {
    const std::string& name = spec.confounder_names[m];
    const std::string key = normalized_key(name);
    if (key.empty()) {
      out.push_back({"empty_confounder_name",
                     "confounder class " + std::to_string(m + 1) + " has an empty name"});
      continue;
    }
    if (key == target_key) {
      out.push_back({"target_in_confounders",
                     "target class '" + spec.target_name + "' also appears as confounder " +
                         std::to_string(m + 1)});
    }
    if (!seen.insert(key).second) {
      out.push_back({"duplicate_confounder_name", "confounder class '" + name + "' is listed twice"});
    }
  }
}

void check_candidates(const std::vector<PromptCandidate>& pool, const ClassRole& expected,
                      const std::string& pool_name, std::vector<Violation>& out) {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const PromptCandidate& cand = pool[i];
    const std::string key = normalized_key(cand.text);
    if (key.empty()) {
      out.push_back({"empty_text", pool_name + " candidate " + std::to_string(i + 1) + " has empty text"});
      continue;
    }
    if (!(cand.role == expected)) {
      out.push_back({"role_mismatch",
                     pool_name + " candidate '" + cand.text + "' carries a role for a different pool"});
    }
    auto [it, inserted] = seen.emplace(key, i);
    if (!inserted) {
      out.push_back({"duplicate_text", pool_name + " candidate '" + cand.text +
                                           "' duplicates entry " + std::to_string(it->second + 1)});
    }
  }
}

}  // namespace

std::vector<Violation> validate_pool(const PromptPool& pool) {
  std::vector<Violation> out;
  check_spec(pool.spec, out);

  const std::size_t want_lists = pool.spec.confounder_names.size();
  if (pool.confounder_candidates.size() != want_lists) {
    out.push_back({"confounder_count_mismatch",
                   "pool has " + std::to_string(pool.confounder_candidates.size()) +
                       " confounder lists but the spec names " + std::to_string(want_lists) +
                       " classes"});
  }
  if (want_lists == 0) {
    out.push_back({"no_confounders", "spec names no confounding classes"});
  }

  check_candidates(pool.target_candidates, ClassRole::target(), "target", out);
  for (std::size_t m = 0; m < pool.confounder_candidates.size(); ++m) {
    const std::string label = m < pool.spec.confounder_names.size()
                                  ? "confounder '" + pool.spec.confounder_names[m] + "'"
                                  : "confounder " + std::to_string(m + 1);
    if (pool.confounder_candidates[m].empty()) {
      out.push_back({"empty_confounder_list", label + " has no prompts"});
      continue;
    }
    check_candidates(pool.confounder_candidates[m], ClassRole::confounder(static_cast<int>(m + 1)),
                     label, out);
  }
  return out;
}

}  // namespace ccas
