#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ccas {

/// Trim leading/trailing whitespace and collapse internal runs to one space.
std::string normalize_text(std::string_view text);

/// ASCII lowercase copy. Non-ASCII bytes pass through unchanged.
std::string fold_case(std::string_view text);

/// Case-insensitive, whitespace-normalized comparison key for prompt texts.
std::string normalized_key(std::string_view text);

/// A target class plus the confounding classes it must be distinguished from.
struct ClassSpec {
  std::string target_name;
  std::vector<std::string> confounder_names;
  int prompts_per_class = 1;

  friend bool operator==(const ClassSpec&, const ClassSpec&) = default;
};

enum class PromptSource { LlmGenerated, BaseClassName, UserSupplied };

/// Which class pool a candidate belongs to. Confounder indices are 1-based.
struct ClassRole {
  enum class Kind { Target, Confounder };
  Kind kind = Kind::Target;
  int confounder_index = 0;

  static ClassRole target() { return {Kind::Target, 0}; }
  static ClassRole confounder(int m) { return {Kind::Confounder, m}; }

  friend bool operator==(const ClassRole&, const ClassRole&) = default;
};

struct PromptCandidate {
  std::string text;
  ClassRole role;
  PromptSource source = PromptSource::UserSupplied;

  friend bool operator==(const PromptCandidate&, const PromptCandidate&) = default;
};

/// One prompt's embedding. All vectors in a run share dimension and model id.
struct EmbeddingVector {
  std::vector<double> values;
  std::string source_model_id;

  std::size_t dim() const { return values.size(); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

struct LabeledEmbedding {
  std::string text;
  EmbeddingVector vector;
};

/// The full candidate pool for one refinement run: target prompts plus one
/// prompt list per confounding class, in ClassSpec order.
struct PromptPool {
  ClassSpec spec;
  std::vector<PromptCandidate> target_candidates;
  std::vector<std::vector<PromptCandidate>> confounder_candidates;
};

/// Row-major target-by-confounder cosine matrix. Columns keep confounder
/// class order, then within-class order; col_class_index is 1-based.
struct SimilarityMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<int> col_class_index;
  std::vector<std::string> class_names;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> cells;

  double at(std::size_t i, std::size_t j) const { return cells[i * cols + j]; }
};

enum class CcasVariant { Avg, Max };

struct RankedPrompt {
  std::string text;
  double ccas_avg = 0.0;
  double ccas_max = 0.0;

  friend bool operator==(const RankedPrompt&, const RankedPrompt&) = default;
};

/// Candidates with both score variants, sorted descending by the selected
/// variant; ties broken by ascending candidate text.
struct CcasRanking {
  std::vector<RankedPrompt> entries;
  CcasVariant sort_variant = CcasVariant::Avg;
};

struct Violation {
  std::string code;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Report every pool invariant violation found. Violations are data, not
/// failures: the pool is never mutated and a clean pool yields an empty list.
std::vector<Violation> validate_pool(const PromptPool& pool);

}  // namespace ccas
