#pragma once

#include <string>
#include <vector>

#include "ccas/core.hpp"

namespace ccas {

/// Everything CCAS needs for one target class: the base class name embedding,
/// the candidate prompts, and the confounder prompt pools.
struct CcasInputs {
  EmbeddingVector base_class_embedding;
  std::vector<LabeledEmbedding> target_candidates;
  std::vector<std::vector<LabeledEmbedding>> confounder_candidates;
};

/// Alignment with the base class minus the mean similarity over all
/// confounder prompts. With unequal pool sizes the mean runs over the total
/// flattened count, which reduces to 1/(NM) when every class contributes N.
double ccas_avg(const EmbeddingVector& candidate, const CcasInputs& inputs);

/// Alignment with the base class minus the single highest confounder similarity.
double ccas_max(const EmbeddingVector& candidate, const CcasInputs& inputs);

/// Sort entries descending by the chosen variant; equal scores fall back to
/// ascending candidate text. Used by rank_prompts and by callers that already
/// hold scores (e.g. published tables).
CcasRanking make_ranking(std::vector<RankedPrompt> entries, CcasVariant variant);

/// Score every candidate under both variants (candidates in parallel), then
/// produce the deterministic ranking for the requested variant.
CcasRanking rank_prompts(const CcasInputs& inputs, CcasVariant variant);

/// First min(n, entries) candidate texts in ranked order. n must be >= 1.
std::vector<std::string> select_top_n(const CcasRanking& ranking, int n);

namespace serial {

/// Single-threaded reference for rank_prompts; bit-identical results.
CcasRanking rank_prompts(const CcasInputs& inputs, CcasVariant variant);

}  // namespace serial

}  // namespace ccas
