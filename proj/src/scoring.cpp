#include "ccas/scoring.hpp"

#include <algorithm>
#include <cstddef>

#include "ccas/embedding_math.hpp"
#include "ccas/errors.hpp"

namespace ccas {

namespace {

struct ScorePair {
  double avg;
  double max;
};

void check_inputs(const CcasInputs& inputs) {
  if (inputs.confounder_candidates.empty()) {
    throw Error(ErrorKind::Data, "CCAS needs at least one confounding class");
  }
  for (std::size_t m = 0; m < inputs.confounder_candidates.size(); ++m) {
    if (inputs.confounder_candidates[m].empty()) {
      throw Error(ErrorKind::Data,
                  "CCAS confounder class " + std::to_string(m + 1) + " has no prompts");
    }
  }
}

// One pass per candidate: alignment term plus the confounder sum and max.
// The flattened scan order is fixed, so results do not depend on threading.
ScorePair score_candidate(const EmbeddingVector& candidate, const CcasInputs& inputs) {
  const double alignment = cosine_similarity(candidate, inputs.base_class_embedding);
  double sum = 0.0;
  double worst = -1.0;
  std::size_t count = 0;
  for (const auto& cls : inputs.confounder_candidates) {
    for (const LabeledEmbedding& conf : cls) {
      const double sim = cosine_similarity(candidate, conf.vector);
      sum += sim;
      worst = std::max(worst, sim);
      ++count;
    }
  }
  return {alignment - sum / static_cast<double>(count), alignment - worst};
}

bool ranked_before(const RankedPrompt& a, const RankedPrompt& b, CcasVariant variant) {
  const double sa = variant == CcasVariant::Avg ? a.ccas_avg : a.ccas_max;
  const double sb = variant == CcasVariant::Avg ? b.ccas_avg : b.ccas_max;
  if (sa != sb) return sa > sb;
  return a.text < b.text;
}

std::vector<RankedPrompt> score_all(const CcasInputs& inputs, bool parallel) {
  check_inputs(inputs);
  std::vector<RankedPrompt> entries(inputs.target_candidates.size());
  // Validate every candidate up front; the parallel loop must not throw.
  for (const LabeledEmbedding& cand : inputs.target_candidates) {
    cosine_similarity(cand.vector, inputs.base_class_embedding);
  }
  for (const auto& cls : inputs.confounder_candidates) {
    for (const LabeledEmbedding& conf : cls) {
      cosine_similarity(conf.vector, inputs.base_class_embedding);
    }
  }
  const long long n = static_cast<long long>(entries.size());
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
      const LabeledEmbedding& cand = inputs.target_candidates[static_cast<std::size_t>(i)];
      const ScorePair s = score_candidate(cand.vector, inputs);
      entries[static_cast<std::size_t>(i)] = {cand.text, s.avg, s.max};
    }
  } else {
    for (long long i = 0; i < n; ++i) {
      const LabeledEmbedding& cand = inputs.target_candidates[static_cast<std::size_t>(i)];
      const ScorePair s = score_candidate(cand.vector, inputs);
      entries[static_cast<std::size_t>(i)] = {cand.text, s.avg, s.max};
    }
  }
  return entries;
}

}  // namespace

double ccas_avg(const EmbeddingVector& candidate, const CcasInputs& inputs) {
  check_inputs(inputs);
  return score_candidate(candidate, inputs).avg;
}

double ccas_max(const EmbeddingVector& candidate, const CcasInputs& inputs) {
  check_inputs(inputs);
  return score_candidate(candidate, inputs).max;
}

CcasRanking make_ranking(std::vector<RankedPrompt> entries, CcasVariant variant) {
  std::sort(entries.begin(), entries.end(),
            [variant](const RankedPrompt& a, const RankedPrompt& b) {
              return ranked_before(a, b, variant);
            });
  return {std::move(entries), variant};
}

CcasRanking rank_prompts(const CcasInputs& inputs, CcasVariant variant) {
  return make_ranking(score_all(inputs, /*parallel=*/true), variant);
}

std::vector<std::string> select_top_n(const CcasRanking& ranking, int n) {
  if (n < 1) {
    throw Error(ErrorKind::Data, "top-n selection needs n >= 1, got " + std::to_string(n));
  }
  const std::size_t take = std::min(static_cast<std::size_t>(n), ranking.entries.size());
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(ranking.entries[i].text);
  return out;
}

namespace serial {

CcasRanking rank_prompts(const CcasInputs& inputs, CcasVariant variant) {
  return make_ranking(score_all(inputs, /*parallel=*/false), variant);
}

}  // namespace serial

}  // namespace ccas
