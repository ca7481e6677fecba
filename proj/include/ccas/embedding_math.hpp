#pragma once

#include <string>
#include <vector>

#include "ccas/core.hpp"

namespace ccas {

/// dot(a,b) / (|a||b|), clamped to [-1, 1] to absorb rounding.
/// Throws Error(Data) on dimension mismatch or a zero vector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// cells[i][j] = cosine(target i, flattened confounder j). Column order is
/// confounder class order, then within-class order. Cells are computed in
/// parallel; every cell value is independent of evaluation order.
/// class_names, when given, must have one entry per confounder class; the
/// default synthesizes "class_1".."class_M".
SimilarityMatrix build_similarity_matrix(
    const std::vector<LabeledEmbedding>& targets,
    const std::vector<std::vector<LabeledEmbedding>>& confounders,
    const std::vector<std::string>& class_names = {});

namespace serial {

/// Single-threaded reference; bit-identical to the parallel kernel.
SimilarityMatrix build_similarity_matrix(
    const std::vector<LabeledEmbedding>& targets,
    const std::vector<std::vector<LabeledEmbedding>>& confounders,
    const std::vector<std::string>& class_names = {});

}  // namespace serial

}  // namespace ccas
