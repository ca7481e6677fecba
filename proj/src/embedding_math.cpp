#include "ccas/embedding_math.hpp"

#include <cmath>
#include <cstddef>

#include "ccas/errors.hpp"

namespace ccas {

namespace {

double clamp_unit(double v) {
  if (v > 1.0) return 1.0;
  if (v < -1.0) return -1.0;
  return v;
}

// Shared by cosine_similarity and the matrix kernels; inputs are validated
// before any parallel region so no exception crosses a thread boundary.
double cosine_unchecked(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    norm_a += a[i] * a[i];
    norm_b += b[i] * b[i];
  }
  return clamp_unit(dot / (std::sqrt(norm_a) * std::sqrt(norm_b)));
}

bool is_zero(const EmbeddingVector& v) {
  for (double x : v.values) {
    if (x != 0.0) return false;
  }
  return true;
}

struct MatrixLayout {
  SimilarityMatrix matrix;                       // labels filled, cells sized
  std::vector<const EmbeddingVector*> row_vecs;
  std::vector<const EmbeddingVector*> col_vecs;
};

MatrixLayout prepare_matrix(const std::vector<LabeledEmbedding>& targets,
                            const std::vector<std::vector<LabeledEmbedding>>& confounders,
                            const std::vector<std::string>& class_names) {
  if (targets.empty()) {
    throw Error(ErrorKind::Data, "similarity matrix needs at least one target candidate");
  }
  if (!class_names.empty() && class_names.size() != confounders.size()) {
    throw Error(ErrorKind::Data,
                "class name count " + std::to_string(class_names.size()) +
                    " does not match confounder class count " + std::to_string(confounders.size()));
  }

  MatrixLayout out;
  SimilarityMatrix& m = out.matrix;
  const std::size_t dim = targets.front().vector.dim();

  auto admit = [&](const LabeledEmbedding& e, const std::string& where) {
    if (e.vector.dim() != dim) {
      throw Error(ErrorKind::Data, "similarity matrix " + where + " ('" + e.text +
                                       "'): dimension " + std::to_string(e.vector.dim()) +
                                       " != " + std::to_string(dim));
    }
    if (is_zero(e.vector)) {
      throw Error(ErrorKind::Data, "similarity matrix " + where + " ('" + e.text + "') is a zero vector");
    }
  };

  for (std::size_t i = 0; i < targets.size(); ++i) {
    admit(targets[i], "row " + std::to_string(i + 1));
    m.row_labels.push_back(targets[i].text);
    out.row_vecs.push_back(&targets[i].vector);
  }
  std::size_t col = 0;
  for (std::size_t c = 0; c < confounders.size(); ++c) {
    const std::string name = class_names.empty() ? "class_" + std::to_string(c + 1) : class_names[c];
    m.class_names.push_back(name);
    for (const LabeledEmbedding& e : confounders[c]) {
      admit(e, "column " + std::to_string(col + 1));
      m.col_labels.push_back(e.text);
      m.col_class_index.push_back(static_cast<int>(c + 1));
      out.col_vecs.push_back(&e.vector);
      ++col;
    }
  }
  if (col == 0) {
    throw Error(ErrorKind::Data, "similarity matrix needs at least one confounder candidate");
  }
  m.rows = targets.size();
  m.cols = col;
  m.cells.assign(m.rows * m.cols, 0.0);
  return out;
}

}  // namespace

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorKind::Data, "cosine similarity: dimension mismatch " +
                                     std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  if (a.dim() == 0 || is_zero(a) || is_zero(b)) {
    throw Error(ErrorKind::Data, "cosine similarity is undefined for a zero vector");
  }
  return cosine_unchecked(a.values, b.values);
}

SimilarityMatrix build_similarity_matrix(const std::vector<LabeledEmbedding>& targets,
                                         const std::vector<std::vector<LabeledEmbedding>>& confounders,
                                         const std::vector<std::string>& class_names) {
  MatrixLayout ml = prepare_matrix(targets, confounders, class_names);
  SimilarityMatrix& m = ml.matrix;
  const long long total = static_cast<long long>(m.rows) * static_cast<long long>(m.cols);
#pragma omp parallel for schedule(static)
  for (long long idx = 0; idx < total; ++idx) {
    const std::size_t i = static_cast<std::size_t>(idx) / m.cols;
    const std::size_t j = static_cast<std::size_t>(idx) % m.cols;
    m.cells[idx] = cosine_unchecked(ml.row_vecs[i]->values, ml.col_vecs[j]->values);
  }
  return std::move(ml.matrix);
}

namespace serial {

SimilarityMatrix build_similarity_matrix(const std::vector<LabeledEmbedding>& targets,
                                         const std::vector<std::vector<LabeledEmbedding>>& confounders,
                                         const std::vector<std::string>& class_names) {
  MatrixLayout ml = prepare_matrix(targets, confounders, class_names);
  SimilarityMatrix& m = ml.matrix;
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      m.cells[i * m.cols + j] = cosine_unchecked(ml.row_vecs[i]->values, ml.col_vecs[j]->values);
    }
  }
  return std::move(ml.matrix);
}

}  // namespace serial

}  // namespace ccas
