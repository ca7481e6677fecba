#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ccas/embedding_math.hpp"
#include "ccas/errors.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

// Absolute tolerances; the contract tolerances are absolute, not relative.
#define CHECK_NEAR(a, b, tol) CHECK(std::fabs((a) - (b)) <= (tol))
#define REQUIRE_NEAR(a, b, tol) REQUIRE(std::fabs((a) - (b)) <= (tol))

using namespace ccas;

namespace {

EmbeddingVector vec(std::vector<double> values) {
  return {std::move(values), "test"};
}

LabeledEmbedding labeled(std::string text, std::vector<double> values) {
  return {std::move(text), vec(std::move(values))};
}

}  // namespace

TEST_CASE("cosine of identical and orthogonal vectors") {
  CHECK(cosine_similarity(vec({1, 0}), vec({1, 0})) == 1.0);
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == 0.0);
}

TEST_CASE("cosine of [1,1] and [1,0] is 1/sqrt(2)") {
  CHECK_NEAR(cosine_similarity(vec({1, 1}), vec({1, 0})), 0.7071067811865475, 1e-12);
}

TEST_CASE("dimension mismatch names both dimensions") {
  try {
    cosine_similarity(vec({1, 0}), vec({1, 0, 0}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    const std::string msg = e.what();
    CHECK(msg.find("2") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
}

TEST_CASE("zero vectors are rejected") {
  CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 0})), Error);
  CHECK_THROWS_AS(cosine_similarity(vec({1, 0}), vec({0, 0})), Error);
}

TEST_CASE("cosine symmetry is exact") {
  std::mt19937 rng(101);
  for (int i = 0; i < 200; ++i) {
    const auto a = vec(testgen::random_vector(rng, 8));
    const auto b = vec(testgen::random_vector(rng, 8));
    CHECK(cosine_similarity(a, b) == cosine_similarity(b, a));
  }
}

TEST_CASE("cosine scale invariance within 1e-12") {
  std::mt19937 rng(102);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int i = 0; i < 200; ++i) {
    const auto a = testgen::random_vector(rng, 12);
    const auto b = vec(testgen::random_vector(rng, 12));
    const double k = scale(rng);
    std::vector<double> ka = a;
    for (double& x : ka) x *= k;
    CHECK_NEAR(cosine_similarity(vec(ka), b), cosine_similarity(vec(a), b), 1e-12);
  }
}

TEST_CASE("cosine range over random pairs") {
  std::mt19937 rng(103);
  std::uniform_int_distribution<std::size_t> dim(2, 32);
  for (int i = 0; i < 1200; ++i) {
    const std::size_t d = dim(rng);
    const double c =
        cosine_similarity(vec(testgen::random_vector(rng, d)), vec(testgen::random_vector(rng, d)));
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("minimal similarity matrix") {
  const SimilarityMatrix m =
      build_similarity_matrix({labeled("t", {1, 0})}, {{labeled("a", {1, 0}), labeled("b", {0, 1})}});
  REQUIRE(m.rows == 1);
  REQUIRE(m.cols == 2);
  CHECK(m.at(0, 0) == 1.0);
  CHECK(m.at(0, 1) == 0.0);
  CHECK(m.row_labels == std::vector<std::string>{"t"});
  CHECK(m.col_labels == std::vector<std::string>{"a", "b"});
  CHECK(m.col_class_index == std::vector<int>{1, 1});
}

TEST_CASE("2x4 matrix equals pairwise cosines") {
  std::mt19937 rng(104);
  std::vector<LabeledEmbedding> targets;
  std::vector<std::vector<LabeledEmbedding>> confounders(2);
  std::vector<std::vector<double>> t_raw;
  std::vector<std::vector<std::vector<double>>> c_raw(2);
  for (int i = 0; i < 2; ++i) {
    t_raw.push_back(testgen::random_vector(rng, 6));
    targets.push_back(labeled("t" + std::to_string(i), t_raw.back()));
  }
  for (int m = 0; m < 2; ++m) {
    for (int k = 0; k < 2; ++k) {
      c_raw[m].push_back(testgen::random_vector(rng, 6));
      confounders[m].push_back(labeled("c" + std::to_string(m) + std::to_string(k), c_raw[m].back()));
    }
  }
  const SimilarityMatrix m = build_similarity_matrix(targets, confounders);
  REQUIRE(m.rows == 2);
  REQUIRE(m.cols == 4);
  const auto expected = oracle::similarity_matrix(t_raw, c_raw);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      CHECK_NEAR(m.at(i, j), expected[i][j], 1e-12);
    }
  }
  CHECK(m.col_class_index == std::vector<int>{1, 1, 2, 2});
}

TEST_CASE("a confounder equal to a target gives a unit cell") {
  const std::vector<double> shared{0.3, -0.2, 0.9};
  const SimilarityMatrix m = build_similarity_matrix(
      {labeled("t", shared)}, {{labeled("other", {1, 0, 0}), labeled("same", shared)}});
  CHECK_NEAR(m.at(0, 1), 1.0, 1e-12);
}

TEST_CASE("matrix errors carry row and column coordinates") {
  SUBCASE("bad target row") {
    try {
      build_similarity_matrix({labeled("t1", {1, 0}), labeled("t2", {1, 0, 0})},
                              {{labeled("c", {0, 1})}});
      FAIL("expected an error");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("row 2") != std::string::npos);
      CHECK(msg.find("t2") != std::string::npos);
    }
  }
  SUBCASE("column coordinates count across classes") {
    try {
      build_similarity_matrix(
          {labeled("t", {1, 0})},
          {{labeled("c1", {0, 1})}, {labeled("c2", {0, 1}), labeled("c3", {0, 0})}});
      FAIL("expected an error");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("column 3") != std::string::npos);
      CHECK(msg.find("c3") != std::string::npos);
      CHECK(msg.find("zero vector") != std::string::npos);
    }
  }
  SUBCASE("empty inputs") {
    CHECK_THROWS_AS(build_similarity_matrix({}, {{labeled("c", {0, 1})}}), Error);
    CHECK_THROWS_AS(build_similarity_matrix({labeled("t", {1, 0})}, {}), Error);
  }
}

TEST_CASE("matrix matches oracle on random instances up to 50x200") {
  std::mt19937 rng(105);
  std::uniform_int_distribution<std::size_t> dim(2, 64);
  std::uniform_int_distribution<int> rows(1, 50);
  std::uniform_int_distribution<int> classes(1, 4);
  std::uniform_int_distribution<int> per_class(1, 50);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t d = dim(rng);
    std::vector<LabeledEmbedding> targets;
    std::vector<std::vector<double>> t_raw;
    const int r = rows(rng);
    for (int i = 0; i < r; ++i) {
      t_raw.push_back(testgen::random_vector(rng, d));
      targets.push_back(labeled("t" + std::to_string(i), t_raw.back()));
    }
    const int m_count = classes(rng);
    std::vector<std::vector<LabeledEmbedding>> confounders(m_count);
    std::vector<std::vector<std::vector<double>>> c_raw(m_count);
    for (int m = 0; m < m_count; ++m) {
      const int k_count = per_class(rng);
      for (int k = 0; k < k_count; ++k) {
        c_raw[m].push_back(testgen::random_vector(rng, d));
        confounders[m].push_back(labeled("c", c_raw[m].back()));
      }
    }
    const SimilarityMatrix got = build_similarity_matrix(targets, confounders);
    const auto expected = oracle::similarity_matrix(t_raw, c_raw);
    REQUIRE(got.rows == expected.size());
    for (std::size_t i = 0; i < got.rows; ++i) {
      REQUIRE(got.cols == expected[i].size());
      for (std::size_t j = 0; j < got.cols; ++j) {
        REQUIRE_NEAR(got.at(i, j), expected[i][j], 1e-12);
        REQUIRE(got.at(i, j) >= -1.0);
        REQUIRE(got.at(i, j) <= 1.0);
      }
    }
  }
}

TEST_CASE("parallel and serial matrices are bit-identical") {
  std::mt19937 rng(106);
  for (int trial = 0; trial < 6; ++trial) {
    const testgen::CcasInstance inst = testgen::random_ccas_instance(rng);
    std::vector<LabeledEmbedding> targets;
    for (std::size_t i = 0; i < inst.targets.size(); ++i) {
      targets.push_back(labeled("t" + std::to_string(i), inst.targets[i]));
    }
    std::vector<std::vector<LabeledEmbedding>> confounders(inst.confounders.size());
    for (std::size_t m = 0; m < inst.confounders.size(); ++m) {
      for (const auto& v : inst.confounders[m]) confounders[m].push_back(labeled("c", v));
    }
    const SimilarityMatrix par = build_similarity_matrix(targets, confounders);
    const SimilarityMatrix ser = serial::build_similarity_matrix(targets, confounders);
    CHECK(par.cells == ser.cells);
    CHECK(par.row_labels == ser.row_labels);
    CHECK(par.col_labels == ser.col_labels);
    CHECK(par.col_class_index == ser.col_class_index);
  }
}
