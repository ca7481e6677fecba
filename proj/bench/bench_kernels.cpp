// Times the OpenMP kernels against their serial references on synthetic
// workloads and verifies both produce identical results.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <omp.h>

#include "ccas/detection.hpp"
#include "ccas/embedding_math.hpp"
#include "ccas/scoring.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point start) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - start).count();
}

ccas::EmbeddingVector random_vector(std::mt19937& rng, std::size_t dim) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ccas::EmbeddingVector v;
  v.values.resize(dim);
  for (double& x : v.values) x = dist(rng);
  v.values[0] += 2.0;  // keeps the vector away from zero
  v.source_model_id = "bench";
  return v;
}

void report(const char* kernel, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-22s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   identical %s\n",
              kernel, serial_ms, parallel_ms, parallel_ms > 0 ? serial_ms / parallel_ms : 0.0,
              identical ? "yes" : "NO");
}

void bench_similarity(std::mt19937& rng) {
  constexpr std::size_t kTargets = 400;
  constexpr std::size_t kClasses = 4;
  constexpr std::size_t kPerClass = 150;
  constexpr std::size_t kDim = 384;

  std::vector<ccas::LabeledEmbedding> targets;
  for (std::size_t i = 0; i < kTargets; ++i) {
    targets.push_back({"t" + std::to_string(i), random_vector(rng, kDim)});
  }
  std::vector<std::vector<ccas::LabeledEmbedding>> confounders(kClasses);
  for (std::size_t m = 0; m < kClasses; ++m) {
    for (std::size_t k = 0; k < kPerClass; ++k) {
      confounders[m].push_back(
          {"c" + std::to_string(m) + "_" + std::to_string(k), random_vector(rng, kDim)});
    }
  }

  auto t0 = clock_type::now();
  const ccas::SimilarityMatrix serial = ccas::serial::build_similarity_matrix(targets, confounders);
  const double serial_ms = ms_since(t0);

  t0 = clock_type::now();
  const ccas::SimilarityMatrix parallel = ccas::build_similarity_matrix(targets, confounders);
  const double parallel_ms = ms_since(t0);

  report("similarity matrix", serial_ms, parallel_ms, serial.cells == parallel.cells);
}

void bench_scoring(std::mt19937& rng) {
  constexpr std::size_t kTargets = 600;
  constexpr std::size_t kClasses = 4;
  constexpr std::size_t kPerClass = 200;
  constexpr std::size_t kDim = 384;

  ccas::CcasInputs inputs;
  inputs.base_class_embedding = random_vector(rng, kDim);
  for (std::size_t i = 0; i < kTargets; ++i) {
    inputs.target_candidates.push_back({"t" + std::to_string(i), random_vector(rng, kDim)});
  }
  inputs.confounder_candidates.resize(kClasses);
  for (std::size_t m = 0; m < kClasses; ++m) {
    for (std::size_t k = 0; k < kPerClass; ++k) {
      inputs.confounder_candidates[m].push_back(
          {"c" + std::to_string(m) + "_" + std::to_string(k), random_vector(rng, kDim)});
    }
  }

  auto t0 = clock_type::now();
  const ccas::CcasRanking serial = ccas::serial::rank_prompts(inputs, ccas::CcasVariant::Avg);
  const double serial_ms = ms_since(t0);

  t0 = clock_type::now();
  const ccas::CcasRanking parallel = ccas::rank_prompts(inputs, ccas::CcasVariant::Avg);
  const double parallel_ms = ms_since(t0);

  report("ccas ranking", serial_ms, parallel_ms, serial.entries == parallel.entries);
}

void bench_eval(std::mt19937& rng) {
  constexpr std::size_t kConfigs = 24;
  constexpr std::size_t kImages = 60;
  constexpr std::size_t kGtPerImage = 6;
  constexpr std::size_t kDetPerImage = 40;

  std::uniform_real_distribution<double> coord(0.0, 480.0);
  std::uniform_real_distribution<double> extent(8.0, 120.0);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  auto random_box = [&]() {
    const double x = coord(rng);
    const double y = coord(rng);
    return ccas::Box{x, y, x + extent(rng), y + extent(rng)};
  };

  ccas::GroundTruthSet gt;
  gt.class_name = "bench";
  for (std::size_t i = 0; i < kImages; ++i) {
    std::vector<ccas::Box> boxes;
    for (std::size_t g = 0; g < kGtPerImage; ++g) boxes.push_back(random_box());
    gt.images.emplace_back("img" + std::to_string(i), std::move(boxes));
  }

  std::vector<ccas::DetectionSet> configs(kConfigs);
  for (std::size_t c = 0; c < kConfigs; ++c) {
    configs[c].config_label = "config" + std::to_string(c);
    for (std::size_t i = 0; i < kImages; ++i) {
      auto& dets = configs[c].by_image["img" + std::to_string(i)];
      for (std::size_t d = 0; d < kDetPerImage; ++d) {
        dets.push_back({random_box(), score(rng), "p"});
      }
    }
  }

  auto t0 = clock_type::now();
  const auto serial = ccas::serial::compare_configurations(gt, configs);
  const double serial_ms = ms_since(t0);

  t0 = clock_type::now();
  const auto parallel = ccas::compare_configurations(gt, configs);
  const double parallel_ms = ms_since(t0);

  bool identical = serial.size() == parallel.size();
  for (std::size_t i = 0; identical && i < serial.size(); ++i) {
    identical = serial[i].ap == parallel[i].ap && serial[i].pr_points == parallel[i].pr_points;
  }
  report("config evaluation", serial_ms, parallel_ms, identical);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", omp_get_max_threads());
  std::mt19937 rng(20240615u);
  bench_similarity(rng);
  bench_scoring(rng);
  bench_eval(rng);
  return 0;
}
