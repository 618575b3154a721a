#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vtp/eigen_oracle.hpp"
#include "vtp/geometry.hpp"
#include "vtp/params.hpp"

namespace vtp {

struct Sample {
  PlateParams params;
  std::array<double, kModeCount> freqs_hz{};
};

struct DatasetMeta {
  std::size_t n = 0;
  FamilySigma sigma;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  double resolution = 0.0;
  std::size_t rejected_draws = 0;   // infeasible perturbations and outlines, redrawn
  std::size_t oracle_failures = 0;  // eigen-solve failures, redrawn
};

struct SampleSet {
  DatasetMeta meta;
  std::vector<Sample> samples;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

using Labeler = std::function<ModalResult(const PlateParams&)>;

struct GenerateOptions {
  std::size_t n = 3000;
  FamilySigma sigma{0.05, 0.05, 0.05};
  std::uint64_t seed = 1;
  OracleConfig oracle;
  unsigned workers = 1;
  Labeler labeler;  // defaults to the eigen-oracle at oracle.resolution
  std::function<void(std::size_t done, std::size_t total)> progress;
};

inline constexpr std::size_t kMinDatasetSize = 100;
inline constexpr int kMaxSampleAttempts = 50;

// n perturbations of the reference over all three families, each labelled by
// the oracle. Sample i depends only on (seed, i), so the result is identical
// for any worker count. Split with split_seed = seed.
// Throws OracleFailureRate when more than 1% of the samples needed a redraw
// because the solver failed.
SampleSet generate(const ReferencePlate& ref, const GenerateOptions& options);

// 9/1 split of shuffled indices; |test| = round(n / 10).
SampleSet split(SampleSet set, std::uint64_t seed);

// Concatenation that keeps every part's own train/test assignment. The
// header metadata (sigma, seeds, resolution) is taken from the first part.
SampleSet merge(const std::vector<SampleSet>& parts);

void save_jsonl(const SampleSet& set, const std::filesystem::path& path);
SampleSet load_jsonl(const std::filesystem::path& path);

// Hex FNV-1a hash of the serialised samples and split.
std::string fingerprint(const SampleSet& set);

}  // namespace vtp
