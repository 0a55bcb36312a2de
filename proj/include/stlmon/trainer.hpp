#pragma once

#include "stlmon/learner.hpp"
#include "stlmon/trace.hpp"

#include <string>
#include <vector>

namespace stlmon {

/// One learned safety property: G(!body) plus its provenance.
struct PoolEntry {
  FormulaPtr formula;  // GppSTL wrap of body
  FormulaPtr body;     // pure-past detector
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double acc = 0.0;
  double far = 0.0;
  double margin = 0.0;
  std::string source_id;
  std::string timestamp = "0";  // fixed so identical runs write identical files
};

struct TrainConfig {
  EAConfig ea;
  std::size_t n_aug_fail = 10;
  std::size_t n_aug_good = 1;
  std::size_t epochs = 2;
  std::size_t batch_size = 5;
  double noise_std = 0.01;
  std::uint64_t seed = 0;
};

/// Parses a JSON config file; unknown keys rejected, missing keys defaulted.
TrainConfig load_train_config(const std::string& path);

/// Drops pairs violating at position 0, cuts the rest at their earliest pool
/// violation (original and augmentations alike), leaves untouched pairs whose
/// prefix never violates.
std::vector<AugmentedPair> cut_pairs(const std::vector<AugmentedPair>& pairs,
                                     const std::vector<FormulaPtr>& pool_bodies);

/// Random partition of indices 0..n-1 into ceil(n/b) disjoint batches.
std::vector<std::vector<std::size_t>> generate_batches(std::size_t n, std::size_t b, Rng& rng);

struct TrainCheckpoint {
  std::size_t epoch, batch;
  std::size_t pool_size;
  std::size_t formulas_added;
  std::vector<double> hypervolume;  // per-generation trajectory for this batch
};

struct TrainResult {
  std::vector<PoolEntry> pool;
  NormalizationParams norm;
  std::vector<TrainCheckpoint> checkpoints;
};

/// Runs the full training loop: normalize, augment, then per epoch cut/batch/
/// learn and grow the pool.
TrainResult train(const Dataset& data, std::vector<PoolEntry> pool, const TrainConfig& cfg);

void save_pool(const std::vector<PoolEntry>& pool, const std::string& path);
std::vector<PoolEntry> load_pool(const std::string& path);

}  // namespace stlmon
