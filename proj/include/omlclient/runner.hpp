#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "omlclient/arff.hpp"
#include "omlclient/cache.hpp"
#include "omlclient/entities.hpp"
#include "omlclient/extension.hpp"
#include "omlclient/protocol.hpp"

// Executes a model on a task: resolves dataset and split table, drives the
// extension per fold, and assembles a Run in canonical (repeat, fold, row_id)
// order regardless of execution schedule.
namespace oml::runner {

struct SplitIntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FoldSplit {
  int repeat = 0;
  int fold = 0;
  std::vector<std::int64_t> train_idx;  // ascending
  std::vector<std::int64_t> test_idx;   // ascending
};

// Groups the split table by (repeat, fold) and checks that within each
// repeat the test folds partition the full row-id set.
std::vector<FoldSplit> iter_splits(const Task& task,
                                   const arff::ArffDocument& splits_doc);

struct RunContext {
  cache::CacheConfig cache;
  const protocol::Client* client = nullptr;
  int workers = 1;  // fold-level parallelism
};

// Seed handed to fold (repeat, fold) under the seeding contract.
std::int64_t fold_seed(std::int64_t base_seed, int repeat, int fold, int folds);

Run run_model_on_task(const ext::ModelSpec& model, const Task& task,
                      std::int64_t base_seed, const RunContext& ctx);

// Only "predictive_accuracy" is supported: pooled fraction of rows whose
// prediction equals the truth.
double score(const std::vector<PredictionRow>& predictions,
             const std::string& function);

arff::ArffDocument predictions_to_arff(const Run& run, const Task& task);

// Deterministic cross-validation split table in the shared splits schema
// (type/rowid/repeat/fold); the shuffle is seeded from (task_id, repeat).
arff::ArffDocument make_cv_splits(std::int64_t task_id, std::size_t n_rows,
                                  int repeats, int folds);

inline constexpr std::int64_t kDefaultBaseSeed = 1;

}  // namespace oml::runner
