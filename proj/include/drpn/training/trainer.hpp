#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drpn/eval/metrics.hpp"
#include "drpn/ingest/dataset.hpp"
#include "drpn/model/drpn.hpp"
#include "drpn/numerics/optim.hpp"
#include "drpn/numerics/random.hpp"

namespace drpn::training {

struct TrainSample {
  std::string user_id;
  std::string impression_id;
  std::string positive;
  std::vector<std::string> negatives;  // l_k skipped items of the same impression
};

/// One sample per clicked item. Negatives are drawn uniformly without
/// replacement from the impression's skipped items, or with replacement when
/// there are fewer than l_k. Returns nothing when no item was skipped.
std::vector<TrainSample> sample_negatives(const ingest::ImpressionLog& impression, std::size_t l_k, num::Rng& rng);

struct SampleSet {
  std::vector<TrainSample> samples;
  std::size_t skipped_impressions = 0;  // clicks present but no skipped item
};

/// Samples for one epoch, drawn from a stream seeded by (seed, epoch) and
/// shuffled with another.
SampleSet epoch_samples(const std::vector<ingest::ImpressionLog>& logs, std::size_t l_k, std::uint64_t seed,
                        std::size_t epoch);

struct TrainOptions {
  model::ModelConfig model;
  double lr = 1e-4;
  std::size_t epochs = 10;  // upper bound; early stopping usually ends sooner
  std::size_t batch_size = 32;
  std::size_t patience = 2;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::optional<std::filesystem::path> embeddings;
  /// Stop each epoch after this many optimizer steps (0 = full epoch).
  std::size_t max_steps = 0;
  /// Validation impressions used for model selection (0 = all).
  std::size_t max_val_impressions = 0;
  /// Continue from out_dir/last.ckpt when it exists.
  bool resume = false;
  /// Extra key/value pairs stored in checkpoint headers.
  std::map<std::string, std::string> header;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean batch loss
  eval::MetricReport validation;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
  std::size_t skipped_impressions = 0;
  double first_batch_loss = 0.0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path log_path;
};

/// Called after each optimizer step with (epoch, step, batch loss).
using StepHook = std::function<void(std::size_t, std::size_t, double)>;

/// Trains on data.splits.train, selects on validation AUC (patience rule),
/// and writes best.ckpt, last.ckpt and train_log.tsv into out_dir.
/// Throws NumericError when a batch loss is not finite.
TrainResult train(const TrainOptions& options, const ingest::Dataset& data, const std::filesystem::path& out_dir,
                  const StepHook& hook = {});

/// One batch: loss and gradients (left in store) for the given samples, with
/// per-user groups computed in parallel and reduced in group order.
double batch_gradients(const model::Drpn& model, num::ParamStore& store, const ingest::ProfileSet& profiles,
                       const std::vector<const TrainSample*>& batch, std::size_t threads);

/// A trained model loaded back with the dataset it was trained on.
struct LoadedModel {
  model::ModelConfig config;
  std::map<std::string, std::string> header;
  num::ParamStore params;
  model::NewsIndex index;
};

/// Loads a checkpoint and checks its tables against data.
LoadedModel load_model(const std::filesystem::path& checkpoint, const ingest::Dataset& data);
model::NewsIndex build_index(const ingest::Dataset& data, std::size_t k_nbr);
/// Hash of the vocabulary, ID rows and catalog order; stored in checkpoints.
std::string data_fingerprint(const ingest::Dataset& data, const model::NewsIndex& index);

}  // namespace drpn::training
