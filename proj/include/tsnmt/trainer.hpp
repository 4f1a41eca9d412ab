#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsnmt/corpus.hpp"
#include "tsnmt/metrics.hpp"
#include "tsnmt/model.hpp"
#include "tsnmt/objectives.hpp"
#include "tsnmt/optimizer.hpp"
#include "tsnmt/transfer.hpp"

namespace tsnmt {

struct Schedule {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t eval_interval = 0;        // updates between evaluations; 0 = end of each epoch
  std::size_t checkpoint_interval = 0;  // updates between checkpoints; 0 = at every evaluation
  std::size_t max_updates = 0;          // 0 = no cap
};

struct TrainSeeds {
  std::uint64_t init = 1;
  std::uint64_t shuffle = 2;
  std::uint64_t sampling = 3;
};

struct EvalOptions {
  bool bleu = true;
  std::size_t bleu_beam = 5;
  std::size_t max_dev = 0;  // evaluate on the first max_dev dev pairs; 0 = all
  bool kl = false;          // J_SENT / J_WORD (greedy) on dev (x, z) pairs
};

struct TrainConfig {
  Method method = Method::MLE;
  TeachingConfig teaching;
  AdamConfig adam;
  Schedule schedule;
  TrainSeeds seeds;
  FreezePlan freeze;
  bool cache_teacher = true;  // reuse greedy/beam teacher outputs across epochs
  EvalOptions eval;
  std::string run_id = "run";
  std::filesystem::path out_dir;  // checkpoints and train states; empty = keep nothing on disk
};

struct TrainData {
  std::span<const SentencePair> train;   // (x, y) for mle, (x, z) for teaching methods
  std::span<const SentencePair> dev;     // (x, y): validation loss and BLEU
  std::span<const SentencePair> dev_kl;  // (x, z): KL estimates
};

// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  ModelParams params;
  Adam adam;
  std::uint64_t update = 0;
  std::size_t epoch = 0;
  std::size_t next_batch = 0;
  double loss_sum = 0.0;  // training loss accumulated since the last evaluation
  std::size_t loss_count = 0;
  std::size_t skipped_pairs = 0;

  std::vector<std::uint8_t> serialize() const;
  static TrainState deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::filesystem::path& path) const;
  static TrainState load(const std::filesystem::path& path);
};

struct TrainResult {
  ModelParams params;
  std::vector<std::filesystem::path> checkpoints;  // in update order, the initial one first
  std::uint64_t updates = 0;
  std::size_t skipped_pairs = 0;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t update);
std::filesystem::path state_path(const std::filesystem::path& dir, std::uint64_t update);
// Train state with the highest update count under `dir`, if any.
std::optional<std::filesystem::path> latest_state(const std::filesystem::path& dir);

// `teacher` is required for teaching methods and ignored for mle.
TrainResult train(const ModelParams& init, const ModelParams* teacher, const TrainData& data,
                  const TrainConfig& cfg, MetricsWriter* metrics = nullptr, const TrainState* resume = nullptr);

}  // namespace tsnmt
