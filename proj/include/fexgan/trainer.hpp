#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fexgan/checkpoint.hpp"
#include "fexgan/config.hpp"
#include "fexgan/corpus.hpp"
#include "fexgan/discriminator.hpp"
#include "fexgan/generator.hpp"
#include "fexgan/losses.hpp"

namespace fexgan {

/// Preloaded, split corpus. Images are [N, 3, S, S] in [-1, 1].
struct TrainingData {
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> val;
  torch::Tensor train_images;
  torch::Tensor val_images;

  /// load_dataset + split(val_fraction, seed) + decode.
  static std::shared_ptr<const TrainingData> load(const std::filesystem::path& root, int image_size,
                                                  double val_fraction, std::uint64_t seed);
};

struct Batch {
  torch::Tensor source;          // [B, 3, S, S]
  torch::Tensor target;          // [B, 3, S, S], same identity, target affect
  torch::Tensor source_affects;  // [B, 7], one-hot
  torch::Tensor target_affects;  // [B, 7], modulated by lambda
  torch::Tensor eps;             // [B, n]
  std::vector<int> source_class;
  std::vector<int> target_class;
};

struct TrainMetrics {
  std::int64_t step = 0;
  losses::LossReport losses;
  double real_binary_acc = 0, real_multi_acc = 0;
  double fake_binary_acc = 0, fake_multi_acc = 0;
  double wall_ms = 0;

  /// Every field except wall-clock time, bit for bit.
  bool same_values(const TrainMetrics& other) const;
};

inline constexpr const char* kMetricsHeader =
    "step,gen_adv,reconst,kl,gen_total,disc_real,disc_fake,disc_total,"
    "real_binary_acc,real_multi_acc,fake_binary_acc,fake_multi_acc,wall_ms";

std::string metrics_csv_row(const TrainMetrics& m);
std::vector<TrainMetrics> read_metrics_csv(const std::filesystem::path& path);

/// Alternating adversarial trainer. Every random draw of step s comes from
/// a generator seeded by (seed, s), and epoch e's shuffle from (seed, e), so
/// the complete RNG state is the step counter.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::shared_ptr<const TrainingData> data);

  const TrainConfig& config() const { return cfg_; }
  std::int64_t step() const { return step_; }
  Generator& generator() { return gen_; }
  Discriminator& discriminator() { return disc_; }

  /// Batch for 1-based step s.
  Batch make_batch(std::int64_t s) const;

  /// One discriminator update (repeated disc_steps_per_gen_step times) on
  /// detached fakes, then one generator update with the discriminator
  /// frozen. Advances the step counter.
  TrainMetrics train_step(const Batch& batch);
  TrainMetrics advance() { return train_step(make_batch(step_ + 1)); }

  // The pieces of train_step, in order.
  torch::Tensor generate(const Batch& batch, LatentDistribution* latent);
  /// Fills the disc_* losses and the accuracies from the first update.
  void update_discriminator(const Batch& batch, const torch::Tensor& fake, TrainMetrics& m);
  /// Fills the gen_* losses. Leaves discriminator weights and statistics
  /// untouched.
  void update_generator(const Batch& batch, const torch::Tensor& fake, const LatentDistribution& latent,
                        TrainMetrics& m);

  /// Training-mode generator output for a batch, leaving model state as is.
  torch::Tensor fake_for(const Batch& batch);
  /// Discriminator objective on (batch.source, fake) without side effects.
  double disc_objective(const Batch& batch, const torch::Tensor& fake);

  CheckpointData checkpoint() const;
  /// Restores weights, optimiser moments and the step counter. Throws
  /// IntegrityError if any tensor is missing or shaped differently.
  void load_state(const CheckpointData& data);

 private:
  std::vector<std::size_t> epoch_order(std::int64_t epoch) const;

  TrainConfig cfg_;
  std::shared_ptr<const TrainingData> data_;
  TargetIndex targets_;
  Generator gen_{nullptr};
  Discriminator disc_{nullptr};
  std::unique_ptr<torch::optim::Adam> gen_opt_;
  std::unique_ptr<torch::optim::Adam> disc_opt_;
  std::int64_t step_ = 0;
};

/// Builds freshly initialised networks from a config (seeded by cfg.seed).
std::pair<Generator, Discriminator> build_models(const TrainConfig& cfg);

/// Restores networks (no optimiser) from a checkpoint, in eval mode.
std::pair<Generator, Discriminator> load_models(const CheckpointData& data, TrainConfig* cfg_out = nullptr);

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::vector<TrainMetrics> metrics;  // rows produced by this call
};

/// Full loop: runs steps up to cfg.total_steps, appends metrics.csv in
/// output_dir, writes ckpt_NNNNNNN.fexm every checkpoint_every steps and
/// final.fexm at the end. With resume, continues from that checkpoint and
/// drops metric rows past its step.
TrainResult train(const TrainConfig& cfg, const std::optional<std::filesystem::path>& resume = std::nullopt,
                  std::shared_ptr<const TrainingData> data = nullptr, std::ostream* log = nullptr);

std::string checkpoint_name(std::int64_t step);

}  // namespace fexgan
