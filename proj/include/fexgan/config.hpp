#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fexgan/discriminator.hpp"
#include "fexgan/generator.hpp"
#include "fexgan/losses.hpp"

namespace fexgan {

/// How the sampled lambda perturbs the target affect vector: "scalar" adds
/// noise_scale * lambda to the active entry only; "vector" draws one lambda
/// per entry and adds noise_scale * lambda_c to every entry.
enum class LambdaMode { scalar, vector };

/// Training configuration. Serialised as `key = value` lines whose keys are
/// the field names below; `#` starts a comment. Channel lists are comma
/// separated.
struct TrainConfig {
  double learning_rate = 2e-4;
  int batch_size = 32;
  std::int64_t total_steps = 3000;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t seed = 1;
  losses::LossWeights weights;
  std::string corpus_root;
  std::string output_dir = "run";
  double val_fraction = 0.3;
  double noise_scale = 0.1;
  LambdaMode lambda_mode = LambdaMode::scalar;
  int disc_steps_per_gen_step = 1;
  std::int64_t checkpoint_every = 500;
  std::int64_t log_every = 100;

  // Model shape.
  int image_size = 64;
  int latent_dim = 128;
  std::vector<int> encoder_channels{32, 64, 128, 256, 256, 256};
  std::vector<int> decoder_channels{256, 256, 128, 64, 32};
  int latent_dense = 256;
  int affect_dense = 256;
  std::vector<int> disc_channels{64, 128, 256};
  double activation_slope = 0.2;

  void validate() const;

  GeneratorConfig generator_config() const;
  DiscConfig disc_config() const;

  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
  static TrainConfig from_file(const std::filesystem::path& path);
};

std::string format_double(double v);
std::string join_ints(const std::vector<int>& v);
std::vector<int> parse_int_list(const std::string& s);

}  // namespace fexgan
