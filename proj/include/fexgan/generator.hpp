#pragma once

#include <torch/torch.h>

#include <optional>
#include <vector>

namespace fexgan {

struct GeneratorConfig {
  int image_size = 64;
  int latent_dim = 128;
  /// One stride-2 down-sampling block per entry; log2(image_size) entries
  /// take the input down to 1x1.
  std::vector<int> encoder_channels{32, 64, 128, 256, 256, 256};
  /// Up-sampling blocks (transpose conv, batch norm, activation) taking the
  /// 1x1 bottleneck to half resolution; the tanh output layer adds the last
  /// doubling. log2(image_size) - 1 entries.
  std::vector<int> decoder_channels{256, 256, 128, 64, 32};
  /// Dense widths for the latent and affect branches; their concatenation is
  /// reshaped to a (latent_dense + affect_dense) x 1 x 1 feature map.
  int latent_dense = 256;
  int affect_dense = 256;
  double activation_slope = 0.2;
  double log_var_clamp = 10.0;

  void validate() const;
  int levels() const;

  /// Channel schedule min(base * 2^i, cap) for the encoder, mirrored for the
  /// decoder.
  static GeneratorConfig standard(int image_size, int base = 32, int cap = 256);
};

struct LatentDistribution {
  torch::Tensor mu;       // [B, n]
  torch::Tensor log_var;  // [B, n], clamped
};

/// z = mu + exp(log_var / 2) * eps
torch::Tensor reparameterize(const LatentDistribution& dist, const torch::Tensor& eps);

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const GeneratorConfig& cfg);
  LatentDistribution forward(const torch::Tensor& images, const torch::Tensor& affects);

 private:
  GeneratorConfig cfg_;
  torch::nn::Sequential blocks_{nullptr};
  torch::nn::Linear mu_head_{nullptr};
  torch::nn::Linear log_var_head_{nullptr};
};
TORCH_MODULE(Encoder);

class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const GeneratorConfig& cfg);
  torch::Tensor forward(const torch::Tensor& z, const torch::Tensor& affects);

 private:
  GeneratorConfig cfg_;
  torch::nn::Linear latent_dense_{nullptr};
  torch::nn::Linear affect_dense_{nullptr};
  torch::nn::Sequential blocks_{nullptr};
};
TORCH_MODULE(Decoder);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorConfig& cfg);

  LatentDistribution encode(const torch::Tensor& images, const torch::Tensor& source_affects);
  torch::Tensor decode(const torch::Tensor& z, const torch::Tensor& target_affects);

  /// Encode, sample, decode. Without eps the latent mean is decoded
  /// (deterministic mode). The distribution is written to *latent if given.
  torch::Tensor forward(const torch::Tensor& source, const torch::Tensor& source_affects,
                        const torch::Tensor& target_affects,
                        const std::optional<torch::Tensor>& eps = std::nullopt,
                        LatentDistribution* latent = nullptr);

  const GeneratorConfig& config() const { return cfg_; }

 private:
  GeneratorConfig cfg_;
  Encoder encoder_{nullptr};
  Decoder decoder_{nullptr};
};
TORCH_MODULE(Generator);

/// Conv weights ~ N(0, 0.02), batch-norm scale ~ N(1, 0.02), biases zero.
void init_gan_weights(torch::nn::Module& module);

}  // namespace fexgan
