#pragma once

#include <torch/torch.h>

#include <vector>

namespace fexgan {

/// Probabilities are kept inside [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-7;

struct DiscConfig {
  int image_size = 64;
  /// Exactly three stride-2 blocks with strictly increasing widths.
  std::vector<int> channels{64, 128, 256};
  double activation_slope = 0.2;

  void validate() const;
};

struct DiscOutput {
  torch::Tensor validity;     // [B], sigmoid probability of "real", clamped
  torch::Tensor class_probs;  // [B, 7], softmax
};

/// Three conv blocks (the first without batch norm), a shared flatten, then
/// a sigmoid validity head and a softmax affect head.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const DiscConfig& cfg);
  DiscOutput forward(const torch::Tensor& images);

  const DiscConfig& config() const { return cfg_; }

 private:
  DiscConfig cfg_;
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Linear validity_head_{nullptr};
  torch::nn::Linear class_head_{nullptr};
};
TORCH_MODULE(Discriminator);

}  // namespace fexgan
