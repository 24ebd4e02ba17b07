#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>

#include "fexgan/config.hpp"
#include "fexgan/discriminator.hpp"
#include "fexgan/generator.hpp"

namespace fexgan {

/// Read-only view of a generator/discriminator pair. Implementations must be
/// safe to call from several threads at once.
class InferenceModel {
 public:
  virtual ~InferenceModel() = default;

  virtual int image_size() const = 0;
  virtual int latent_dim() const = 0;

  virtual LatentDistribution encode(const torch::Tensor& images, const torch::Tensor& source_affects) const = 0;
  virtual torch::Tensor decode(const torch::Tensor& z, const torch::Tensor& target_affects) const = 0;
  virtual DiscOutput discriminate(const torch::Tensor& images) const = 0;

  /// G(I_s, A_s, A_t). Without eps the latent mean is decoded.
  torch::Tensor transform(const torch::Tensor& source, const torch::Tensor& source_affects,
                          const torch::Tensor& target_affects,
                          const std::optional<torch::Tensor>& eps = std::nullopt) const;
};

/// Networks restored from a checkpoint, frozen in eval mode.
class NetworkModel final : public InferenceModel {
 public:
  NetworkModel(Generator gen, Discriminator disc, std::int64_t step = 0);

  static std::shared_ptr<NetworkModel> load(const std::filesystem::path& checkpoint);

  int image_size() const override { return gen_->config().image_size; }
  int latent_dim() const override { return gen_->config().latent_dim; }
  std::int64_t step() const { return step_; }

  LatentDistribution encode(const torch::Tensor& images, const torch::Tensor& source_affects) const override;
  torch::Tensor decode(const torch::Tensor& z, const torch::Tensor& target_affects) const override;
  DiscOutput discriminate(const torch::Tensor& images) const override;

 private:
  mutable Generator gen_;
  mutable Discriminator disc_;
  std::int64_t step_;
};

}  // namespace fexgan
