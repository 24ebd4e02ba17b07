#include "fexgan/model.hpp"

#include "fexgan/checkpoint.hpp"
#include "fexgan/trainer.hpp"

namespace fexgan {

torch::Tensor InferenceModel::transform(const torch::Tensor& source, const torch::Tensor& source_affects,
                                        const torch::Tensor& target_affects,
                                        const std::optional<torch::Tensor>& eps) const {
  const auto dist = encode(source, source_affects);
  const auto z = eps ? reparameterize(dist, *eps) : dist.mu;
  return decode(z, target_affects);
}

NetworkModel::NetworkModel(Generator gen, Discriminator disc, std::int64_t step)
    : gen_(std::move(gen)), disc_(std::move(disc)), step_(step) {
  gen_->eval();
  disc_->eval();
  for (auto& p : gen_->parameters()) p.set_requires_grad(false);
  for (auto& p : disc_->parameters()) p.set_requires_grad(false);
}

std::shared_ptr<NetworkModel> NetworkModel::load(const std::filesystem::path& checkpoint) {
  const auto data = read_checkpoint(checkpoint);
  auto [gen, disc] = load_models(data);
  return std::make_shared<NetworkModel>(gen, disc, data.get("meta.step").item<int64_t>());
}

LatentDistribution NetworkModel::encode(const torch::Tensor& images, const torch::Tensor& source_affects) const {
  torch::NoGradGuard no_grad;
  return gen_->encode(images, source_affects);
}

torch::Tensor NetworkModel::decode(const torch::Tensor& z, const torch::Tensor& target_affects) const {
  torch::NoGradGuard no_grad;
  return gen_->decode(z, target_affects);
}

DiscOutput NetworkModel::discriminate(const torch::Tensor& images) const {
  torch::NoGradGuard no_grad;
  return disc_->forward(images);
}

}  // namespace fexgan
