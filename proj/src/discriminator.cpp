#include "fexgan/discriminator.hpp"

#include <sstream>

#include "fexgan/affect.hpp"
#include "fexgan/errors.hpp"

namespace nn = torch::nn;

namespace fexgan {

void DiscConfig::validate() const {
  if (channels.size() != 3) {
    throw DomainError("discriminator needs exactly 3 blocks, got " + std::to_string(channels.size()));
  }
  if (channels[0] < 1 || channels[0] >= channels[1] || channels[1] >= channels[2]) {
    throw DomainError("discriminator widths must be positive and strictly increasing");
  }
  if (image_size < 8 || image_size % 8 != 0) {
    throw DomainError("discriminator image_size must be a positive multiple of 8");
  }
  if (!(activation_slope >= 0.0 && activation_slope < 1.0)) {
    throw DomainError("activation_slope must lie in [0, 1)");
  }
}

DiscriminatorImpl::DiscriminatorImpl(const DiscConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  trunk_ = nn::Sequential();
  int64_t in = 3;
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    const int64_t out = cfg_.channels[i];
    const bool norm = i > 0;
    trunk_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1).bias(!norm)));
    if (norm) trunk_->push_back(nn::BatchNorm2d(out));
    trunk_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(cfg_.activation_slope)));
    in = out;
  }
  trunk_->push_back(nn::Flatten());
  register_module("trunk", trunk_);
  const int64_t side = cfg_.image_size / 8;
  const int64_t flat = in * side * side;
  validity_head_ = register_module("validity", nn::Linear(flat, 1));
  class_head_ = register_module("classes", nn::Linear(flat, static_cast<int64_t>(kNumAffects)));
}

DiscOutput DiscriminatorImpl::forward(const torch::Tensor& images) {
  const int64_t s = cfg_.image_size;
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != s || images.size(3) != s) {
    std::ostringstream ss;
    ss << "discriminate: expected images [B, 3, " << s << ", " << s << "], got " << images.sizes();
    throw ShapeError(ss.str());
  }
  auto h = trunk_->forward(images);
  auto validity = torch::sigmoid(validity_head_(h)).squeeze(1).clamp(kProbClamp, 1.0 - kProbClamp);
  return {validity, torch::softmax(class_head_(h), 1)};
}

}  // namespace fexgan
