#include "fexgan/generator.hpp"

#include <algorithm>
#include <sstream>

#include "fexgan/affect.hpp"
#include "fexgan/errors.hpp"

namespace nn = torch::nn;

namespace fexgan {

namespace {

std::string dims(const torch::Tensor& t) {
  std::ostringstream ss;
  ss << t.sizes();
  return ss.str();
}

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2i(int v) {
  int n = 0;
  while ((1 << n) < v) ++n;
  return n;
}

void expect_affects(const torch::Tensor& affects, int64_t batch, const char* what) {
  if (affects.dim() != 2 || affects.size(0) != batch ||
      affects.size(1) != static_cast<int64_t>(kNumAffects)) {
    throw ShapeError(std::string(what) + ": expected affects [" + std::to_string(batch) + ", 7], got " +
                     dims(affects));
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  if (!is_pow2(image_size) || image_size < 8) {
    throw DomainError("image_size must be a power of two >= 8, got " + std::to_string(image_size));
  }
  if (latent_dim < 2) throw DomainError("latent_dim must be >= 2");
  const int l = levels();
  if (static_cast<int>(encoder_channels.size()) != l) {
    throw DomainError("encoder needs " + std::to_string(l) + " down-sampling blocks for size " +
                      std::to_string(image_size) + ", got " + std::to_string(encoder_channels.size()));
  }
  if (static_cast<int>(decoder_channels.size()) != l - 1) {
    throw DomainError("decoder needs " + std::to_string(l - 1) + " up-sampling blocks before the " +
                      "output layer for size " + std::to_string(image_size) + ", got " +
                      std::to_string(decoder_channels.size()));
  }
  auto positive = [](const std::vector<int>& v) {
    return std::all_of(v.begin(), v.end(), [](int c) { return c > 0; });
  };
  if (!positive(encoder_channels) || !positive(decoder_channels) || latent_dense < 1 ||
      affect_dense < 1) {
    throw DomainError("channel and dense widths must be positive");
  }
  if (!(activation_slope >= 0.0 && activation_slope < 1.0)) {
    throw DomainError("activation_slope must lie in [0, 1)");
  }
  if (!(log_var_clamp > 0.0)) throw DomainError("log_var_clamp must be positive");
}

int GeneratorConfig::levels() const { return log2i(image_size); }

GeneratorConfig GeneratorConfig::standard(int image_size, int base, int cap) {
  GeneratorConfig c;
  c.image_size = image_size;
  const int l = log2i(image_size);
  c.encoder_channels.clear();
  for (int i = 0; i < l; ++i) c.encoder_channels.push_back(std::min(base << i, cap));
  c.decoder_channels.assign(c.encoder_channels.rbegin() + 1, c.encoder_channels.rend());
  c.latent_dense = c.affect_dense = std::min(base * 8, cap);
  return c;
}

torch::Tensor reparameterize(const LatentDistribution& dist, const torch::Tensor& eps) {
  if (!eps.sizes().equals(dist.mu.sizes()) || !dist.log_var.sizes().equals(dist.mu.sizes())) {
    throw ShapeError("reparameterize: eps " + dims(eps) + " does not match mu " + dims(dist.mu));
  }
  return dist.mu + torch::exp(dist.log_var * 0.5) * eps;
}

EncoderImpl::EncoderImpl(const GeneratorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  blocks_ = nn::Sequential();
  int64_t in = 3 + static_cast<int64_t>(kNumAffects);
  for (int out : cfg_.encoder_channels) {
    blocks_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1).bias(false)));
    blocks_->push_back(nn::BatchNorm2d(out));
    blocks_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(cfg_.activation_slope)));
    in = out;
  }
  blocks_->push_back(nn::Flatten());
  register_module("blocks", blocks_);
  mu_head_ = register_module("mu", nn::Linear(in, cfg_.latent_dim));
  log_var_head_ = register_module("log_var", nn::Linear(in, cfg_.latent_dim));
}

LatentDistribution EncoderImpl::forward(const torch::Tensor& images, const torch::Tensor& affects) {
  const int64_t s = cfg_.image_size;
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != s || images.size(3) != s) {
    throw ShapeError("encode: expected images [B, 3, " + std::to_string(s) + ", " + std::to_string(s) +
                     "], got " + dims(images));
  }
  expect_affects(affects, images.size(0), "encode");
  // Each affect entry becomes a constant image plane next to RGB.
  auto planes = affects.to(images.dtype()).view({affects.size(0), affects.size(1), 1, 1}).expand({-1, -1, s, s});
  auto h = blocks_->forward(torch::cat({images, planes}, 1));
  return {mu_head_(h), log_var_head_(h).clamp(-cfg_.log_var_clamp, cfg_.log_var_clamp)};
}

DecoderImpl::DecoderImpl(const GeneratorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  latent_dense_ = register_module("latent_dense", nn::Linear(cfg_.latent_dim, cfg_.latent_dense));
  affect_dense_ =
      register_module("affect_dense", nn::Linear(static_cast<int64_t>(kNumAffects), cfg_.affect_dense));
  blocks_ = nn::Sequential();
  int64_t in = cfg_.latent_dense + cfg_.affect_dense;
  for (int out : cfg_.decoder_channels) {
    blocks_->push_back(
        nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(false)));
    blocks_->push_back(nn::BatchNorm2d(out));
    blocks_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(cfg_.activation_slope)));
    in = out;
  }
  blocks_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, 3, 4).stride(2).padding(1)));
  blocks_->push_back(nn::Tanh());
  register_module("blocks", blocks_);
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& z, const torch::Tensor& affects) {
  if (z.dim() != 2 || z.size(1) != cfg_.latent_dim) {
    throw ShapeError("decode: expected z [B, " + std::to_string(cfg_.latent_dim) + "], got " + dims(z));
  }
  expect_affects(affects, z.size(0), "decode");
  const double slope = cfg_.activation_slope;
  auto act = [slope](const torch::Tensor& t) {
    return torch::nn::functional::leaky_relu(t, torch::nn::functional::LeakyReLUFuncOptions().negative_slope(slope));
  };
  auto h = torch::cat({act(latent_dense_(z)), act(affect_dense_(affects.to(z.dtype())))}, 1);
  return blocks_->forward(h.view({h.size(0), h.size(1), 1, 1}));
}

GeneratorImpl::GeneratorImpl(const GeneratorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  encoder_ = register_module("encoder", Encoder(cfg_));
  decoder_ = register_module("decoder", Decoder(cfg_));
}

LatentDistribution GeneratorImpl::encode(const torch::Tensor& images, const torch::Tensor& source_affects) {
  return encoder_(images, source_affects);
}

torch::Tensor GeneratorImpl::decode(const torch::Tensor& z, const torch::Tensor& target_affects) {
  return decoder_(z, target_affects);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& source, const torch::Tensor& source_affects,
                                     const torch::Tensor& target_affects,
                                     const std::optional<torch::Tensor>& eps, LatentDistribution* latent) {
  LatentDistribution dist = encode(source, source_affects);
  torch::Tensor z = eps ? reparameterize(dist, *eps) : dist.mu;
  if (latent) *latent = dist;
  return decode(z, target_affects);
}

void init_gan_weights(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& m : module.modules(/*include_self=*/true)) {
    const auto name = m->name();
    if (name == "torch::nn::Conv2dImpl" || name == "torch::nn::ConvTranspose2dImpl") {
      for (auto& p : m->named_parameters(false)) {
        if (p.key() == "weight") p.value().normal_(0.0, 0.02);
        if (p.key() == "bias") p.value().zero_();
      }
    } else if (name == "torch::nn::BatchNorm2dImpl") {
      for (auto& p : m->named_parameters(false)) {
        if (p.key() == "weight") p.value().normal_(1.0, 0.02);
        if (p.key() == "bias") p.value().zero_();
      }
    }
  }
}

}  // namespace fexgan
