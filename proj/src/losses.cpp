#include "fexgan/losses.hpp"

#include <cmath>
#include <sstream>

#include "fexgan/affect.hpp"
#include "fexgan/errors.hpp"

namespace fexgan::losses {

namespace {

std::string dims(const torch::Tensor& t) {
  std::ostringstream ss;
  ss << t.sizes();
  return ss.str();
}

void check_simplex_rows(const torch::Tensor& probs) {
  if (probs.dim() != 2) throw ShapeError("class probabilities must be [B, C], got " + dims(probs));
  torch::NoGradGuard no_grad;
  const double worst = (probs.sum(1) - 1.0).abs().max().item<double>();
  if (!(worst <= 1e-5)) {
    throw DomainError("class probability rows must sum to 1 +- 1e-5 (worst deviation " +
                      std::to_string(worst) + ")");
  }
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {alpha, beta, gamma}) {
    if (!std::isfinite(w) || w < 0.0) throw DomainError("loss weights must be finite and >= 0");
  }
  if (alpha == 0.0 && beta == 0.0 && gamma == 0.0) throw DomainError("loss weights are all zero");
}

bool LossReport::consistent(const LossWeights& w, double tol) const {
  const double gen = w.alpha * gen_adv + w.beta * kl + w.gamma * reconst;
  return std::abs(gen - gen_total) <= tol && std::abs(disc_real + disc_fake - disc_total) <= tol;
}

torch::Tensor bce(const torch::Tensor& target, const torch::Tensor& pred) {
  auto p = pred.clamp(kProbClamp, 1.0 - kProbClamp);
  auto t = target.to(pred.dtype());
  return -(t * torch::log(p) + (1.0 - t) * torch::log(1.0 - p)).mean();
}

torch::Tensor cce(const torch::Tensor& target, const torch::Tensor& probs) {
  check_simplex_rows(probs);
  if (!target.sizes().equals(probs.sizes())) {
    throw ShapeError("cce: target " + dims(target) + " does not match probs " + dims(probs));
  }
  auto logp = torch::log(probs.clamp_min(kProbClamp));
  return -(target.to(probs.dtype()) * logp).sum(1).mean();
}

torch::Tensor gen_adv_loss(const torch::Tensor& fake_validity, const torch::Tensor& fake_class_probs,
                           const torch::Tensor& target_affects) {
  return bce(torch::ones_like(fake_validity), fake_validity) + cce(target_affects, fake_class_probs);
}

torch::Tensor reconst_loss(const torch::Tensor& generated, const torch::Tensor& target) {
  if (!generated.sizes().equals(target.sizes())) {
    throw ShapeError("reconst_loss: generated " + dims(generated) + " vs target " + dims(target));
  }
  return (generated - target.to(generated.dtype())).abs().mean();
}

torch::Tensor kl_loss(const torch::Tensor& mu, const torch::Tensor& log_var) {
  if (mu.dim() != 2 || !mu.sizes().equals(log_var.sizes())) {
    throw ShapeError("kl_loss: mu " + dims(mu) + " and log_var " + dims(log_var) + " must be equal [B, n]");
  }
  const double n = static_cast<double>(mu.size(1));
  auto per_item = (1.0 + log_var - mu.pow(2) - torch::exp(log_var)).sum(1) * (-1.0 / (2.0 * n));
  return per_item.mean();
}

torch::Tensor kl_loss(const LatentDistribution& dist) { return kl_loss(dist.mu, dist.log_var); }

torch::Tensor gen_total(const torch::Tensor& adv, const torch::Tensor& kl, const torch::Tensor& reconst,
                        const LossWeights& weights) {
  weights.validate();
  return weights.alpha * adv + weights.beta * kl + weights.gamma * reconst;
}

torch::Tensor disc_real_loss(const torch::Tensor& real_validity, const torch::Tensor& real_class_probs,
                             const torch::Tensor& source_affects) {
  return bce(torch::ones_like(real_validity), real_validity) + cce(source_affects, real_class_probs);
}

torch::Tensor disc_fake_loss(const torch::Tensor& fake_validity, const torch::Tensor& fake_class_probs,
                             const torch::Tensor& target_affects) {
  return bce(torch::zeros_like(fake_validity), fake_validity) + cce(target_affects, fake_class_probs);
}

torch::Tensor disc_total(const torch::Tensor& real_loss, const torch::Tensor& fake_loss) {
  return real_loss + fake_loss;
}

}  // namespace fexgan::losses
