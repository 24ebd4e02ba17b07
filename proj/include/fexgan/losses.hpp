#pragma once

#include <torch/torch.h>

#include "fexgan/discriminator.hpp"
#include "fexgan/generator.hpp"

/// Generator and discriminator objectives. Every function returns a 0-d
/// tensor that stays on the autograd graph of its inputs, in the inputs'
/// dtype. All reductions are means over the batch, so the batch size never
/// rescales a loss.
namespace fexgan::losses {

struct LossWeights {
  double alpha = 1.0;   // adversarial
  double beta = 0.1;    // KL
  double gamma = 10.0;  // reconstruction

  void validate() const;
};

struct LossReport {
  double gen_adv = 0, reconst = 0, kl = 0, gen_total = 0;
  double disc_real = 0, disc_fake = 0, disc_total = 0;

  /// gen_total == alpha*adv + beta*kl + gamma*reconst and
  /// disc_total == real + fake, both within tol.
  bool consistent(const LossWeights& w, double tol = 1e-6) const;
};

/// Binary cross entropy; target broadcasts against pred.
torch::Tensor bce(const torch::Tensor& target, const torch::Tensor& pred);

/// Multi-class cross entropy -sum_c t_c log p_c, averaged over rows. Targets
/// may be modulated or blended (non one-hot). Rows of probs must sum to
/// 1 +- 1e-5.
torch::Tensor cce(const torch::Tensor& target, const torch::Tensor& probs);

/// bce(1, fake validity) + cce(A_t, fake class probs)
torch::Tensor gen_adv_loss(const torch::Tensor& fake_validity, const torch::Tensor& fake_class_probs,
                           const torch::Tensor& target_affects);

/// Mean absolute difference over all elements.
torch::Tensor reconst_loss(const torch::Tensor& generated, const torch::Tensor& target);

/// -(1/2n) sum_i [1 + log_var_i - mu_i^2 - exp(log_var_i)] per item, n the
/// latent dimension, then averaged over the batch.
torch::Tensor kl_loss(const torch::Tensor& mu, const torch::Tensor& log_var);
torch::Tensor kl_loss(const LatentDistribution& dist);

torch::Tensor gen_total(const torch::Tensor& adv, const torch::Tensor& kl, const torch::Tensor& reconst,
                        const LossWeights& weights);

/// bce(1, real validity) + cce(A_s, real class probs)
torch::Tensor disc_real_loss(const torch::Tensor& real_validity, const torch::Tensor& real_class_probs,
                             const torch::Tensor& source_affects);

/// bce(0, fake validity) + cce(A_t, fake class probs)
torch::Tensor disc_fake_loss(const torch::Tensor& fake_validity, const torch::Tensor& fake_class_probs,
                             const torch::Tensor& target_affects);

torch::Tensor disc_total(const torch::Tensor& real_loss, const torch::Tensor& fake_loss);

}  // namespace fexgan::losses
