#include "fexgan/affect.hpp"

#include <cmath>
#include <numeric>

#include "fexgan/errors.hpp"

namespace fexgan {

namespace {

constexpr std::array<std::string_view, kNumAffects> kNames = {
    "neutral", "joy", "sadness", "anger", "disgust", "fear", "surprise"};

void check(Affect a) {
  const int id = affect_id(a);
  if (id < 0 || id >= static_cast<int>(kNumAffects)) {
    throw DomainError("affect id " + std::to_string(id) + " outside [0, 7)");
  }
}

}  // namespace

std::string_view affect_name(Affect a) {
  check(a);
  return kNames[static_cast<std::size_t>(affect_id(a))];
}

Affect affect_from_id(int id) {
  if (id < 0 || id >= static_cast<int>(kNumAffects)) {
    throw DomainError("affect id " + std::to_string(id) + " outside [0, 7)");
  }
  return static_cast<Affect>(id);
}

Affect affect_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Affect>(i);
  }
  throw DomainError("unknown affect '" + std::string(name) + "'");
}

AffectVector one_hot(Affect a) {
  check(a);
  AffectVector v{};
  v[static_cast<std::size_t>(affect_id(a))] = 1.0;
  return v;
}

AffectVector modulate(Affect a, double lambda, double noise_scale) {
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw DomainError("noise_scale must be finite and >= 0");
  }
  if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
  AffectVector v = one_hot(a);
  v[static_cast<std::size_t>(affect_id(a))] = 1.0 + noise_scale * lambda;
  return v;
}

void BlendSpec::validate() const {
  if (weights.empty()) throw DomainError("blend needs at least one weight");
  bool any_nonzero = false;
  for (const auto& [affect, w] : weights) {
    check(affect);
    if (!std::isfinite(w)) {
      throw DomainError("blend weight for " + std::string(affect_name(affect)) +
                        " is not finite");
    }
    any_nonzero = any_nonzero || w != 0.0;
  }
  if (!any_nonzero) throw DomainError("blend weights are all zero");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw DomainError("noise_scale must be finite and >= 0");
  }
  if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
}

AffectVector blend(const BlendSpec& spec) {
  spec.validate();
  AffectVector v{};
  const double gain = 1.0 + spec.noise_scale * spec.lambda;
  for (const auto& [affect, w] : spec.weights) {
    v[static_cast<std::size_t>(affect_id(affect))] = w * gain;
  }
  return v;
}

std::vector<BlendSpec> default_hybrids() {
  auto pair = [](Affect a, Affect b) {
    BlendSpec s;
    s.weights = {{a, 0.5}, {b, 0.5}};
    return s;
  };
  return {pair(Affect::anger, Affect::sadness), pair(Affect::joy, Affect::disgust),
          pair(Affect::fear, Affect::surprise)};
}

std::string blend_label(const BlendSpec& spec) {
  std::string out;
  for (const auto& [affect, w] : spec.weights) {
    if (!out.empty()) out += '+';
    out += affect_name(affect);
  }
  return out;
}

Affect argmax_class(std::span<const double> probs) {
  if (probs.size() != kNumAffects) {
    throw DomainError("argmax_class expects 7 probabilities, got " +
                      std::to_string(probs.size()));
  }
  const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (!std::isfinite(sum) || std::abs(sum - 1.0) > 1e-5) {
    throw DomainError("class probabilities sum to " + std::to_string(sum) +
                      ", expected 1 +- 1e-5");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<Affect>(best);
}

bool is_finite(const AffectVector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace fexgan
