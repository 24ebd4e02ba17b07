#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fexgan {

inline constexpr std::size_t kNumAffects = 7;

// The index order below is part of every file format and of the HTTP API:
// 0 neutral, 1 joy, 2 sadness, 3 anger, 4 disgust, 5 fear, 6 surprise.
enum class Affect : int {
  neutral = 0,
  joy = 1,
  sadness = 2,
  anger = 3,
  disgust = 4,
  fear = 5,
  surprise = 6,
};

inline constexpr std::array<Affect, kNumAffects> kAllAffects = {
    Affect::neutral, Affect::joy,  Affect::sadness, Affect::anger,
    Affect::disgust, Affect::fear, Affect::surprise};

using AffectVector = std::array<double, kNumAffects>;

constexpr int affect_id(Affect a) { return static_cast<int>(a); }

std::string_view affect_name(Affect a);

/// Throws DomainError for ids outside [0, 7).
Affect affect_from_id(int id);

/// Lowercase class name to class; throws DomainError naming the bad input.
Affect affect_from_name(std::string_view name);

AffectVector one_hot(Affect a);

/// Target-affect modulation: active entry 1 + noise_scale * lambda, rest zero.
AffectVector modulate(Affect a, double lambda, double noise_scale);

struct BlendSpec {
  std::map<Affect, double> weights;
  double noise_scale = 0.1;
  double lambda = 0.0;

  void validate() const;
};

/// Each weighted entry becomes weight * (1 + noise_scale * lambda).
AffectVector blend(const BlendSpec& spec);

/// The three two-class hybrids (anger+sadness, joy+disgust, fear+surprise)
/// at equal weights and lambda = 0.
std::vector<BlendSpec> default_hybrids();

/// Short label such as "anger+sadness" for grid manifests.
std::string blend_label(const BlendSpec& spec);

/// Index of the largest probability, lowest index on ties. The input must
/// be a 7-simplex (sum within 1e-5 of one).
Affect argmax_class(std::span<const double> probs);

bool is_finite(const AffectVector& v);

}  // namespace fexgan
