#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fexgan/affect.hpp"
#include "fexgan/corpus.hpp"
#include "fexgan/image.hpp"
#include "fexgan/model.hpp"

namespace fexgan {

struct Accuracy {
  double binary = 0;
  double multi = 0;
};

/// Discriminator accuracy on {train, val} x {real, fake}.
struct AccuracyTable {
  Accuracy train_real, train_fake, val_real, val_fake;

  /// "split,source,binary,multi" with one row per cell.
  std::string to_csv() const;
};

/// Images [N, 3, S, S] with their labels.
struct LabeledImages {
  torch::Tensor images;
  std::vector<Affect> labels;
  std::vector<int> identities;

  std::size_t size() const { return labels.size(); }
  static LabeledImages from(const torch::Tensor& images, std::span<const SampleRecord> records);
};

/// Real images are scored against their labels. Each real image also gets
/// one fake, G(image, A_s, one_hot(t), eps) with t uniform and eps ~ N(0, 1)
/// drawn from `seed`; its class is scored against t.
Accuracy real_accuracy(const InferenceModel& model, const LabeledImages& set, int batch = 64);
Accuracy fake_accuracy(const InferenceModel& model, const LabeledImages& set, std::uint64_t seed, int batch = 64);
AccuracyTable accuracy_table(const InferenceModel& model, const LabeledImages& train, const LabeledImages& val,
                             std::uint64_t seed = 1);

struct GridCell {
  std::string label;
  std::uint64_t seed = 0;
};

/// Tiled output with a sidecar manifest (one tab-separated line per cell).
struct Grid {
  int rows = 0;
  int cols = 0;
  torch::Tensor cells;  // [rows * cols, 3, S, S]
  std::vector<GridCell> meta;

  Image image() const;
  std::string manifest() const;
  /// Writes `png` and the manifest next to it with a .tsv extension.
  void write(const std::filesystem::path& png) const;
};

/// n cells decoded from z ~ N(0, 1) and a uniformly drawn one-hot affect;
/// cell i uses its own seed derived from (seed, i).
Grid random_grid(const InferenceModel& model, int n, std::uint64_t seed);

struct NeutralSource {
  int identity_id = 0;
  torch::Tensor image;  // [3, S, S]
};

/// First neutral image of each requested identity.
std::vector<NeutralSource> neutral_sources(const LabeledImages& set, std::span<const int> identities);

struct TransformGrid {
  Grid grid;  // rows = identities, cols = the 7 affects in class order
  /// Fraction of cells the discriminator assigns to the column's affect.
  double agreement = 0;
  /// Rows whose neutral column is the closest (mean L1) to the source.
  int diagonal_rows = 0;
};

TransformGrid transform_grid(const InferenceModel& model, std::span<const NeutralSource> sources);

struct HybridGrid {
  Grid grid;  // rows = identities, cols = blends
  /// Fraction of cells whose probability mass on the blended classes is at
  /// least that of every other single class.
  double soft_consistency = 0;
};

HybridGrid hybrid_grid(const InferenceModel& model, std::span<const NeutralSource> sources,
                       std::span<const BlendSpec> blends);

/// Mean over all pairs of the mean absolute difference between images.
double diversity_score(const torch::Tensor& images);

/// Deterministic subset of n rows.
torch::Tensor sample_rows(const torch::Tensor& images, int n, std::uint64_t seed);

}  // namespace fexgan
