#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fexgan/affect.hpp"
#include "fexgan/image.hpp"

namespace fexgan {

using Rng = std::mt19937_64;

/// Per-identity appearance. Ranges:
///   face_hue       [0, 1)      hair colour hue
///   skin_tone      [0, 1]      0 light .. 1 dark
///   face_aspect    [0.85, 1.2] face ellipse height / width
///   eye_spacing    [0.32, 0.48] eye offset from centre, fraction of face half-width
///   brow_thickness [0.015, 0.035] fraction of image side
struct IdentityParams {
  int identity_id = 0;
  double face_hue = 0.0;
  double skin_tone = 0.3;
  double face_aspect = 1.0;
  double eye_spacing = 0.4;
  double brow_thickness = 0.025;

  void validate() const;

  /// Deterministic in (corpus_seed, identity_id); hues of consecutive
  /// identities are spread by the golden ratio so they never coincide.
  static IdentityParams derive(std::uint64_t corpus_seed, int identity_id);
};

/// Expression controls. Ranges: brow_angle [-0.6, 0.6] rad (positive lowers
/// the inner brow ends), mouth_curvature [-1, 1] (positive smiles),
/// eye_openness [0, 1], mouth_openness [0, 1].
struct ExpressionParams {
  double brow_angle = 0.0;
  double mouth_curvature = 0.0;
  double eye_openness = 0.5;
  double mouth_openness = 0.0;

  void validate() const;

  static ExpressionParams rest();

  /// Pose for an affect at intensity in [0, 1] (0 = rest). Neutral is always
  /// the rest pose; surprise always has fully open eyes.
  static ExpressionParams for_affect(Affect a, double intensity);

  friend bool operator==(const ExpressionParams&, const ExpressionParams&) = default;
};

/// Pixel-space bounding box, inclusive min / exclusive max.
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

/// Regions an expression change may touch, for a given identity and pose.
struct FaceRegions {
  std::vector<Box> boxes;
  bool contains(int x, int y) const;
};

Image render_face(const IdentityParams& identity, const ExpressionParams& expr,
                  std::uint64_t jitter_seed, int size);

FaceRegions expression_regions(const IdentityParams& identity, std::uint64_t jitter_seed,
                               int size);

struct SampleRecord {
  int identity_id = 0;
  Affect affect = Affect::neutral;
  int frame_index = 0;
  std::string path;  // relative to the corpus root, '/' separated

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct CorpusSpec {
  int n_identities = 3;
  int frames_per_pair = 200;
  int image_size = 64;
  std::uint64_t corpus_seed = 7;

  void validate() const;
  std::size_t image_count() const {
    return static_cast<std::size_t>(n_identities) * kNumAffects * frames_per_pair;
  }
};

struct CorpusManifest {
  std::vector<SampleRecord> records;
  std::vector<ExpressionParams> expressions;  // parallel to records
};

inline constexpr const char* kManifestName = "manifest.tsv";

std::string record_path(int identity_id, Affect a, int frame_index);

/// Per-record seed; independent of worker count and generation order.
std::uint64_t record_seed(std::uint64_t corpus_seed, int identity_id, Affect a, int frame_index);

ExpressionParams frame_expression(std::uint64_t corpus_seed, int identity_id, Affect a,
                                  int frame_index);

/// Enumerates the manifest without touching the filesystem.
CorpusManifest plan_corpus(const CorpusSpec& spec);

/// Writes root/<identity>/<affect>/<NNNNN>.png plus root/manifest.tsv.
CorpusManifest gen_corpus(const CorpusSpec& spec, const std::filesystem::path& root,
                          int workers = 1);

void write_manifest(const std::filesystem::path& file, std::span<const SampleRecord> records);
std::vector<SampleRecord> read_manifest(const std::filesystem::path& file);

/// Scans the directory layout; records are sorted by (identity, affect, frame).
std::vector<SampleRecord> load_dataset(const std::filesystem::path& root);

/// Stratified by (identity, affect). The validation total is
/// round(N * val_fraction); groups receive floor shares plus one extra for
/// the largest remainders (ties go to the earlier group).
std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split(
    std::span<const SampleRecord> records, double val_fraction, std::uint64_t seed);

/// Uniform draw among records with the given identity and affect.
const SampleRecord& sample_target(std::span<const SampleRecord> records, int identity_id,
                                  Affect a, Rng& rng);

/// Precomputed (identity, affect) -> record-index pools for repeated draws.
class TargetIndex {
 public:
  explicit TargetIndex(std::span<const SampleRecord> records);

  /// Index into the records the index was built from.
  std::size_t draw(int identity_id, Affect a, Rng& rng) const;
  bool has(int identity_id, Affect a) const;
  std::vector<int> identities() const;

 private:
  std::map<std::pair<int, int>, std::vector<std::size_t>> pools_;
};

}  // namespace fexgan
