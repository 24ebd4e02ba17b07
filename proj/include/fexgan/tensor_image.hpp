#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <span>
#include <vector>

#include "fexgan/affect.hpp"
#include "fexgan/corpus.hpp"
#include "fexgan/image.hpp"

namespace fexgan {

/// Resize to target x target and map [0, 255] onto [-1, 1]; returns a
/// float tensor [3, target, target]. Downscaling averages areas, upscaling
/// is bilinear.
torch::Tensor preprocess(const Image& img, int target_size);

/// Inverse of the normalisation for a [3, H, W] tensor; values are clamped.
Image to_image(const torch::Tensor& chw);

/// Loads and preprocesses every record under root into [N, 3, S, S].
torch::Tensor load_images(const std::filesystem::path& root, std::span<const SampleRecord> records,
                          int target_size);

/// Stacks affect vectors into a float [B, 7] tensor.
torch::Tensor affect_tensor(std::span<const AffectVector> affects);

AffectVector affect_row(const torch::Tensor& probs_row);

}  // namespace fexgan
