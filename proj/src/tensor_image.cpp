#include "fexgan/tensor_image.hpp"

#include "fexgan/errors.hpp"

namespace F = torch::nn::functional;

namespace fexgan {

torch::Tensor preprocess(const Image& img, int target_size) {
  if (img.empty()) throw DomainError("cannot preprocess a zero-size image");
  if (target_size < 1) throw DomainError("target size must be positive");
  auto hwc = torch::from_blob(const_cast<std::uint8_t*>(img.pixels.data()),
                              {img.height, img.width, 3}, torch::kUInt8);
  auto x = hwc.permute({2, 0, 1}).to(torch::kFloat32).unsqueeze(0);
  if (img.width != target_size || img.height != target_size) {
    const std::vector<int64_t> size{target_size, target_size};
    if (img.width >= target_size && img.height >= target_size) {
      x = F::interpolate(x, F::InterpolateFuncOptions().size(size).mode(torch::kArea));
    } else {
      x = F::interpolate(
          x, F::InterpolateFuncOptions().size(size).mode(torch::kBilinear).align_corners(false));
    }
  }
  return (x.squeeze(0) / 127.5 - 1.0).contiguous();
}

Image to_image(const torch::Tensor& chw) {
  if (chw.dim() != 3 || chw.size(0) != 3) {
    throw ShapeError("to_image expects [3, H, W], got " + std::to_string(chw.dim()) + "-d tensor");
  }
  auto bytes = ((chw.detach().to(torch::kFloat32).clamp(-1.0, 1.0) + 1.0) * 127.5)
                   .round()
                   .to(torch::kUInt8)
                   .permute({1, 2, 0})
                   .contiguous();
  Image img(static_cast<int>(chw.size(2)), static_cast<int>(chw.size(1)));
  std::memcpy(img.pixels.data(), bytes.data_ptr<std::uint8_t>(), img.pixels.size());
  return img;
}

torch::Tensor load_images(const std::filesystem::path& root, std::span<const SampleRecord> records,
                          int target_size) {
  auto out = torch::empty({static_cast<int64_t>(records.size()), 3, target_size, target_size});
  for (std::size_t i = 0; i < records.size(); ++i) {
    out[static_cast<int64_t>(i)].copy_(preprocess(read_png(root / records[i].path), target_size));
  }
  return out;
}

torch::Tensor affect_tensor(std::span<const AffectVector> affects) {
  auto out = torch::empty({static_cast<int64_t>(affects.size()), static_cast<int64_t>(kNumAffects)});
  auto acc = out.accessor<float, 2>();
  for (std::size_t i = 0; i < affects.size(); ++i) {
    for (std::size_t c = 0; c < kNumAffects; ++c) {
      acc[static_cast<int64_t>(i)][static_cast<int64_t>(c)] = static_cast<float>(affects[i][c]);
    }
  }
  return out;
}

AffectVector affect_row(const torch::Tensor& probs_row) {
  auto row = probs_row.detach().to(torch::kFloat64).contiguous();
  if (row.numel() != static_cast<int64_t>(kNumAffects)) throw ShapeError("expected 7 class entries");
  AffectVector v{};
  std::memcpy(v.data(), row.data_ptr<double>(), sizeof(double) * kNumAffects);
  return v;
}

}  // namespace fexgan
