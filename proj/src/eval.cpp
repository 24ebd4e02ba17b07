#include "fexgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "fexgan/errors.hpp"
#include "fexgan/tensor_image.hpp"

namespace fexgan {

namespace {

Rng seeded(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0xE7u};
  return Rng(seq);
}

torch::Tensor one_hot_rows(std::span<const Affect> affects) {
  std::vector<AffectVector> rows;
  rows.reserve(affects.size());
  for (Affect a : affects) rows.push_back(one_hot(a));
  return affect_tensor(rows);
}

torch::Tensor labels_tensor(std::span<const Affect> affects) {
  std::vector<int64_t> v;
  for (Affect a : affects) v.push_back(affect_id(a));
  return torch::tensor(v, torch::kInt64);
}

void require_nonempty(const LabeledImages& set, const char* what) {
  if (set.size() == 0) throw DomainError(std::string(what) + " set is empty");
  if (set.images.size(0) != static_cast<int64_t>(set.size())) {
    throw ShapeError(std::string(what) + " set has " + std::to_string(set.images.size(0)) + " images but " +
                     std::to_string(set.size()) + " labels");
  }
}

std::string format_ratio(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed << v;
  return ss.str();
}

}  // namespace

LabeledImages LabeledImages::from(const torch::Tensor& images, std::span<const SampleRecord> records) {
  LabeledImages out;
  out.images = images;
  for (const auto& r : records) {
    out.labels.push_back(r.affect);
    out.identities.push_back(r.identity_id);
  }
  return out;
}

std::string AccuracyTable::to_csv() const {
  std::ostringstream ss;
  ss << "split,source,binary,multi\n";
  auto row = [&](const char* split, const char* source, const Accuracy& a) {
    ss << split << ',' << source << ',' << format_ratio(a.binary) << ',' << format_ratio(a.multi) << '\n';
  };
  row("train", "real", train_real);
  row("train", "fake", train_fake);
  row("val", "real", val_real);
  row("val", "fake", val_fake);
  return ss.str();
}

Accuracy real_accuracy(const InferenceModel& model, const LabeledImages& set, int batch) {
  require_nonempty(set, "evaluation");
  const auto n = static_cast<int64_t>(set.size());
  int64_t binary = 0, multi = 0;
  for (int64_t i = 0; i < n; i += batch) {
    const int64_t m = std::min<int64_t>(batch, n - i);
    const auto out = model.discriminate(set.images.narrow(0, i, m));
    const auto labels = labels_tensor(std::span(set.labels).subspan(i, m));
    binary += (out.validity > 0.5).sum().item<int64_t>();
    multi += (out.class_probs.argmax(1) == labels).sum().item<int64_t>();
  }
  return {static_cast<double>(binary) / n, static_cast<double>(multi) / n};
}

Accuracy fake_accuracy(const InferenceModel& model, const LabeledImages& set, std::uint64_t seed, int batch) {
  require_nonempty(set, "evaluation");
  const auto n = static_cast<int64_t>(set.size());
  Rng rng = seeded(seed, 0);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(kNumAffects) - 1);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  int64_t binary = 0, multi = 0;
  for (int64_t i = 0; i < n; i += batch) {
    const int64_t m = std::min<int64_t>(batch, n - i);
    std::vector<Affect> targets;
    for (int64_t k = 0; k < m; ++k) targets.push_back(affect_from_id(pick(rng)));
    auto eps = torch::empty({m, model.latent_dim()});
    auto acc = eps.accessor<float, 2>();
    for (int64_t r = 0; r < m; ++r) {
      for (int64_t c = 0; c < eps.size(1); ++c) acc[r][c] = normal(rng);
    }
    const auto fake = model.transform(set.images.narrow(0, i, m),
                                      one_hot_rows(std::span(set.labels).subspan(i, m)), one_hot_rows(targets), eps);
    const auto out = model.discriminate(fake);
    binary += (out.validity < 0.5).sum().item<int64_t>();
    multi += (out.class_probs.argmax(1) == labels_tensor(targets)).sum().item<int64_t>();
  }
  return {static_cast<double>(binary) / n, static_cast<double>(multi) / n};
}

AccuracyTable accuracy_table(const InferenceModel& model, const LabeledImages& train, const LabeledImages& val,
                             std::uint64_t seed) {
  AccuracyTable t;
  t.train_real = real_accuracy(model, train);
  t.train_fake = fake_accuracy(model, train, seed);
  t.val_real = real_accuracy(model, val);
  t.val_fake = fake_accuracy(model, val, seed + 1);
  return t;
}

Image Grid::image() const {
  std::vector<Image> tiles;
  for (int64_t i = 0; i < cells.size(0); ++i) tiles.push_back(to_image(cells[i]));
  return tile_images(tiles, rows, cols);
}

std::string Grid::manifest() const {
  std::ostringstream ss;
  ss << "cell\trow\tcol\tseed\tlabel\n";
  for (std::size_t i = 0; i < meta.size(); ++i) {
    ss << i << '\t' << i / cols << '\t' << i % cols << '\t' << meta[i].seed << '\t' << meta[i].label << '\n';
  }
  return ss.str();
}

void Grid::write(const std::filesystem::path& png) const {
  write_png(png, image());
  auto tsv = png;
  tsv.replace_extension(".tsv");
  std::ofstream out(tsv);
  if (!out) throw IoError("cannot write " + tsv.string());
  out << manifest();
}

Grid random_grid(const InferenceModel& model, int n, std::uint64_t seed) {
  if (n < 1) throw DomainError("random grid needs n >= 1");
  Grid g;
  g.cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  g.rows = (n + g.cols - 1) / g.cols;
  auto z = torch::empty({n, model.latent_dim()});
  auto acc = z.accessor<float, 2>();
  std::vector<Affect> affects;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t cell_seed = seeded(seed, static_cast<std::uint64_t>(i) + 1)();
    Rng rng(cell_seed);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(kNumAffects) - 1);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    const Affect a = affect_from_id(pick(rng));
    for (int64_t c = 0; c < z.size(1); ++c) acc[i][c] = normal(rng);
    affects.push_back(a);
    g.meta.push_back({std::string(affect_name(a)), cell_seed});
  }
  g.cells = model.decode(z, one_hot_rows(affects));
  return g;
}

std::vector<NeutralSource> neutral_sources(const LabeledImages& set, std::span<const int> identities) {
  std::vector<NeutralSource> out;
  for (int id : identities) {
    bool found = false;
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set.identities[i] == id && set.labels[i] == Affect::neutral) {
        out.push_back({id, set.images[static_cast<int64_t>(i)]});
        found = true;
        break;
      }
    }
    if (!found) throw DomainError("no neutral source image for identity " + std::to_string(id));
  }
  return out;
}

namespace {

torch::Tensor stack_sources(std::span<const NeutralSource> sources) {
  if (sources.empty()) throw DomainError("grid needs at least one source identity");
  std::vector<torch::Tensor> imgs;
  for (const auto& s : sources) imgs.push_back(s.image);
  return torch::stack(imgs);
}

}  // namespace

TransformGrid transform_grid(const InferenceModel& model, std::span<const NeutralSource> sources) {
  const auto src = stack_sources(sources);
  const int rows = static_cast<int>(sources.size());
  const int cols = static_cast<int>(kNumAffects);

  std::vector<Affect> source_affects(static_cast<std::size_t>(rows) * cols, Affect::neutral);
  std::vector<Affect> targets;
  std::vector<int64_t> row_index;
  for (int r = 0; r < rows; ++r) {
    for (Affect a : kAllAffects) {
      targets.push_back(a);
      row_index.push_back(r);
    }
  }
  const auto inputs = src.index_select(0, torch::tensor(row_index, torch::kInt64));

  TransformGrid out;
  out.grid.rows = rows;
  out.grid.cols = cols;
  out.grid.cells = model.transform(inputs, one_hot_rows(source_affects), one_hot_rows(targets));
  for (int r = 0; r < rows; ++r) {
    for (Affect a : kAllAffects) {
      out.grid.meta.push_back({"identity " + std::to_string(sources[r].identity_id) + " " +
                                   std::string(affect_name(a)),
                               0});
    }
  }

  const auto pred = model.discriminate(out.grid.cells).class_probs.argmax(1);
  out.agreement = (pred == labels_tensor(targets)).to(torch::kFloat64).mean().item<double>();

  const auto dist = (out.grid.cells - inputs).abs().flatten(1).mean(1).reshape({rows, cols});
  for (int r = 0; r < rows; ++r) {
    if (dist[r].argmin().item<int64_t>() == affect_id(Affect::neutral)) ++out.diagonal_rows;
  }
  return out;
}

HybridGrid hybrid_grid(const InferenceModel& model, std::span<const NeutralSource> sources,
                       std::span<const BlendSpec> blends) {
  if (blends.empty()) throw DomainError("hybrid grid needs at least one blend");
  const auto src = stack_sources(sources);
  const int rows = static_cast<int>(sources.size());
  const int cols = static_cast<int>(blends.size());

  std::vector<AffectVector> targets;
  std::vector<Affect> source_affects;
  std::vector<int64_t> row_index;
  HybridGrid out;
  for (int r = 0; r < rows; ++r) {
    for (const auto& b : blends) {
      targets.push_back(blend(b));
      source_affects.push_back(Affect::neutral);
      row_index.push_back(r);
      out.grid.meta.push_back({"identity " + std::to_string(sources[r].identity_id) + " " + blend_label(b), 0});
    }
  }
  const auto inputs = src.index_select(0, torch::tensor(row_index, torch::kInt64));
  out.grid.rows = rows;
  out.grid.cols = cols;
  out.grid.cells = model.transform(inputs, one_hot_rows(source_affects), affect_tensor(targets));

  const auto probs = model.discriminate(out.grid.cells).class_probs.to(torch::kFloat64).contiguous();
  auto p = probs.accessor<double, 2>();
  int consistent = 0;
  for (int i = 0; i < rows * cols; ++i) {
    const auto& spec = blends[static_cast<std::size_t>(i % cols)];
    double mass = 0.0, other = 0.0;
    for (Affect a : kAllAffects) {
      const double v = p[i][affect_id(a)];
      auto it = spec.weights.find(a);
      if (it != spec.weights.end() && it->second != 0.0) {
        mass += v;
      } else {
        other = std::max(other, v);
      }
    }
    if (mass >= other) ++consistent;
  }
  out.soft_consistency = static_cast<double>(consistent) / (rows * cols);
  return out;
}

double diversity_score(const torch::Tensor& images) {
  if (images.dim() < 1 || images.size(0) < 2) throw DomainError("diversity needs at least 2 images");
  const auto flat = images.to(torch::kFloat64).flatten(1);
  const int64_t n = flat.size(0);
  double total = 0.0;
  for (int64_t i = 0; i + 1 < n; ++i) {
    total += (flat.narrow(0, i + 1, n - i - 1) - flat[i]).abs().mean(1).sum().item<double>();
  }
  return total / (static_cast<double>(n) * (n - 1) / 2.0);
}

torch::Tensor sample_rows(const torch::Tensor& images, int n, std::uint64_t seed) {
  if (n < 1 || n > images.size(0)) {
    throw DomainError("cannot sample " + std::to_string(n) + " of " + std::to_string(images.size(0)) + " images");
  }
  std::vector<int64_t> idx(static_cast<std::size_t>(images.size(0)));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = seeded(seed, 0x5A);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(n));
  std::sort(idx.begin(), idx.end());
  return images.index_select(0, torch::tensor(idx, torch::kInt64));
}

}  // namespace fexgan
