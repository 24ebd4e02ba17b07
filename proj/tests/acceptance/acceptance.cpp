// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <CLI11.hpp>
#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "fexgan/checkpoint.hpp"
#include "fexgan/corpus.hpp"
#include "fexgan/eval.hpp"
#include "fexgan/losses.hpp"
#include "fexgan/trainer.hpp"

using namespace fexgan;
namespace L = fexgan::losses;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds.
constexpr double kKlReference = 0.8069;
constexpr double kKlTol = 1e-4;
constexpr double kCrossEntropyTol = 1e-6;
constexpr double kClosedFormSeconds = 1.0;

constexpr int kGradTrials = 100;
constexpr int kGradMaxElements = 16;
constexpr double kFdStep = 1e-4;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradSeconds = 60.0;

constexpr int kDeskIdentities = 3;
constexpr int kDeskFrames = 200;
constexpr int kDeskSize = 64;
constexpr std::uint64_t kCorpusSeed = 7;
constexpr std::int64_t kDeskSteps = 3000;
constexpr int kDeskBatch = 32;
constexpr double kDeskLr = 2e-4;
constexpr std::uint64_t kDeskSeed = 1;
constexpr double kValRealMultiMin = 0.90;
constexpr double kReconstRatioMax = 0.50;
constexpr double kAgreementMin = 0.80;
constexpr double kDiversityRatioMin = 0.5;
constexpr int kDiversitySamples = 64;
constexpr double kDeskSeconds = 2 * 3600.0;

constexpr std::int64_t kResumeFrom = 1500;
constexpr std::int64_t kResumeWindow = 100;

constexpr int kChanceSamples = 1000;
constexpr double kChanceTol = 0.05;

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << v;
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

torch::Tensor dt(const std::vector<double>& v) { return torch::tensor(v, torch::kFloat64); }

// ---------------------------------------------------------------------------
// Closed forms

void closed_forms() {
  const auto t0 = std::chrono::steady_clock::now();
  const double kl0 = L::kl_loss(torch::zeros({1, 4}, torch::kFloat64), torch::zeros({1, 4}, torch::kFloat64))
                         .item<double>();
  const double kl4 =
      L::kl_loss(torch::zeros({1, 1}, torch::kFloat64), torch::full({1, 1}, std::log(4.0), torch::kFloat64))
          .item<double>();
  const double b = L::bce(dt({1.0}), dt({0.5})).item<double>();
  auto onehot = torch::zeros({1, 7}, torch::kFloat64);
  onehot[0][4] = 1.0;
  const double c = L::cce(onehot, torch::full({1, 7}, 1.0 / 7.0, torch::kFloat64)).item<double>();
  const double secs = seconds_since(t0);

  const bool pass = kl0 == 0.0 && std::abs(kl4 - kKlReference) <= kKlTol &&
                    std::abs(b - std::log(2.0)) <= kCrossEntropyTol &&
                    std::abs(c - std::log(7.0)) <= kCrossEntropyTol && secs < kClosedFormSeconds;
  report(pass, "loss closed forms",
         "kl(0,0)=" + fmt(kl0) + " kl(n=1,ln4)=" + fmt(kl4, 6) + " bce(1,.5)=" + fmt(b, 9) +
             " cce(onehot,uniform)=" + fmt(c, 9) + " in " + fmt(secs, 3) + "s");
}

// ---------------------------------------------------------------------------
// Gradient oracle. Each case maps a flat parameter vector to a loss twice:
// through the library on an autograd graph, and through a plain double
// re-implementation used for central differences. Probabilities are
// parametrised by logits so perturbations stay on the simplex.

struct GradCase {
  std::string name;
  int size;
  std::function<torch::Tensor(const torch::Tensor&)> library;
  std::function<double(const std::vector<double>&)> oracle;
  std::vector<double> x;  // evaluation point
};

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> softmax_row(const std::vector<double>& x, std::size_t off, std::size_t n) {
  double m = x[off];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[off + i]);
  std::vector<double> p(n);
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += p[i] = std::exp(x[off + i] - m);
  for (auto& v : p) v /= s;
  return p;
}

double o_bce(const std::vector<double>& t, const std::vector<double>& p) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += t[i] * std::log(p[i]) + (1 - t[i]) * std::log(1 - p[i]);
  return -s / static_cast<double>(p.size());
}

// rows of 7
double o_cce(const std::vector<double>& t, const std::vector<std::vector<double>>& p) {
  double s = 0;
  for (std::size_t r = 0; r < p.size(); ++r) {
    for (std::size_t c = 0; c < 7; ++c) s += t[r * 7 + c] * std::log(p[r][c]);
  }
  return -s / static_cast<double>(p.size());
}

double o_kl(const std::vector<double>& mu, const std::vector<double>& lv, std::size_t b, std::size_t n) {
  double total = 0;
  for (std::size_t i = 0; i < b; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double m = mu[i * n + j], l = lv[i * n + j];
      s += 1 + l - m * m - std::exp(l);
    }
    total += -s / (2.0 * n);
  }
  return total / static_cast<double>(b);
}

double o_l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

std::vector<double> slice(const std::vector<double>& x, std::size_t off, std::size_t n) {
  return {x.begin() + static_cast<long>(off), x.begin() + static_cast<long>(off + n)};
}

GradCase make_case_at(int kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> wide(-1.5, 1.5);
  auto vec = [&](std::size_t n, auto& dist) {
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
  };
  // modulated / blended class targets
  auto affect_targets = [&](std::size_t rows) {
    std::vector<double> t(rows * 7, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto c = static_cast<std::size_t>(rng() % 7);
      t[r * 7 + c] = 1.0 + 0.1 * wide(rng);
      if (rng() % 2) t[r * 7 + (c + 3) % 7] = 0.5 * unit(rng);
    }
    return t;
  };
  const L::LossWeights w;

  switch (kind) {
    case 0: {  // bce
      const std::size_t m = 1 + rng() % kGradMaxElements;
      const auto t = vec(m, unit);
      return {"bce", static_cast<int>(m),
              [=](const torch::Tensor& x) { return L::bce(dt(t), torch::sigmoid(x)); },
              [=](const std::vector<double>& x) {
                std::vector<double> p;
                for (double v : x) p.push_back(sig(v));
                return o_bce(t, p);
              }};
    }
    case 1: {  // cce, 1 or 2 rows
      const std::size_t rows = 1 + rng() % 2;
      const auto t = affect_targets(rows);
      return {"cce", static_cast<int>(rows * 7),
              [=](const torch::Tensor& x) {
                return L::cce(dt(t).reshape({static_cast<long>(rows), 7}),
                              torch::softmax(x.reshape({static_cast<long>(rows), 7}), 1));
              },
              [=](const std::vector<double>& x) {
                std::vector<std::vector<double>> p;
                for (std::size_t r = 0; r < rows; ++r) p.push_back(softmax_row(x, r * 7, 7));
                return o_cce(t, p);
              }};
    }
    case 2:
    case 3:
    case 4: {  // gen_adv / disc_real / disc_fake on one item: 1 validity logit + 7 class logits
      const auto t = affect_targets(1);
      const double label = kind == 4 ? 0.0 : 1.0;
      const std::string name = kind == 2 ? "gen_adv" : kind == 3 ? "disc_real" : "disc_fake";
      return {name, 8,
              [=](const torch::Tensor& x) {
                const auto v = torch::sigmoid(x.narrow(0, 0, 1));
                const auto p = torch::softmax(x.narrow(0, 1, 7).reshape({1, 7}), 1);
                const auto a = dt(t).reshape({1, 7});
                if (kind == 2) return L::gen_adv_loss(v, p, a);
                if (kind == 3) return L::disc_real_loss(v, p, a);
                return L::disc_fake_loss(v, p, a);
              },
              [=](const std::vector<double>& x) {
                return o_bce({label}, {sig(x[0])}) + o_cce(t, {softmax_row(x, 1, 7)});
              }};
    }
    case 5: {  // L1 reconstruction, evaluated away from the kink at x == target
      const std::size_t m = 1 + rng() % kGradMaxElements;
      std::vector<double> target = vec(m, wide);
      std::vector<double> x0(m);
      for (std::size_t i = 0; i < m; ++i) x0[i] = target[i] + (rng() % 2 ? 1.0 : -1.0) * (0.01 + unit(rng));
      return {"reconst", static_cast<int>(m),
              [=](const torch::Tensor& x) { return L::reconst_loss(x, dt(target)); },
              [=](const std::vector<double>& x) { return o_l1(x, target); }, x0};
    }
    case 6: {  // KL on mu and log_var, b x n with 2*b*n <= 16
      const std::size_t b = 1 + rng() % 2;
      const std::size_t n = 1 + rng() % (kGradMaxElements / (2 * b));
      const long bl = static_cast<long>(b), nl = static_cast<long>(n);
      return {"kl", static_cast<int>(2 * b * n),
              [=](const torch::Tensor& x) {
                return L::kl_loss(x.narrow(0, 0, bl * nl).reshape({bl, nl}),
                                  x.narrow(0, bl * nl, bl * nl).reshape({bl, nl}));
              },
              [=](const std::vector<double>& x) {
                return o_kl(slice(x, 0, b * n), slice(x, b * n, b * n), b, n);
              }};
    }
    case 7: {  // weighted generator total: 8 adversarial + 2 mu + 2 log_var + 2 image values
      const auto t = affect_targets(1);
      const auto target = vec(2, wide);
      return {"gen_total", 14,
              [=](const torch::Tensor& x) {
                const auto adv = L::gen_adv_loss(torch::sigmoid(x.narrow(0, 0, 1)),
                                                 torch::softmax(x.narrow(0, 1, 7).reshape({1, 7}), 1),
                                                 dt(t).reshape({1, 7}));
                const auto kl = L::kl_loss(x.narrow(0, 8, 2).reshape({1, 2}), x.narrow(0, 10, 2).reshape({1, 2}));
                const auto rec = L::reconst_loss(x.narrow(0, 12, 2), dt(target));
                return L::gen_total(adv, kl, rec, w);
              },
              [=](const std::vector<double>& x) {
                const double adv = o_bce({1.0}, {sig(x[0])}) + o_cce(t, {softmax_row(x, 1, 7)});
                return w.alpha * adv + w.beta * o_kl(slice(x, 8, 2), slice(x, 10, 2), 1, 2) +
                       w.gamma * o_l1(slice(x, 12, 2), target);
              }};
    }
    default: {  // discriminator total: real and fake items, 16 logits
      const auto ts = affect_targets(1);
      const auto tt = affect_targets(1);
      return {"disc_total", 16,
              [=](const torch::Tensor& x) {
                const auto real = L::disc_real_loss(torch::sigmoid(x.narrow(0, 0, 1)),
                                                    torch::softmax(x.narrow(0, 1, 7).reshape({1, 7}), 1),
                                                    dt(ts).reshape({1, 7}));
                const auto fake = L::disc_fake_loss(torch::sigmoid(x.narrow(0, 8, 1)),
                                                    torch::softmax(x.narrow(0, 9, 7).reshape({1, 7}), 1),
                                                    dt(tt).reshape({1, 7}));
                return L::disc_total(real, fake);
              },
              [=](const std::vector<double>& x) {
                return o_bce({1.0}, {sig(x[0])}) + o_cce(ts, {softmax_row(x, 1, 7)}) +
                       o_bce({0.0}, {sig(x[8])}) + o_cce(tt, {softmax_row(x, 9, 7)});
              }};
    }
  }
}

GradCase make_case(int kind, std::mt19937_64& rng) {
  auto c = make_case_at(kind, rng);
  if (c.x.empty()) {
    std::uniform_real_distribution<double> wide(-1.5, 1.5);
    c.x.resize(static_cast<std::size_t>(c.size));
    for (auto& v : c.x) v = wide(rng);
  }
  return c;
}

void gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0, worst_value = 0.0;
  std::string worst_case;
  for (int trial = 0; trial < kGradTrials; ++trial) {
    const auto c = make_case(trial % 9, rng);
    const auto& x = c.x;

    auto xt = dt(x).requires_grad_();
    const auto loss = c.library(xt);
    loss.backward();
    const auto analytic = xt.grad().contiguous();
    worst_value = std::max(worst_value, std::abs(loss.item<double>() - c.oracle(x)));

    double num_max = 0.0, diff_max = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto xp = x, xm = x;
      xp[i] += kFdStep;
      xm[i] -= kFdStep;
      const double numeric = (c.oracle(xp) - c.oracle(xm)) / (2 * kFdStep);
      num_max = std::max(num_max, std::abs(numeric));
      diff_max = std::max(diff_max, std::abs(numeric - analytic[static_cast<long>(i)].item<double>()));
    }
    const double rel = diff_max / std::max(num_max, 1e-8);
    if (rel > worst) {
      worst = rel;
      worst_case = c.name;
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst <= kGradRelTol && worst_value <= 1e-9 && secs < kGradSeconds;
  report(pass, "gradient oracle",
         std::to_string(kGradTrials) + " trials, worst relative error " + fmt(worst, 3) +
             (worst_case.empty() ? "" : " (" + worst_case + ")") + ", worst value mismatch " + fmt(worst_value, 3) +
             " in " + fmt(secs, 3) + "s");
}

// ---------------------------------------------------------------------------
// Corpus

std::map<std::string, std::uint64_t> tree_digest(const fs::path& root) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = crc64(read_file_bytes(e.path()));
  }
  return out;
}

CorpusSpec desk_corpus_spec() {
  CorpusSpec spec;
  spec.n_identities = kDeskIdentities;
  spec.frames_per_pair = kDeskFrames;
  spec.image_size = kDeskSize;
  spec.corpus_seed = kCorpusSeed;
  return spec;
}

void corpus_determinism(const fs::path& work) {
  const auto spec = desk_corpus_spec();
  const auto t0 = std::chrono::steady_clock::now();
  const auto manifest = gen_corpus(spec, work / "corpus_b", 2);
  const bool identical = tree_digest(work / "corpus") == tree_digest(work / "corpus_b");

  std::size_t violations = 0;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& e = manifest.expressions[i];
    switch (manifest.records[i].affect) {
      case Affect::joy: violations += e.mouth_curvature <= 0; break;
      case Affect::sadness: violations += e.mouth_curvature >= 0; break;
      case Affect::surprise: violations += e.eye_openness != 1.0; break;
      default: break;
    }
  }
  const auto files = tree_digest(work / "corpus").size();
  report(identical && violations == 0 && manifest.records.size() == spec.image_count(), "corpus determinism",
         std::string(identical ? "byte-identical" : "DIFFERENT") + " trees (" + std::to_string(files) +
             " files, 1 vs 2 workers), " + std::to_string(violations) + " label-ordering violations over " +
             std::to_string(manifest.records.size()) + " samples in " + fmt(seconds_since(t0), 3) + "s");
  fs::remove_all(work / "corpus_b");
}

// ---------------------------------------------------------------------------
// Training

TrainConfig desk_config(const fs::path& corpus, const fs::path& out) {
  TrainConfig cfg;
  cfg.corpus_root = corpus.string();
  cfg.output_dir = out.string();
  cfg.total_steps = kDeskSteps;
  cfg.batch_size = kDeskBatch;
  cfg.learning_rate = kDeskLr;
  cfg.seed = kDeskSeed;
  cfg.checkpoint_every = 500;
  cfg.log_every = 500;
  return cfg;
}

double mean_reconst(const std::vector<TrainMetrics>& rows, std::int64_t first, std::int64_t last) {
  double s = 0;
  int n = 0;
  for (const auto& m : rows) {
    if (m.step >= first && m.step <= last) {
      s += m.losses.reconst;
      ++n;
    }
  }
  return n ? s / n : NAN;
}

void chance_level(const TrainingData& data) {
  const auto cfg = desk_config("", "");
  auto [g, d] = build_models(cfg);
  const NetworkModel model(g, d);
  const auto val = LabeledImages::from(data.val_images, data.val);
  std::vector<int64_t> idx(static_cast<std::size_t>(data.val.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(99);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(kChanceSamples);
  LabeledImages subset;
  subset.images = val.images.index_select(0, torch::tensor(idx, torch::kInt64));
  for (auto i : idx) {
    subset.labels.push_back(val.labels[static_cast<std::size_t>(i)]);
    subset.identities.push_back(val.identities[static_cast<std::size_t>(i)]);
  }
  const auto real = real_accuracy(model, subset);
  const auto fake = fake_accuracy(model, subset, 5);
  const double chance = 1.0 / 7.0;
  const bool pass = std::abs(real.multi - chance) <= kChanceTol && std::abs(fake.multi - chance) <= kChanceTol;
  report(pass, "chance-level control",
         "untrained multi-class accuracy over " + std::to_string(kChanceSamples) + " samples: real " +
             fmt(real.multi) + ", fake " + fmt(fake.multi) + " (1/7 = " + fmt(chance) + ")");
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"Acceptance checks"};
  std::string work_dir = "acceptance_work";
  app.add_option("--work", work_dir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  const fs::path work(work_dir);
  fs::remove_all(work);
  fs::create_directories(work);

  closed_forms();
  gradient_oracle();

  std::cerr << "generating desk corpus..." << std::endl;
  gen_corpus(desk_corpus_spec(), work / "corpus", 1);
  corpus_determinism(work);

  const auto data = TrainingData::load(work / "corpus", kDeskSize, 0.3, kDeskSeed);
  chance_level(*data);

  // Desk run A.
  std::cerr << "desk run A (" << kDeskSteps << " steps)..." << std::endl;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg_a = desk_config(work / "corpus", work / "run_a");
  const auto run_a = train(cfg_a, std::nullopt, data, &std::cerr);
  const double secs_a = seconds_since(t0);

  {
    const auto model = NetworkModel::load(run_a.final_checkpoint);
    const auto val = LabeledImages::from(data->val_images, data->val);
    const double val_real_multi = real_accuracy(*model, val).multi;
    const double early = mean_reconst(run_a.metrics, 100, 200);
    const double late = mean_reconst(run_a.metrics, kDeskSteps - 99, kDeskSteps);
    std::vector<int> ids;
    for (int i = 0; i < kDeskIdentities; ++i) ids.push_back(i);
    const auto grid = transform_grid(*model, neutral_sources(val, ids));
    const auto samples = random_grid(*model, kDiversitySamples, 11).cells;
    const auto reals = sample_rows(data->val_images, kDiversitySamples, 11);
    const double div_fake = diversity_score(samples);
    const double div_real = diversity_score(reals);
    const double ratio = div_fake / div_real;

    grid.grid.write(work / "transform.png");
    random_grid(*model, kDiversitySamples, 11).write(work / "random.png");
    hybrid_grid(*model, neutral_sources(val, ids), default_hybrids()).grid.write(work / "hybrid.png");

    const bool a = val_real_multi >= kValRealMultiMin;
    const bool b = late <= kReconstRatioMax * early;
    const bool c = grid.agreement >= kAgreementMin;
    const bool d = ratio >= kDiversityRatioMin;
    report(a && b && c && d && secs_a <= kDeskSeconds, "desk training run",
           std::string("(a) val real multi-class ") + fmt(val_real_multi) + (a ? " ok" : " LOW") +
               "; (b) reconst " + fmt(late) + " vs " + fmt(early) + " = " + fmt(late / early) +
               (b ? " ok" : " HIGH") + "; (c) transform agreement " + fmt(grid.agreement) +
               (c ? " ok" : " LOW") + ", diagonal rows " + std::to_string(grid.diagonal_rows) + "/" +
               std::to_string(grid.grid.rows) + "; (d) diversity " + fmt(div_fake) + "/" + fmt(div_real) + " = " +
               fmt(ratio) + (d ? " ok" : " LOW") + "; " + fmt(secs_a / 60.0, 3) + " min");
  }

  // Desk run B with the same seed, then a resume window from run A.
  std::cerr << "desk run B (" << kDeskSteps << " steps)..." << std::endl;
  auto cfg_b = cfg_a;
  cfg_b.output_dir = (work / "run_b").string();
  const auto run_b = train(cfg_b, std::nullopt, data, &std::cerr);
  const auto sum_a = file_checksum(run_a.final_checkpoint);
  const auto sum_b = file_checksum(run_b.final_checkpoint);

  auto cfg_r = cfg_a;
  cfg_r.output_dir = (work / "run_resume").string();
  cfg_r.total_steps = kResumeFrom + kResumeWindow;
  const auto resumed = train(cfg_r, work / "run_a" / checkpoint_name(kResumeFrom), data, &std::cerr);
  int matching = 0;
  for (const auto& m : resumed.metrics) {
    const auto& ref = run_a.metrics[static_cast<std::size_t>(m.step - 1)];
    matching += m.same_values(ref) ? 1 : 0;
  }
  const bool pass = sum_a == sum_b && matching == kResumeWindow &&
                    static_cast<std::int64_t>(resumed.metrics.size()) == kResumeWindow;
  report(pass, "determinism",
         "final checksums " + sum_a + " / " + sum_b + "; resume from step " + std::to_string(kResumeFrom) + ": " +
             std::to_string(matching) + "/" + std::to_string(kResumeWindow) + " metric rows bit-identical");

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
