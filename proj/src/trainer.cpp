#include "fexgan/trainer.hpp"

#include <array>
#include <chrono>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fexgan/errors.hpp"
#include "fexgan/tensor_image.hpp"

namespace fs = std::filesystem;

namespace fexgan {

namespace {

Rng seeded(std::uint64_t seed, std::uint32_t stream, std::uint64_t counter) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream,
                    static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32)};
  return Rng(seq);
}

constexpr std::uint32_t kShuffleStream = 0x5u;
constexpr std::uint32_t kBatchStream = 0xBu;

// Copies every buffer (batch-norm running statistics) on construction and
// writes them back on destruction.
class BufferRestore {
 public:
  explicit BufferRestore(torch::nn::Module& m) {
    for (auto& b : m.buffers()) saved_.emplace_back(b, b.clone());
  }
  ~BufferRestore() {
    torch::NoGradGuard no_grad;
    for (auto& [live, copy] : saved_) live.copy_(copy);
  }
  BufferRestore(const BufferRestore&) = delete;
  BufferRestore& operator=(const BufferRestore&) = delete;

 private:
  std::vector<std::pair<torch::Tensor, torch::Tensor>> saved_;
};

class FreezeParams {
 public:
  explicit FreezeParams(torch::nn::Module& m) : params_(m.parameters()) {
    for (auto& p : params_) p.set_requires_grad(false);
  }
  ~FreezeParams() {
    for (auto& p : params_) p.set_requires_grad(true);
  }
  FreezeParams(const FreezeParams&) = delete;
  FreezeParams& operator=(const FreezeParams&) = delete;

 private:
  std::vector<torch::Tensor> params_;
};

double accuracy(const torch::Tensor& hits) { return hits.to(torch::kFloat64).mean().item<double>(); }

torch::Tensor class_index(const std::vector<int>& v) {
  return torch::tensor(std::vector<int64_t>(v.begin(), v.end()), torch::kInt64);
}

void append_module(std::vector<TensorRecord>& out, const std::string& prefix, const torch::nn::Module& m) {
  for (const auto& p : m.named_parameters()) out.push_back({prefix + p.key(), p.value().detach().clone()});
  for (const auto& b : m.named_buffers()) out.push_back({prefix + b.key(), b.value().detach().clone()});
}

void copy_record(torch::Tensor& live, const CheckpointData& data, const std::string& name) {
  const auto& stored = data.get(name);
  if (!stored.sizes().equals(live.sizes()) || stored.scalar_type() != live.scalar_type()) {
    std::ostringstream ss;
    ss << "checkpoint record '" << name << "' has shape " << stored.sizes() << " / "
       << c10::toString(stored.scalar_type()) << ", model expects " << live.sizes() << " / "
       << c10::toString(live.scalar_type());
    throw IntegrityError(ss.str());
  }
  torch::NoGradGuard no_grad;
  live.copy_(stored);
}

void restore_module(torch::nn::Module& m, const std::string& prefix, const CheckpointData& data) {
  for (auto& p : m.named_parameters()) copy_record(p.value(), data, prefix + p.key());
  for (auto& b : m.named_buffers()) copy_record(b.value(), data, prefix + b.key());
}

void append_adam(std::vector<TensorRecord>& out, const std::string& prefix, const torch::nn::Module& m,
                 const torch::optim::Adam& opt) {
  const auto& state = opt.state();
  for (const auto& p : m.named_parameters()) {
    auto it = state.find(p.value().unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
    out.push_back({prefix + p.key() + ".step", torch::tensor(s.step(), torch::kInt64)});
    out.push_back({prefix + p.key() + ".exp_avg", s.exp_avg().clone()});
    out.push_back({prefix + p.key() + ".exp_avg_sq", s.exp_avg_sq().clone()});
  }
}

void restore_adam(torch::optim::Adam& opt, const std::string& prefix, torch::nn::Module& m,
                  const CheckpointData& data) {
  auto& state = opt.state();
  state.clear();
  for (auto& p : m.named_parameters()) {
    const std::string base = prefix + p.key();
    if (!data.has(base + ".step")) continue;
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->step(data.get(base + ".step").item<int64_t>());
    auto avg = torch::zeros_like(p.value());
    auto avg_sq = torch::zeros_like(p.value());
    copy_record(avg, data, base + ".exp_avg");
    copy_record(avg_sq, data, base + ".exp_avg_sq");
    s->exp_avg(avg);
    s->exp_avg_sq(avg_sq);
    state[p.value().unsafeGetTensorImpl()] = std::move(s);
  }
}

}  // namespace

std::shared_ptr<const TrainingData> TrainingData::load(const fs::path& root, int image_size, double val_fraction,
                                                       std::uint64_t seed) {
  auto data = std::make_shared<TrainingData>();
  const auto records = load_dataset(root);
  if (records.empty()) throw DomainError("corpus at " + root.string() + " contains no images");
  auto [train, val] = split(records, val_fraction, seed);
  data->train = std::move(train);
  data->val = std::move(val);
  data->train_images = load_images(root, data->train, image_size);
  data->val_images = load_images(root, data->val, image_size);
  return data;
}

bool TrainMetrics::same_values(const TrainMetrics& o) const {
  const auto& a = losses;
  const auto& b = o.losses;
  return step == o.step && a.gen_adv == b.gen_adv && a.reconst == b.reconst && a.kl == b.kl &&
         a.gen_total == b.gen_total && a.disc_real == b.disc_real && a.disc_fake == b.disc_fake &&
         a.disc_total == b.disc_total && real_binary_acc == o.real_binary_acc &&
         real_multi_acc == o.real_multi_acc && fake_binary_acc == o.fake_binary_acc &&
         fake_multi_acc == o.fake_multi_acc;
}

std::string metrics_csv_row(const TrainMetrics& m) {
  const auto& l = m.losses;
  std::ostringstream ss;
  ss << m.step;
  for (double v : {l.gen_adv, l.reconst, l.kl, l.gen_total, l.disc_real, l.disc_fake, l.disc_total,
                   m.real_binary_acc, m.real_multi_acc, m.fake_binary_acc, m.fake_multi_acc, m.wall_ms}) {
    ss << ',' << format_double(v);
  }
  return ss.str();
}

std::vector<TrainMetrics> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics log " + path.string());
  std::string line;
  std::vector<TrainMetrics> out;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw IoError(path.string() + ": missing or unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    std::int64_t step = 0;
    std::getline(ss, cell, ',');
    step = std::stoll(cell);
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 12) throw IoError(path.string() + ": bad row for step " + std::to_string(step));
    TrainMetrics m;
    m.step = step;
    m.losses = {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
    m.real_binary_acc = v[7];
    m.real_multi_acc = v[8];
    m.fake_binary_acc = v[9];
    m.fake_multi_acc = v[10];
    m.wall_ms = v[11];
    out.push_back(m);
  }
  return out;
}

std::pair<Generator, Discriminator> build_models(const TrainConfig& cfg) {
  torch::manual_seed(cfg.seed);
  Generator gen(cfg.generator_config());
  init_gan_weights(*gen);
  Discriminator disc(cfg.disc_config());
  init_gan_weights(*disc);
  return {gen, disc};
}

std::pair<Generator, Discriminator> load_models(const CheckpointData& data, TrainConfig* cfg_out) {
  const auto cfg = TrainConfig::from_text(data.config_text);
  auto [gen, disc] = build_models(cfg);
  restore_module(*gen, "G.", data);
  restore_module(*disc, "D.", data);
  gen->eval();
  disc->eval();
  if (cfg_out) *cfg_out = cfg;
  return {gen, disc};
}

Trainer::Trainer(TrainConfig cfg, std::shared_ptr<const TrainingData> data)
    : cfg_(std::move(cfg)), data_(std::move(data)), targets_(data_ ? data_->train : std::vector<SampleRecord>{}) {
  cfg_.validate();
  if (!data_ || data_->train.empty()) throw DomainError("trainer needs a non-empty training split");
  if (data_->train_images.size(2) != cfg_.image_size) {
    throw ShapeError("training images are " + std::to_string(data_->train_images.size(2)) +
                     " px, config expects " + std::to_string(cfg_.image_size));
  }
  std::tie(gen_, disc_) = build_models(cfg_);
  auto opts = [this] {
    return torch::optim::AdamOptions(cfg_.learning_rate).betas(std::make_tuple(cfg_.beta1, cfg_.beta2));
  };
  gen_opt_ = std::make_unique<torch::optim::Adam>(gen_->parameters(), opts());
  disc_opt_ = std::make_unique<torch::optim::Adam>(disc_->parameters(), opts());
}

std::vector<std::size_t> Trainer::epoch_order(std::int64_t epoch) const {
  std::vector<std::size_t> order(data_->train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = seeded(cfg_.seed, kShuffleStream, static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Batch Trainer::make_batch(std::int64_t s) const {
  if (s < 1) throw DomainError("steps are numbered from 1");
  const auto n = static_cast<std::int64_t>(data_->train.size());
  const std::int64_t b = cfg_.batch_size;
  const std::int64_t first = (s - 1) * b;

  std::int64_t cached_epoch = -1;
  std::vector<std::size_t> order;
  std::vector<int64_t> source_idx, target_idx;
  std::vector<AffectVector> source_aff, target_aff;
  Batch batch;

  Rng rng = seeded(cfg_.seed, kBatchStream, static_cast<std::uint64_t>(s));
  std::uniform_int_distribution<int> pick_class(0, static_cast<int>(kNumAffects) - 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (std::int64_t i = 0; i < b; ++i) {
    const std::int64_t pos = first + i;
    const std::int64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      order = epoch_order(epoch);
      cached_epoch = epoch;
    }
    const std::size_t idx = order[static_cast<std::size_t>(pos % n)];
    const auto& rec = data_->train[idx];
    const Affect target = affect_from_id(pick_class(rng));

    AffectVector at{};
    if (cfg_.lambda_mode == LambdaMode::scalar) {
      at = modulate(target, normal(rng), cfg_.noise_scale);
    } else {
      at = one_hot(target);
      for (auto& v : at) v += cfg_.noise_scale * normal(rng);
    }
    const std::size_t tgt = targets_.draw(rec.identity_id, target, rng);

    source_idx.push_back(static_cast<int64_t>(idx));
    target_idx.push_back(static_cast<int64_t>(tgt));
    source_aff.push_back(one_hot(rec.affect));
    target_aff.push_back(at);
    batch.source_class.push_back(affect_id(rec.affect));
    batch.target_class.push_back(affect_id(target));
  }

  auto eps = torch::empty({b, cfg_.latent_dim});
  auto acc = eps.accessor<float, 2>();
  for (std::int64_t i = 0; i < b; ++i) {
    for (std::int64_t j = 0; j < cfg_.latent_dim; ++j) acc[i][j] = static_cast<float>(normal(rng));
  }

  batch.source = data_->train_images.index_select(0, torch::tensor(source_idx, torch::kInt64));
  batch.target = data_->train_images.index_select(0, torch::tensor(target_idx, torch::kInt64));
  batch.source_affects = affect_tensor(source_aff);
  batch.target_affects = affect_tensor(target_aff);
  batch.eps = eps;
  return batch;
}

torch::Tensor Trainer::generate(const Batch& batch, LatentDistribution* latent) {
  gen_->train();
  return gen_->forward(batch.source, batch.source_affects, batch.target_affects, batch.eps, latent);
}

void Trainer::update_discriminator(const Batch& batch, const torch::Tensor& fake, TrainMetrics& m) {
  namespace L = losses;
  disc_->train();
  const auto fake_detached = fake.detach();
  for (int k = 0; k < cfg_.disc_steps_per_gen_step; ++k) {
    disc_opt_->zero_grad();
    auto real_out = disc_->forward(batch.source);
    auto fake_out = disc_->forward(fake_detached);
    auto real_loss = L::disc_real_loss(real_out.validity, real_out.class_probs, batch.source_affects);
    auto fake_loss = L::disc_fake_loss(fake_out.validity, fake_out.class_probs, batch.target_affects);
    auto total = L::disc_total(real_loss.to(torch::kFloat64), fake_loss.to(torch::kFloat64));
    total.backward();
    disc_opt_->step();
    if (k == 0) {
      torch::NoGradGuard no_grad;
      m.losses.disc_real = real_loss.item<double>();
      m.losses.disc_fake = fake_loss.item<double>();
      m.losses.disc_total = total.item<double>();
      m.real_binary_acc = accuracy(real_out.validity > 0.5);
      m.real_multi_acc = accuracy(real_out.class_probs.argmax(1) == class_index(batch.source_class));
      m.fake_binary_acc = accuracy(fake_out.validity < 0.5);
      m.fake_multi_acc = accuracy(fake_out.class_probs.argmax(1) == class_index(batch.target_class));
    }
  }
  disc_opt_->zero_grad();
}

void Trainer::update_generator(const Batch& batch, const torch::Tensor& fake, const LatentDistribution& latent,
                               TrainMetrics& m) {
  namespace L = losses;
  disc_->train();
  BufferRestore keep_disc_stats(*disc_);
  FreezeParams freeze_disc(*disc_);
  gen_opt_->zero_grad();
  auto out = disc_->forward(fake);
  auto adv = L::gen_adv_loss(out.validity, out.class_probs, batch.target_affects);
  auto rec = L::reconst_loss(fake, batch.target);
  auto kl = L::kl_loss(latent);
  auto total =
      L::gen_total(adv.to(torch::kFloat64), kl.to(torch::kFloat64), rec.to(torch::kFloat64), cfg_.weights);
  total.backward();
  gen_opt_->step();
  m.losses.gen_adv = adv.item<double>();
  m.losses.reconst = rec.item<double>();
  m.losses.kl = kl.item<double>();
  m.losses.gen_total = total.item<double>();
}

TrainMetrics Trainer::train_step(const Batch& batch) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainMetrics m;
  LatentDistribution latent;
  const auto fake = generate(batch, &latent);
  update_discriminator(batch, fake, m);
  update_generator(batch, fake, latent, m);
  m.step = ++step_;
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

torch::Tensor Trainer::fake_for(const Batch& batch) {
  BufferRestore keep(*gen_);
  torch::NoGradGuard no_grad;
  gen_->train();
  return gen_->forward(batch.source, batch.source_affects, batch.target_affects, batch.eps);
}

double Trainer::disc_objective(const Batch& batch, const torch::Tensor& fake) {
  BufferRestore keep(*disc_);
  torch::NoGradGuard no_grad;
  disc_->train();
  auto real_out = disc_->forward(batch.source);
  auto fake_out = disc_->forward(fake);
  auto real_loss = losses::disc_real_loss(real_out.validity, real_out.class_probs, batch.source_affects);
  auto fake_loss = losses::disc_fake_loss(fake_out.validity, fake_out.class_probs, batch.target_affects);
  return losses::disc_total(real_loss.to(torch::kFloat64), fake_loss.to(torch::kFloat64)).item<double>();
}

CheckpointData Trainer::checkpoint() const {
  CheckpointData data;
  // Where a run was written is not part of the model.
  auto stored = cfg_;
  stored.output_dir.clear();
  data.config_text = stored.to_text();
  data.records.push_back({"meta.step", torch::tensor(step_, torch::kInt64)});
  std::int64_t seed_bits = 0;
  std::memcpy(&seed_bits, &cfg_.seed, sizeof seed_bits);
  data.records.push_back({"rng.counter", torch::tensor(std::vector<int64_t>{seed_bits, step_}, torch::kInt64)});
  append_module(data.records, "G.", *gen_);
  append_module(data.records, "D.", *disc_);
  append_adam(data.records, "optG.", *gen_, *gen_opt_);
  append_adam(data.records, "optD.", *disc_, *disc_opt_);
  return data;
}

void Trainer::load_state(const CheckpointData& data) {
  restore_module(*gen_, "G.", data);
  restore_module(*disc_, "D.", data);
  restore_adam(*gen_opt_, "optG.", *gen_, data);
  restore_adam(*disc_opt_, "optD.", *disc_, data);
  step_ = data.get("meta.step").item<int64_t>();
  const auto counter = data.get("rng.counter");
  std::uint64_t seed = 0;
  const std::int64_t seed_bits = counter[0].item<int64_t>();
  std::memcpy(&seed, &seed_bits, sizeof seed);
  if (seed != cfg_.seed || counter[1].item<int64_t>() != step_) {
    throw IntegrityError("checkpoint RNG counter does not match its config seed / step");
  }
}

std::string checkpoint_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%07lld.fexm", static_cast<long long>(step));
  return buf;
}

TrainResult train(const TrainConfig& cfg, const std::optional<fs::path>& resume,
                  std::shared_ptr<const TrainingData> data, std::ostream* log) {
  cfg.validate();
  if (!data) {
    if (cfg.corpus_root.empty()) throw DomainError("config has no corpus_root");
    data = TrainingData::load(cfg.corpus_root, cfg.image_size, cfg.val_fraction, cfg.seed);
  }
  Trainer trainer(cfg, data);
  if (resume) trainer.load_state(read_checkpoint(*resume));

  const fs::path out_dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  // Keep rows up to the resumed step so the log stays strictly increasing.
  const fs::path metrics_path = out_dir / "metrics.csv";
  std::vector<std::string> kept;
  if (resume && fs::exists(metrics_path)) {
    for (const auto& m : read_metrics_csv(metrics_path)) {
      if (m.step <= trainer.step()) kept.push_back(metrics_csv_row(m));
    }
  }
  std::ofstream csv(metrics_path, std::ios::trunc);
  if (!csv) throw IoError("cannot open " + metrics_path.string());
  csv << kMetricsHeader << '\n';
  for (const auto& row : kept) csv << row << '\n';

  TrainResult result;
  while (trainer.step() < cfg.total_steps) {
    auto m = trainer.advance();
    csv << metrics_csv_row(m) << '\n';
    if (cfg.log_every > 0 && log && m.step % cfg.log_every == 0) {
      *log << "step " << m.step << " gen " << m.losses.gen_total << " (adv " << m.losses.gen_adv << ", rec "
           << m.losses.reconst << ", kl " << m.losses.kl << ") disc " << m.losses.disc_total << " real_acc "
           << m.real_multi_acc << " fake_acc " << m.fake_multi_acc << " " << m.wall_ms << " ms\n";
    }
    if (cfg.checkpoint_every > 0 && m.step % cfg.checkpoint_every == 0) {
      csv.flush();
      write_checkpoint(out_dir / checkpoint_name(m.step), trainer.checkpoint());
    }
    result.metrics.push_back(m);
  }
  csv.flush();
  result.final_checkpoint = out_dir / "final.fexm";
  write_checkpoint(result.final_checkpoint, trainer.checkpoint());
  return result;
}

}  // namespace fexgan
