#include "fixtures.hpp"

#include <atomic>
#include <random>
#include <unistd.h>

namespace fs = std::filesystem;

namespace fexgan::testing {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("fexgan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.image_size = 32;
  c.latent_dim = 8;
  c.encoder_channels = {8, 16, 16, 16, 16};
  c.decoder_channels = {16, 16, 16, 8};
  c.latent_dense = 16;
  c.affect_dense = 16;
  c.disc_channels = {8, 16, 32};
  c.batch_size = 8;
  c.total_steps = 20;
  c.checkpoint_every = 0;
  c.log_every = 0;
  c.seed = 3;
  return c;
}

const fs::path& tiny_corpus() {
  static TempDir dir("tiny_corpus");
  static const bool ready = [] {
    CorpusSpec spec;
    spec.n_identities = 2;
    spec.frames_per_pair = 6;
    spec.image_size = 32;
    gen_corpus(spec, dir.path());
    return true;
  }();
  (void)ready;
  return dir.path();
}

std::shared_ptr<const TrainingData> tiny_data() {
  static auto data = TrainingData::load(tiny_corpus(), 32, 0.3, 3);
  return data;
}

}  // namespace fexgan::testing
