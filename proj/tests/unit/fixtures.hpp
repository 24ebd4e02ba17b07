#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "fexgan/config.hpp"
#include "fexgan/corpus.hpp"
#include "fexgan/trainer.hpp"

namespace fexgan::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Narrow 32 px networks that train in milliseconds.
TrainConfig tiny_config();

/// 2 identities x 7 affects x 6 frames at 32 px, generated once per process.
const std::filesystem::path& tiny_corpus();
std::shared_ptr<const TrainingData> tiny_data();

}  // namespace fexgan::testing
