#pragma once

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "themescreen/corpus.hpp"
#include "themescreen/eval.hpp"
#include "themescreen/features.hpp"
#include "themescreen/gateway.hpp"
#include "themescreen/numeric/matrix.hpp"
#include "themescreen/rng.hpp"

namespace themescreen::testkit {

inline numeric::Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  numeric::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-scale, scale);
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("themescreen-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline gateway::BackendConfig mock_config(std::size_t d = 64) {
  gateway::BackendConfig c;
  c.kind = gateway::BackendKind::kMock;
  c.embedding_dim = d;
  c.mock_seed = 1234;
  c.parallelism = 1;
  return c;
}

// generate -> split -> extract (+ feedback) -> embed, all in memory.
std::vector<features::SessionFeatures> synthetic_features(const corpus::SyntheticSpec& spec, std::size_t d = 64);

// Counts the confusion matrix with explicit branches, then applies the
// textbook formulas class by class. Shares no code with the library.
eval::MetricsReport oracle_metrics(const std::vector<eval::LabelPair>& pairs);

template <class Fn>
double seconds(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace themescreen::testkit
