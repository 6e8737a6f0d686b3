#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "fedpoison/config.hpp"
#include "fedpoison/dataset.hpp"
#include "fedpoison/random.hpp"

namespace testing {

/// Removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fedpoison_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// n rows of c Gaussian blobs (unit variance) with means `spread` apart
/// along successive axes; labels cycle 0..c-1.
inline fedpoison::Dataset blobs(std::size_t n, std::size_t d, std::uint32_t c, double spread, std::uint64_t seed) {
  fedpoison::Random rng(seed);
  fedpoison::Matrix x(n, d);
  std::vector<fedpoison::Label> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<fedpoison::Label>(i % c);
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
    x(i, y[i] % d) += spread * (1.0 + static_cast<double>(y[i] / d));
  }
  return fedpoison::Dataset(std::move(x), std::move(y), c);
}

/// Small, fast synthetic experiment used by the orchestration and transport
/// suites.
inline fedpoison::ExperimentConfig small_config(std::size_t n_clients = 3, std::uint64_t seed = 1) {
  fedpoison::ExperimentConfig cfg;
  cfg.n_clients = n_clients;
  cfg.rounds = 3;
  cfg.master_seed = seed;
  cfg.training.max_epochs = 2;
  cfg.hidden = 12;
  cfg.victim_client = 1;
  cfg.data.kind = fedpoison::DataSource::Kind::synthetic;
  cfg.data.synthetic = {600, 8, 5, 4.0};
  cfg.transport.round_timeout_s = 20.0;
  return cfg;
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

}  // namespace testing
