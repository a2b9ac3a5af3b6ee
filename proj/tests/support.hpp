#pragma once

// Seeded generators and small helpers shared by the test binaries.

#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "beamwatch/numerics/tensor.hpp"
#include "beamwatch/rng.hpp"

namespace beamwatch::testing {

inline numerics::TensorD random_tensor(numerics::Shape shape, Rng& rng, double scale = 1.0,
                                       bool requires_grad = true) {
  numerics::TensorD t(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = rng.normal() * scale;
  return t;
}

inline numerics::TensorF random_tensor_f(numerics::Shape shape, Rng& rng, double scale = 1.0,
                                         bool requires_grad = true) {
  numerics::TensorF t(std::move(shape), requires_grad);
  for (auto& v : t.values()) v = static_cast<float>(rng.normal() * scale);
  return t;
}

inline std::vector<double> random_weights(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& v : w) v = rng.normal();
  return w;
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("beamwatch-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace beamwatch::testing
