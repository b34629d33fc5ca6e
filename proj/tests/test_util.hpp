#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "blotcheck/image.hpp"
#include "blotcheck/roi.hpp"
#include "blotcheck/tensor.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("blotcheck_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline blotcheck::BinaryMask random_mask(int w, int h, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution on(density);
  blotcheck::BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      m.set(x, y, on(rng));
    }
  }
  return m;
}

inline blotcheck::Tensor<double> random_panel(blotcheck::Index side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  blotcheck::Tensor<double> t({1, side, side});
  for (blotcheck::Index i = 0; i < t.size(); ++i) {
    t[i] = u(rng);
  }
  return t;
}

inline blotcheck::Tensor<float> random_panel_f(blotcheck::Index side, std::mt19937_64& rng) {
  return random_panel(side, rng).cast<float>();
}

}  // namespace testutil
