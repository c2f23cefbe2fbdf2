#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "sgan/imaging.hpp"
#include "sgan/rng.hpp"

namespace sgan::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sgan_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

template <typename Scalar>
Image<Scalar> random_image(Index h, Index w, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Image<Scalar> img(h, w);
  for (Index i = 0; i < img.data.size(); ++i) img.data.data()[i] = Scalar(u(rng));
  return img;
}

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

struct GradReport {
  double max_rel_error = 0;
  int probes = 0;
  int skipped = 0;
};

/// Central-difference check of an analytic gradient. `loss()` re-evaluates
/// the scalar objective; `pattern()` returns the piecewise-linear branch the
/// evaluation took (ReLU signs, L1 residual signs). Probes whose +-h
/// evaluations leave the base branch are skipped and counted. Relative error
/// is |a - n| / max(|a|, |n|, floor).
template <typename Loss, typename Pattern>
GradReport check_gradient(double* values, const double* analytic, Index n, Loss&& loss, Pattern&& pattern,
                          int max_probes = 24, double h = 1e-3, double floor = 1e-6) {
  GradReport r;
  const auto base = pattern();
  const Index probes = std::min<Index>(n, max_probes);
  for (Index k = 0; k < probes; ++k) {
    const Index i = probes == n ? k : (k * n) / probes + (k % 3);
    if (i >= n) continue;
    const double old = values[i];
    values[i] = old + h;
    const double lp = loss();
    const bool same_p = pattern() == base;
    values[i] = old - h;
    const double lm = loss();
    const bool same_m = pattern() == base;
    values[i] = old;
    if (!same_p || !same_m) {
      ++r.skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2 * h);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    r.max_rel_error = std::max(r.max_rel_error, rel);
    ++r.probes;
  }
  loss();
  return r;
}

}  // namespace sgan::testing
