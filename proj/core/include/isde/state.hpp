#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace isde {

/// Process state: a finite-dimensional real vector. Schedules act isotropically.
using State = Eigen::VectorXd;

/// Caller-owned Gaussian source. There is no hidden global randomness: every
/// draw in the library goes through an instance of this class.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double gaussian() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  void fill_gaussian(State& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal_(engine_);
  }
  State gaussian_vector(Eigen::Index dim) {
    State z(dim);
    fill_gaussian(z);
    return z;
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Seed for the independent substream `index` of a run seeded with `seed`.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace isde
