#pragma once

#include "semsds/guidance/tensor.hpp"

#include <random>
#include <vector>

namespace semsds {

enum class SdsWeighting { OneMinusAlphaBar, Constant };

/// Discrete DDPM schedule with timesteps t = 1..T.
class NoiseSchedule {
 public:
  /// Linear betas from `beta_start` to `beta_end` (defaults: latent-diffusion values).
  static NoiseSchedule linear(int steps = 1000, double beta_start = 8.5e-4, double beta_end = 1.2e-2,
                              SdsWeighting weighting = SdsWeighting::OneMinusAlphaBar);

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta(int t) const;
  double alpha_bar(int t) const;
  /// w(t): 1 - alpha_bar(t), or 1.
  double weight(int t) const;
  SdsWeighting weighting() const { return weighting_; }

 private:
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
  SdsWeighting weighting_ = SdsWeighting::OneMinusAlphaBar;
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps. Throws for t outside [1, T].
Tensor add_noise(const NoiseSchedule& schedule, const Tensor& x0, int t, const Tensor& eps);

/// Standard normal tensor of the given shape.
Tensor gaussian_noise(int channels, int height, int width, std::mt19937_64& rng);

}  // namespace semsds
