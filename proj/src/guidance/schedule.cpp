#include "semsds/guidance/schedule.hpp"

#include "semsds/error.hpp"

#include <cmath>
#include <string>

namespace semsds {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end,
                                    SdsWeighting weighting) {
  if (steps < 2 || !(beta_start > 0.0) || !(beta_end > beta_start) || !(beta_end < 1.0)) {
    throw_error(ErrorKind::InvalidParameter, "schedule needs T >= 2 and 0 < beta_start < beta_end < 1");
  }
  NoiseSchedule s;
  s.weighting_ = weighting;
  double prod = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double b = beta_start + (beta_end - beta_start) * double(i) / double(steps - 1);
    prod *= 1.0 - b;
    s.beta_.push_back(b);
    s.alpha_bar_.push_back(prod);
  }
  return s;
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps()) throw_error(ErrorKind::InvalidParameter, "timestep out of range");
  return beta_[std::size_t(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 1 || t > steps()) {
    throw_error(ErrorKind::InvalidParameter,
                "timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  }
  return alpha_bar_[std::size_t(t - 1)];
}

double NoiseSchedule::weight(int t) const {
  const double ab = alpha_bar(t);
  return weighting_ == SdsWeighting::Constant ? 1.0 : 1.0 - ab;
}

Tensor add_noise(const NoiseSchedule& schedule, const Tensor& x0, int t, const Tensor& eps) {
  if (!x0.same_shape(eps)) throw_error(ErrorKind::InvalidInput, "noise shape does not match the image");
  const double ab = schedule.alpha_bar(t);
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  Tensor out = x0;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a * x0.data[i] + b * eps.data[i];
  return out;
}

Tensor gaussian_noise(int channels, int height, int width, std::mt19937_64& rng) {
  Tensor out(channels, height, width);
  std::normal_distribution<double> n;
  for (double& v : out.data) v = n(rng);
  return out;
}

}  // namespace semsds
