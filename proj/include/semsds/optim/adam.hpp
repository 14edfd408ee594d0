#pragma once

#include "semsds/core/types.hpp"
#include "semsds/optim/config.hpp"
#include "semsds/render/rasterizer.hpp"

#include <cstdint>
#include <vector>

namespace semsds {

/// Adam state for one object's Gaussians and its transform. Opacity is
/// optimized as a logit (opacity = sigmoid(logit)) and Gaussian scales as
/// logarithms (floored at 1e-6); the transform scale is updated directly.
/// Quaternions are renormalized and colors clamped to [0, 1] after every step. Each object keeps its own step
/// counters because local steps touch one object at a time.
class ObjectOptimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-15;
  static constexpr double kMinScale = 1e-6;

  ObjectOptimizer() = default;
  ObjectOptimizer(const ObjectModel& object, int feature_dim);

  void step_gaussians(ObjectModel& object, const std::vector<GaussianGradient>& grads,
                      const LearningRates& lr, bool semantic_trainable);
  void step_transform(ObjectModel& object, const TransformGradient& grad, const LearningRates& lr);

  /// Follows a densify/prune change: entry i copies state origin[i] unless
  /// it is fresh, in which case its moments start at zero.
  void remap(const ObjectModel& object, const std::vector<std::size_t>& origin, const std::vector<bool>& fresh);

  std::int64_t steps() const { return steps_; }
  std::int64_t transform_steps() const { return transform_steps_; }
  std::size_t size() const { return logits_.size(); }

 private:
  std::size_t stride() const { return 14 + std::size_t(feature_dim_); }

  int feature_dim_ = 0;
  std::vector<double> logits_;
  std::vector<double> m_, v_;  // size() x stride()
  std::vector<double> tm_ = std::vector<double>(8, 0.0), tv_ = std::vector<double>(8, 0.0);
  std::int64_t steps_ = 0;
  std::int64_t transform_steps_ = 0;
};

double sigmoid(double x);
double logit(double p);

}  // namespace semsds
