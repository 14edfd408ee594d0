#include "semsds/optim/adam.hpp"

#include "semsds/error.hpp"

#include <algorithm>
#include <cmath>

namespace semsds {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::log(p / (1.0 - p));
}

ObjectOptimizer::ObjectOptimizer(const ObjectModel& object, int feature_dim) : feature_dim_(feature_dim) {
  logits_.reserve(object.gaussians.size());
  for (const auto& g : object.gaussians) logits_.push_back(logit(g.opacity));
  m_.assign(logits_.size() * stride(), 0.0);
  v_.assign(logits_.size() * stride(), 0.0);
}

namespace {

struct AdamStep {
  double c1, c2;  // bias corrections

  AdamStep(std::int64_t t)
      : c1(1.0 - std::pow(ObjectOptimizer::kBeta1, double(t))),
        c2(1.0 - std::pow(ObjectOptimizer::kBeta2, double(t))) {}

  double operator()(double& m, double& v, double g, double lr) const {
    m = ObjectOptimizer::kBeta1 * m + (1.0 - ObjectOptimizer::kBeta1) * g;
    v = ObjectOptimizer::kBeta2 * v + (1.0 - ObjectOptimizer::kBeta2) * g * g;
    return lr * (m / c1) / (std::sqrt(v / c2) + ObjectOptimizer::kEps);
  }
};

}  // namespace

void ObjectOptimizer::step_gaussians(ObjectModel& object, const std::vector<GaussianGradient>& grads,
                                     const LearningRates& lr, bool semantic_trainable) {
  auto& gs = object.gaussians;
  if (grads.size() != gs.size() || logits_.size() != gs.size()) {
    throw_error(ErrorKind::InvalidState, "optimizer state is out of sync with object '" + object.id + "'");
  }
  const AdamStep adam(++steps_);
  const std::size_t s = stride();
  for (std::size_t i = 0; i < gs.size(); ++i) {
    Gaussian3D& g = gs[i];
    const GaussianGradient& d = grads[i];
    double* m = &m_[i * s];
    double* v = &v_[i * s];
    for (int c = 0; c < 3; ++c) g.mean[c] -= adam(m[c], v[c], d.mean[c], lr.mean);
    for (int c = 0; c < 3; ++c) {
      const double step = adam(m[3 + c], v[3 + c], d.scale[c] * g.scale[c], lr.scale);
      g.scale[c] = std::max(kMinScale, g.scale[c] * std::exp(-step));
    }
    Vec4 q(g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z());
    for (int c = 0; c < 4; ++c) q[c] -= adam(m[6 + c], v[6 + c], d.rotation[c], lr.rotation);
    if (q.norm() > 0.0) g.rotation = Quat(q[0], q[1], q[2], q[3]).normalized();
    const double dlogit = d.opacity * g.opacity * (1.0 - g.opacity);
    logits_[i] -= adam(m[10], v[10], dlogit, lr.opacity);
    g.opacity = sigmoid(logits_[i]);
    for (int c = 0; c < 3; ++c) {
      g.color[c] = std::clamp(g.color[c] - adam(m[11 + c], v[11 + c], d.color[c], lr.color), 0.0, 1.0);
    }
    if (semantic_trainable) {
      const std::size_t n = std::min({g.semantic.size(), d.semantic.size(), std::size_t(feature_dim_)});
      for (std::size_t c = 0; c < n; ++c) g.semantic[c] -= adam(m[14 + c], v[14 + c], d.semantic[c], lr.semantic);
    }
  }
}

void ObjectOptimizer::step_transform(ObjectModel& object, const TransformGradient& grad,
                                     const LearningRates& lr) {
  const AdamStep adam(++transform_steps_);
  ObjectTransform& xf = object.transform;
  xf.scale = std::max(kMinScale, xf.scale - adam(tm_[0], tv_[0], grad.scale, lr.transform_scale));
  Vec4 q(xf.rotation.w(), xf.rotation.x(), xf.rotation.y(), xf.rotation.z());
  for (int c = 0; c < 4; ++c) q[c] -= adam(tm_[1 + c], tv_[1 + c], grad.rotation[c], lr.transform_rotation);
  if (q.norm() > 0.0) xf.rotation = Quat(q[0], q[1], q[2], q[3]).normalized();
  for (int c = 0; c < 3; ++c) {
    xf.translation[c] -= adam(tm_[5 + c], tv_[5 + c], grad.translation[c], lr.transform_translation);
  }
}

void ObjectOptimizer::remap(const ObjectModel& object, const std::vector<std::size_t>& origin,
                            const std::vector<bool>& fresh) {
  const std::size_t s = stride();
  std::vector<double> logits(origin.size()), m(origin.size() * s, 0.0), v(origin.size() * s, 0.0);
  for (std::size_t i = 0; i < origin.size(); ++i) {
    if (fresh[i]) {
      logits[i] = logit(object.gaussians[i].opacity);
      continue;
    }
    logits[i] = logits_[origin[i]];
    std::copy_n(&m_[origin[i] * s], s, &m[i * s]);
    std::copy_n(&v_[origin[i] * s], s, &v[i * s]);
  }
  logits_ = std::move(logits);
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace semsds
