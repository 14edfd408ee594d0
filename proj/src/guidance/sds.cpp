#include "semsds/guidance/sds.hpp"

#include "semsds/error.hpp"

#include <string>

namespace semsds {

ComposedScore compose_scores(const Tensor& x_t, const std::vector<ScoreTerm>& terms,
                             GuidanceOracle& oracle, int t) {
  if (terms.empty()) throw_error(ErrorKind::InvalidInput, "no subprompts to compose");
  const std::size_t cells = x_t.plane();
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k].mask == nullptr || terms[k].mask->size() != cells) {
      throw_error(ErrorKind::InvalidInput,
                  "mask " + std::to_string(k) + " does not match the " + std::to_string(x_t.height) + "x" +
                      std::to_string(x_t.width) + " oracle grid");
    }
  }

  ComposedScore out;
  out.epsilon = Tensor(x_t.channels, x_t.height, x_t.width);
  std::vector<int> count(cells, 0);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& mask = *terms[k].mask;
    bool any = false;
    for (auto m : mask) any = any || m != 0;
    if (!any) continue;
    const Tensor pred = oracle.predict_noise(x_t, terms[k].prompt, terms[k].view_descriptor, t);
    if (!pred.same_shape(x_t)) throw_error(ErrorKind::InvalidInput, "oracle returned a wrong-shaped prediction");
    ++out.oracle_calls;
    out.used.push_back(int(k));
    for (std::size_t i = 0; i < cells; ++i) {
      if (!mask[i]) continue;
      const int n = ++count[i];
      for (int c = 0; c < x_t.channels; ++c) {
        double& m = out.epsilon.data[std::size_t(c) * cells + i];
        const double v = pred.data[std::size_t(c) * cells + i];
        m = n == 1 ? v : m + (v - m) / n;
      }
    }
  }
  for (std::size_t i = 0; i < cells; ++i) {
    if (count[i] == 0) {
      throw_error(ErrorKind::InvalidInput, "cell (" + std::to_string(i % x_t.width) + ", " +
                                               std::to_string(i / x_t.width) + ") is covered by no mask");
    }
  }
  return out;
}

namespace {

void finish(SdsResult& r, const Tensor& eps_hat, const Tensor& eps, double w) {
  r.grad = Tensor(eps.channels, eps.height, eps.width);
  double sq = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double d = eps_hat.data[i] - eps.data[i];
    r.grad.data[i] = w * d;
    sq += d * d;
  }
  r.residual = eps.size() ? sq / double(eps.size()) : 0.0;
}

}  // namespace

SdsResult semantic_sds_grad(const Tensor& x, const std::vector<ScoreTerm>& terms,
                            GuidanceOracle& oracle, const NoiseSchedule& schedule, int t,
                            const Tensor& eps) {
  SdsResult r;
  r.x_t = add_noise(schedule, x, t, eps);
  r.score = compose_scores(r.x_t, terms, oracle, t);
  finish(r, r.score.epsilon, eps, schedule.weight(t));
  return r;
}

SdsResult plain_sds_grad(const Tensor& x, const std::string& prompt,
                         const std::string& view_descriptor, GuidanceOracle& oracle,
                         const NoiseSchedule& schedule, int t, const Tensor& eps) {
  SdsResult r;
  r.x_t = add_noise(schedule, x, t, eps);
  r.score.epsilon = oracle.predict_noise(r.x_t, prompt, view_descriptor, t);
  if (!r.score.epsilon.same_shape(x)) throw_error(ErrorKind::InvalidInput, "oracle returned a wrong-shaped prediction");
  r.score.oracle_calls = 1;
  r.score.used = {0};
  finish(r, r.score.epsilon, eps, schedule.weight(t));
  return r;
}

}  // namespace semsds
