#pragma once

#include "semsds/guidance/oracle.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace semsds {

/// One subprompt with its view descriptor and its mask on the oracle grid.
struct ScoreTerm {
  std::string prompt;
  std::string view_descriptor;
  const std::vector<std::uint8_t>* mask = nullptr;  // height x width cells
};

struct ComposedScore {
  Tensor epsilon;
  std::vector<int> used;  // indices of terms that were queried
  int oracle_calls = 0;
};

/// Region-wise composition of per-subprompt predictions. Each cell takes the
/// mean of the predictions whose mask covers it, accumulated as a running
/// mean in term order, so a partition gives the masked sum exactly and
/// agreeing predictions compose to themselves bit for bit. Terms with empty
/// masks are not queried. Throws InvalidInput on a shape mismatch or an
/// uncovered cell.
ComposedScore compose_scores(const Tensor& x_t, const std::vector<ScoreTerm>& terms,
                             GuidanceOracle& oracle, int t);

struct SdsResult {
  Tensor grad;  // dL/dx = w(t) (eps_hat - eps)
  Tensor x_t;
  ComposedScore score;
  /// Mean squared residual |eps_hat - eps|^2, a loss proxy for logging.
  double residual = 0.0;
};

SdsResult semantic_sds_grad(const Tensor& x, const std::vector<ScoreTerm>& terms,
                            GuidanceOracle& oracle, const NoiseSchedule& schedule, int t,
                            const Tensor& eps);

/// Single-prompt SDS, implemented without masks.
SdsResult plain_sds_grad(const Tensor& x, const std::string& prompt,
                         const std::string& view_descriptor, GuidanceOracle& oracle,
                         const NoiseSchedule& schedule, int t, const Tensor& eps);

}  // namespace semsds
