#pragma once

#include "semsds/guidance/schedule.hpp"
#include "semsds/guidance/tensor.hpp"
#include "semsds/util/http.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

namespace semsds {

/// Shape of the tensors an oracle operates on.
struct OracleSpace {
  int channels = 3;
  int height = 0;
  int width = 0;
};

/// Noise predictor eps_phi(x_t; prompt + view, t). Implementations must be
/// safe to call from several threads for different prompts.
class GuidanceOracle {
 public:
  virtual ~GuidanceOracle() = default;
  virtual Tensor predict_noise(const Tensor& x_t, const std::string& prompt,
                               const std::string& view_descriptor, int t) = 0;
  virtual OracleSpace space() const = 0;
  virtual std::string kind() const = 0;
};

/// Exact denoiser for a known clean image per prompt:
/// eps = (x_t - sqrt(ab) target) / sqrt(1 - ab). The view descriptor is ignored.
class AnalyticOracle final : public GuidanceOracle {
 public:
  AnalyticOracle(NoiseSchedule schedule, OracleSpace space);

  /// Throws InvalidInput when the shape differs from the declared space.
  void set_target(const std::string& prompt, Tensor target);
  /// Constant-color target.
  void set_target_color(const std::string& prompt, const std::vector<double>& color);
  bool has_target(const std::string& prompt) const { return targets_.count(prompt) > 0; }

  Tensor predict_noise(const Tensor& x_t, const std::string& prompt,
                       const std::string& view_descriptor, int t) override;
  OracleSpace space() const override { return space_; }
  std::string kind() const override { return "analytic"; }

 private:
  NoiseSchedule schedule_;
  OracleSpace space_;
  std::map<std::string, Tensor> targets_;
};

/// Guidance service client. Wire format for tensors:
/// {"shape": [C, H, W], "data": base64 little-endian f32}.
class RemoteOracle final : public GuidanceOracle {
 public:
  RemoteOracle(std::string base_url, double cfg_scale = 7.5, HttpClientOptions options = {});

  Tensor predict_noise(const Tensor& x_t, const std::string& prompt,
                       const std::string& view_descriptor, int t) override;
  /// From GET /v1/health on first use: latent_hw and latent_channels (default 4).
  OracleSpace space() const override;
  std::string kind() const override { return "remote"; }
  std::string model_id() const;

 private:
  void handshake() const;

  JsonHttpClient client_;
  double cfg_scale_;
  mutable std::mutex mutex_;
  mutable bool ready_ = false;
  mutable OracleSpace space_;
  mutable std::string model_id_;
};

nlohmann::json tensor_to_json(const Tensor& tensor);
Tensor tensor_from_json(const nlohmann::json& j);

/// Replays recorded predictions. The fixture is JSON lines, one call each:
/// {"prompt", "view_descriptor", "t", "epsilon": tensor}. Repeated keys are
/// replayed in order and then cycle. Unknown keys throw NotFound.
class RecordedOracle final : public GuidanceOracle {
 public:
  explicit RecordedOracle(const std::filesystem::path& path);

  Tensor predict_noise(const Tensor& x_t, const std::string& prompt,
                       const std::string& view_descriptor, int t) override;
  OracleSpace space() const override { return space_; }
  std::string kind() const override { return "recorded"; }

 private:
  using Key = std::tuple<std::string, std::string, int>;
  std::map<Key, std::vector<Tensor>> calls_;
  std::map<Key, std::size_t> cursor_;
  OracleSpace space_;
  std::mutex mutex_;
};

/// Forwards to another oracle and appends every call to a fixture file that
/// RecordedOracle can replay.
class RecordingOracle final : public GuidanceOracle {
 public:
  RecordingOracle(std::shared_ptr<GuidanceOracle> inner, const std::filesystem::path& path);

  Tensor predict_noise(const Tensor& x_t, const std::string& prompt,
                       const std::string& view_descriptor, int t) override;
  OracleSpace space() const override { return inner_->space(); }
  std::string kind() const override { return inner_->kind(); }

 private:
  std::shared_ptr<GuidanceOracle> inner_;
  std::ofstream out_;
  std::mutex mutex_;
};

/// Maps an H x W x 3 render into an oracle space of H/stride x W/stride cells:
/// stride x stride area average per channel, extra oracle channels zero.
/// `adjoint` is the exact transpose, used to pull gradients back.
class OracleAdapter {
 public:
  OracleAdapter(int image_width, int image_height, int image_channels, OracleSpace space);

  Tensor forward(const std::vector<double>& image) const;
  std::vector<double> adjoint(const Tensor& grad) const;

  int stride() const { return stride_; }
  OracleSpace space() const { return space_; }

 private:
  int width_, height_, channels_;
  OracleSpace space_;
  int stride_ = 1;
};

}  // namespace semsds
