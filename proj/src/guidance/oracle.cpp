#include "semsds/guidance/oracle.hpp"

#include "semsds/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>

namespace semsds {

namespace {

std::string shape_str(const Tensor& t) {
  return std::to_string(t.channels) + "x" + std::to_string(t.height) + "x" + std::to_string(t.width);
}

void check_space(const Tensor& x, const OracleSpace& s, const char* what) {
  if (x.channels != s.channels || x.height != s.height || x.width != s.width) {
    throw_error(ErrorKind::InvalidInput,
                std::string(what) + " shape " + shape_str(x) + " does not match the oracle space " +
                    std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
                    std::to_string(s.width));
  }
}

}  // namespace

AnalyticOracle::AnalyticOracle(NoiseSchedule schedule, OracleSpace space)
    : schedule_(std::move(schedule)), space_(space) {
  if (space.channels < 1 || space.height < 1 || space.width < 1) {
    throw_error(ErrorKind::InvalidParameter, "oracle space must be non-empty");
  }
}

void AnalyticOracle::set_target(const std::string& prompt, Tensor target) {
  check_space(target, space_, "target");
  targets_[prompt] = std::move(target);
}

void AnalyticOracle::set_target_color(const std::string& prompt, const std::vector<double>& color) {
  if (int(color.size()) != space_.channels) {
    throw_error(ErrorKind::InvalidInput, "target color needs one value per oracle channel");
  }
  Tensor t(space_.channels, space_.height, space_.width);
  for (int c = 0; c < t.channels; ++c) {
    for (std::size_t i = 0; i < t.plane(); ++i) t.data[std::size_t(c) * t.plane() + i] = color[c];
  }
  targets_[prompt] = std::move(t);
}

Tensor AnalyticOracle::predict_noise(const Tensor& x_t, const std::string& prompt,
                                     const std::string&, int t) {
  check_space(x_t, space_, "x_t");
  const auto it = targets_.find(prompt);
  if (it == targets_.end()) throw_error(ErrorKind::NotFound, "no analytic target for prompt '" + prompt + "'");
  const double ab = schedule_.alpha_bar(t);
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  Tensor eps = x_t;
  for (std::size_t i = 0; i < eps.size(); ++i) eps.data[i] = (x_t.data[i] - a * it->second.data[i]) / b;
  return eps;
}

nlohmann::json tensor_to_json(const Tensor& tensor) {
  std::vector<float> f(tensor.data.begin(), tensor.data.end());
  return {{"shape", {tensor.channels, tensor.height, tensor.width}},
          {"data", encode_f32_base64(f.data(), f.size())}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
    throw_error(ErrorKind::InvalidInput, "tensor needs 'shape' and 'data'");
  }
  const auto shape = j.at("shape").get<std::vector<int>>();
  if (shape.size() != 3 || shape[0] < 1 || shape[1] < 1 || shape[2] < 1) {
    throw_error(ErrorKind::InvalidInput, "tensor shape must be [C, H, W]");
  }
  const auto values = decode_f32_base64(j.at("data").get<std::string>());
  Tensor t(shape[0], shape[1], shape[2]);
  if (values.size() != t.size()) {
    throw_error(ErrorKind::InvalidInput, "tensor payload has " + std::to_string(values.size()) +
                                             " values, shape needs " + std::to_string(t.size()));
  }
  for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = values[i];
  return t;
}

RemoteOracle::RemoteOracle(std::string base_url, double cfg_scale, HttpClientOptions options)
    : client_(std::move(base_url), options), cfg_scale_(cfg_scale) {}

void RemoteOracle::handshake() const {
  std::lock_guard lock(mutex_);
  if (ready_) return;
  const auto health = client_.get("/v1/health");
  if (!health.value("ok", false)) throw_error(ErrorKind::Transport, "guidance service reports not ready");
  if (!health.contains("latent_hw")) throw_error(ErrorKind::InvalidInput, "health response lacks latent_hw");
  const auto& hw = health.at("latent_hw");
  if (hw.is_array()) {
    space_.height = hw.at(0).get<int>();
    space_.width = hw.at(1).get<int>();
  } else {
    space_.height = space_.width = hw.get<int>();
  }
  space_.channels = health.value("latent_channels", 4);
  model_id_ = health.value("model_id", "");
  if (space_.height < 1 || space_.width < 1 || space_.channels < 1) {
    throw_error(ErrorKind::InvalidInput, "health response declares an empty latent grid");
  }
  ready_ = true;
}

OracleSpace RemoteOracle::space() const {
  handshake();
  return space_;
}

std::string RemoteOracle::model_id() const {
  handshake();
  return model_id_;
}

Tensor RemoteOracle::predict_noise(const Tensor& x_t, const std::string& prompt,
                                   const std::string& view_descriptor, int t) {
  handshake();
  check_space(x_t, space_, "x_t");
  const nlohmann::json body{{"prompt", prompt},
                            {"view_descriptor", view_descriptor},
                            {"t", t},
                            {"x_t", tensor_to_json(x_t)},
                            {"cfg_scale", cfg_scale_}};
  const auto response = client_.post("/v1/predict_noise", body);
  if (!response.contains("epsilon")) throw_error(ErrorKind::InvalidInput, "response lacks 'epsilon'");
  Tensor eps = tensor_from_json(response.at("epsilon"));
  if (!eps.same_shape(x_t)) {
    throw_error(ErrorKind::InvalidInput, "epsilon shape " + shape_str(eps) + " differs from x_t " + shape_str(x_t));
  }
  return eps;
}

RecordedOracle::RecordedOracle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorKind::NotFound, "cannot open oracle recording " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw_error(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    Tensor eps = tensor_from_json(j.at("epsilon"));
    if (calls_.empty()) {
      space_ = {eps.channels, eps.height, eps.width};
    } else if (eps.channels != space_.channels || eps.height != space_.height || eps.width != space_.width) {
      throw_error(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(lineno) + ": inconsistent shape");
    }
    calls_[{j.at("prompt").get<std::string>(), j.value("view_descriptor", ""), j.at("t").get<int>()}]
        .push_back(std::move(eps));
  }
  if (calls_.empty()) throw_error(ErrorKind::InvalidInput, "oracle recording is empty: " + path.string());
}

Tensor RecordedOracle::predict_noise(const Tensor& x_t, const std::string& prompt,
                                     const std::string& view_descriptor, int t) {
  check_space(x_t, space_, "x_t");
  std::lock_guard lock(mutex_);
  const Key key{prompt, view_descriptor, t};
  const auto it = calls_.find(key);
  if (it == calls_.end()) {
    throw_error(ErrorKind::NotFound, "no recorded prediction for '" + prompt + "' / '" + view_descriptor +
                                         "' at t=" + std::to_string(t));
  }
  std::size_t& c = cursor_[key];
  const Tensor& out = it->second[c % it->second.size()];
  ++c;
  return out;
}

RecordingOracle::RecordingOracle(std::shared_ptr<GuidanceOracle> inner, const std::filesystem::path& path)
    : inner_(std::move(inner)), out_(path, std::ios::app) {
  if (!out_) throw_error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
}

Tensor RecordingOracle::predict_noise(const Tensor& x_t, const std::string& prompt,
                                      const std::string& view_descriptor, int t) {
  Tensor eps = inner_->predict_noise(x_t, prompt, view_descriptor, t);
  // Stored at f32 precision; replay returns the rounded values.
  const nlohmann::json j{{"prompt", prompt}, {"view_descriptor", view_descriptor}, {"t", t},
                         {"epsilon", tensor_to_json(eps)}};
  std::lock_guard lock(mutex_);
  out_ << j.dump() << '\n';
  out_.flush();
  return eps;
}

OracleAdapter::OracleAdapter(int image_width, int image_height, int image_channels, OracleSpace space)
    : width_(image_width), height_(image_height), channels_(image_channels), space_(space) {
  if (space.width < 1 || space.height < 1 || image_width % space.width != 0 ||
      image_height % space.height != 0 || image_width / space.width != image_height / space.height) {
    throw_error(ErrorKind::InvalidParameter,
                "render size " + std::to_string(image_width) + "x" + std::to_string(image_height) +
                    " is not an integer multiple of the oracle grid " + std::to_string(space.width) + "x" +
                    std::to_string(space.height));
  }
  stride_ = image_width / space.width;
}

Tensor OracleAdapter::forward(const std::vector<double>& image) const {
  if (image.size() != std::size_t(width_) * height_ * channels_) {
    throw_error(ErrorKind::InvalidInput, "image size does not match the adapter");
  }
  Tensor out(space_.channels, space_.height, space_.width);
  const int shared = std::min(channels_, space_.channels);
  const double inv = 1.0 / double(stride_ * stride_);
  for (int c = 0; c < shared; ++c) {
    for (int y = 0; y < space_.height; ++y) {
      for (int x = 0; x < space_.width; ++x) {
        double s = 0.0;
        for (int dy = 0; dy < stride_; ++dy) {
          for (int dx = 0; dx < stride_; ++dx) {
            const std::size_t p = std::size_t(y * stride_ + dy) * width_ + std::size_t(x * stride_ + dx);
            s += image[p * channels_ + c];
          }
        }
        out.at(c, y, x) = stride_ == 1 ? s : s * inv;
      }
    }
  }
  return out;
}

std::vector<double> OracleAdapter::adjoint(const Tensor& grad) const {
  if (grad.channels != space_.channels || grad.height != space_.height || grad.width != space_.width) {
    throw_error(ErrorKind::InvalidInput, "gradient shape does not match the oracle space");
  }
  std::vector<double> out(std::size_t(width_) * height_ * channels_, 0.0);
  const int shared = std::min(channels_, space_.channels);
  const double inv = 1.0 / double(stride_ * stride_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const std::size_t p = std::size_t(y) * width_ + x;
      for (int c = 0; c < shared; ++c) {
        const double g = grad.at(c, y / stride_, x / stride_);
        out[p * channels_ + c] = stride_ == 1 ? g : g * inv;
      }
    }
  }
  return out;
}

}  // namespace semsds
