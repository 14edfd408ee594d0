#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <string>

namespace semsds {

/// JSON-over-HTTP client with bounded retries. Connection failures and 5xx
/// responses are retried with exponential backoff; other non-2xx statuses
/// fail immediately with InvalidInput.
struct HttpClientOptions {
  int retries = 3;  // total attempts
  std::chrono::milliseconds backoff{200};
  std::chrono::milliseconds timeout{60000};
  std::string bearer_token;
};

class JsonHttpClient {
 public:
  /// `base_url` is `http://host[:port][/prefix]`. HTTPS is not supported.
  explicit JsonHttpClient(std::string base_url, HttpClientOptions options = {});

  nlohmann::json get(const std::string& path) const;
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  const std::string& base_url() const { return base_url_; }

 private:
  nlohmann::json request(const std::string& method, const std::string& path,
                         const nlohmann::json* body) const;

  std::string base_url_;
  std::string host_;
  int port_ = 80;
  std::string prefix_;
  HttpClientOptions options_;
};

/// Base64 of raw little-endian float32 values.
std::string encode_f32_base64(const float* values, std::size_t count);
std::vector<float> decode_f32_base64(const std::string& text);

}  // namespace semsds
