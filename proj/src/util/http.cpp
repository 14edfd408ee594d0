#include "semsds/util/http.hpp"

#include "semsds/error.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <cstring>
#include <thread>

namespace semsds {

JsonHttpClient::JsonHttpClient(std::string base_url, HttpClientOptions options)
    : base_url_(std::move(base_url)), options_(std::move(options)) {
  std::string rest = base_url_;
  const std::string scheme = "http://";
  if (rest.rfind(scheme, 0) != 0) {
    throw_error(ErrorKind::Configuration, "only http:// endpoints are supported: " + base_url_);
  }
  rest = rest.substr(scheme.size());
  const auto slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  if (slash != std::string::npos) prefix_ = rest.substr(slash);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  const auto colon = authority.rfind(':');
  host_ = authority.substr(0, colon);
  if (colon != std::string::npos) {
    try {
      port_ = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw_error(ErrorKind::Configuration, "bad port in endpoint: " + base_url_);
    }
  }
  if (host_.empty()) throw_error(ErrorKind::Configuration, "missing host in endpoint: " + base_url_);
  if (options_.retries < 1) options_.retries = 1;
}

nlohmann::json JsonHttpClient::get(const std::string& path) const {
  return request("GET", path, nullptr);
}

nlohmann::json JsonHttpClient::post(const std::string& path, const nlohmann::json& body) const {
  return request("POST", path, &body);
}

nlohmann::json JsonHttpClient::request(const std::string& method, const std::string& path,
                                       const nlohmann::json* body) const {
  const std::string full = prefix_ + path;
  const std::string payload = body ? body->dump() : std::string();
  std::string last_error;
  auto delay = options_.backoff;
  for (int attempt = 1; attempt <= options_.retries; ++attempt) {
    httplib::Client client(host_, port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!options_.bearer_token.empty()) {
      headers.emplace("Authorization", "Bearer " + options_.bearer_token);
    }
    auto res = method == "GET" ? client.Get(full, headers)
                               : client.Post(full, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw_error(ErrorKind::InvalidInput,
                    method + " " + full + ": malformed JSON response: " + e.what());
      }
    } else if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
    } else {
      throw_error(ErrorKind::InvalidInput, method + " " + full + " returned HTTP " +
                                               std::to_string(res->status) + ": " + res->body);
    }
    if (attempt < options_.retries) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw TransportError(method + " " + base_url_ + path + " failed after " +
                           std::to_string(options_.retries) + " attempts: " + last_error,
                       options_.retries);
}

std::string encode_f32_base64(const float* values, std::size_t count) {
  const std::size_t bytes = count * sizeof(float);
  std::string out(4 * ((bytes + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(values),
                                static_cast<int>(bytes));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<float> decode_f32_base64(const std::string& text) {
  if (text.size() % 4 != 0) throw_error(ErrorKind::InvalidInput, "base64 length not a multiple of 4");
  std::string raw(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(raw.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw_error(ErrorKind::InvalidInput, "invalid base64 payload");
  // EVP_DecodeBlock does not strip padding.
  std::size_t len = static_cast<std::size_t>(n);
  for (std::size_t i = text.size(); i > 0 && text[i - 1] == '='; --i) --len;
  if (len % sizeof(float) != 0) throw_error(ErrorKind::InvalidInput, "payload is not float32 data");
  std::vector<float> out(len / sizeof(float));
  std::memcpy(out.data(), raw.data(), len);
  return out;
}

}  // namespace semsds
