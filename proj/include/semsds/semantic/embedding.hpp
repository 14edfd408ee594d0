#pragma once

#include "semsds/util/http.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace semsds {

/// Maps text to a fixed-size embedding vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> encode(const std::string& text) = 0;
  virtual int dim() const = 0;
  virtual std::string kind() const = 0;
};

/// Deterministic unit vector from a seeded SHA-256 expansion of the text.
/// Block b is SHA-256("<seed>:<b>:<text>"); each digest contributes eight
/// little-endian u32 values mapped to u / 2^32 * 2 - 1. The first `dim`
/// values are then normalized.
class PseudoEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit PseudoEmbeddingProvider(int dim = 512, std::uint64_t seed = 0);
  std::vector<double> encode(const std::string& text) override;
  int dim() const override { return dim_; }
  std::string kind() const override { return "pseudo"; }

 private:
  int dim_;
  std::uint64_t seed_;
};

/// Lookup table file: "EMB1", u32 header length, JSON header
/// {"d_h": n, "entries": [{"text": ..., "offset": i}]}, then float32 payload.
/// `offset` counts floats from the start of the payload.
class FileEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(const std::filesystem::path& path);
  std::vector<double> encode(const std::string& text) override;
  int dim() const override { return dim_; }
  std::string kind() const override { return "file"; }

 private:
  int dim_ = 0;
  std::map<std::string, std::vector<double>> table_;
};

void write_embedding_table(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::vector<double>>>& entries);

/// POST /v1/encode_text on the guidance service. The dimension is taken from
/// GET /v1/health on first use and every response is checked against it.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(std::string base_url, HttpClientOptions options = {});
  std::vector<double> encode(const std::string& text) override;
  int dim() const override;
  std::string kind() const override { return "remote"; }

 private:
  JsonHttpClient client_;
  mutable int dim_ = 0;
  std::map<std::string, std::vector<double>> cache_;
};

struct EmbeddingConfig {
  std::string kind = "pseudo";  // pseudo, file, remote
  int dim = 512;
  std::uint64_t seed = 0;
  std::string path;  // file table
  std::string url;   // remote service
};

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& config);

}  // namespace semsds
