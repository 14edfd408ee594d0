#include "semsds/semantic/embedding.hpp"

#include "semsds/error.hpp"
#include "semsds/util/binary_io.hpp"

#include <nlohmann/json.hpp>
#include <openssl/sha.h>

#include <cmath>
#include <cstring>
#include <fstream>

namespace semsds {

namespace {

std::vector<double> normalized(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw_error(ErrorKind::InvalidInput, "embedding has zero or non-finite norm");
  }
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

PseudoEmbeddingProvider::PseudoEmbeddingProvider(int dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim <= 0) throw_error(ErrorKind::InvalidParameter, "embedding dimension must be positive");
}

std::vector<double> PseudoEmbeddingProvider::encode(const std::string& text) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(dim_));
  for (int block = 0; static_cast<int>(out.size()) < dim_; ++block) {
    const std::string msg = std::to_string(seed_) + ":" + std::to_string(block) + ":" + text;
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(msg.data()), msg.size(), digest);
    for (int w = 0; w < 8 && static_cast<int>(out.size()) < dim_; ++w) {
      const std::uint32_t u = std::uint32_t(digest[4 * w]) | std::uint32_t(digest[4 * w + 1]) << 8 |
                              std::uint32_t(digest[4 * w + 2]) << 16 |
                              std::uint32_t(digest[4 * w + 3]) << 24;
      out.push_back(double(u) / 4294967296.0 * 2.0 - 1.0);
    }
  }
  return normalized(std::move(out));
}

FileEmbeddingProvider::FileEmbeddingProvider(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorKind::Io, "cannot open embedding table " + path.string());
  if (!binio::read_magic(in, "EMB1")) {
    throw_error(ErrorKind::InvalidInput, path.string() + " is not an embedding table");
  }
  const auto header_len = binio::read<std::uint32_t>(in);
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw_error(ErrorKind::InvalidInput, "truncated embedding table header");
  const std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  const std::size_t floats = payload.size() / sizeof(float);
  try {
    const auto j = nlohmann::json::parse(header);
    dim_ = j.at("d_h").get<int>();
    if (dim_ <= 0) throw_error(ErrorKind::InvalidInput, "embedding table d_h must be positive");
    for (const auto& e : j.at("entries")) {
      const auto offset = e.at("offset").get<std::size_t>();
      if (offset + std::size_t(dim_) > floats) {
        throw_error(ErrorKind::InvalidInput, "embedding table entry out of range");
      }
      std::vector<double> v(static_cast<std::size_t>(dim_));
      for (int i = 0; i < dim_; ++i) {
        float f;
        std::memcpy(&f, payload.data() + (offset + std::size_t(i)) * sizeof(float), sizeof(float));
        v[std::size_t(i)] = f;
      }
      table_[e.at("text").get<std::string>()] = std::move(v);
    }
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorKind::InvalidInput, std::string("bad embedding table header: ") + e.what());
  }
}

std::vector<double> FileEmbeddingProvider::encode(const std::string& text) {
  const auto it = table_.find(text);
  if (it == table_.end()) throw_error(ErrorKind::NotFound, "no embedding for \"" + text + "\"");
  return it->second;
}

void write_embedding_table(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::vector<double>>>& entries) {
  if (entries.empty()) throw_error(ErrorKind::InvalidInput, "embedding table needs entries");
  const std::size_t dim = entries.front().second.size();
  nlohmann::json header{{"d_h", dim}, {"entries", nlohmann::json::array()}};
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].second.size() != dim) {
      throw_error(ErrorKind::InvalidInput, "embedding table rows differ in dimension");
    }
    header["entries"].push_back({{"text", entries[i].first}, {"offset", i * dim}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(ErrorKind::Io, "cannot write " + path.string());
  const std::string h = header.dump();
  binio::write_magic(out, "EMB1");
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(h.size()));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [text, v] : entries) {
    for (double x : v) binio::write<float>(out, static_cast<float>(x));
  }
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string base_url, HttpClientOptions options)
    : client_(std::move(base_url), std::move(options)) {}

int RemoteEmbeddingProvider::dim() const {
  if (dim_ == 0) {
    const auto health = client_.get("/v1/health");
    if (!health.value("ok", false)) {
      throw_error(ErrorKind::InvalidState, "guidance service at " + client_.base_url() + " is not ready");
    }
    dim_ = health.at("d_h").get<int>();
    if (dim_ <= 0) throw_error(ErrorKind::InvalidInput, "service reported non-positive d_h");
  }
  return dim_;
}

std::vector<double> RemoteEmbeddingProvider::encode(const std::string& text) {
  if (text.empty()) throw_error(ErrorKind::InvalidInput, "cannot encode empty text");
  if (const auto it = cache_.find(text); it != cache_.end()) return it->second;
  const int expected = dim();
  const auto res = client_.post("/v1/encode_text", {{"text", text}});
  std::vector<double> v;
  try {
    v = res.at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorKind::InvalidInput, std::string("bad encode_text response: ") + e.what());
  }
  if (static_cast<int>(v.size()) != expected) {
    throw_error(ErrorKind::InvalidInput, "encode_text returned " + std::to_string(v.size()) +
                                             " values, expected " + std::to_string(expected));
  }
  v = normalized(std::move(v));
  cache_[text] = v;
  return v;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& config) {
  if (config.kind == "pseudo") return std::make_unique<PseudoEmbeddingProvider>(config.dim, config.seed);
  if (config.kind == "file") return std::make_unique<FileEmbeddingProvider>(config.path);
  if (config.kind == "remote") {
    if (config.url.empty()) throw_error(ErrorKind::Configuration, "remote embeddings need a url");
    return std::make_unique<RemoteEmbeddingProvider>(config.url);
  }
  throw_error(ErrorKind::Configuration, "unknown embedding provider \"" + config.kind + "\"");
}

}  // namespace semsds
