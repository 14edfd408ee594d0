#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace semsds {

using MatrixXfR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Autoencoder compressing d_h-dimensional text embeddings to d_f features.
/// Encoder: d_h -> hidden -> hidden -> d_f, decoder mirrored; tanh between
/// layers, affine outputs. Batches are row-per-sample.
class EmbeddingCodec {
 public:
  struct Layer {
    MatrixXfR weight;                // in x out
    Eigen::RowVectorXf bias;         // out
  };

  EmbeddingCodec() = default;
  /// Xavier-uniform weights, zero biases.
  EmbeddingCodec(int d_h, int d_f, std::uint64_t seed, int hidden = 256);

  int input_dim() const { return d_h_; }
  int feature_dim() const { return d_f_; }
  int hidden_dim() const { return hidden_; }

  MatrixXfR encode(const MatrixXfR& h) const;
  MatrixXfR decode(const MatrixXfR& f) const;
  std::vector<double> encode(const std::vector<double>& h) const;
  std::vector<double> decode(const std::vector<double>& f) const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  double final_loss = 0.0;
  std::vector<double> loss_history;  // one value per evaluation checkpoint

  /// Binary checkpoint: "AEC1", u32 d_h, d_f, hidden, layer count, then per
  /// layer u32 rows, cols, f32 weights (row-major) and f32 biases; then f64
  /// final loss, u32 history length and f64 history.
  void save(const std::filesystem::path& path) const;
  static EmbeddingCodec load(const std::filesystem::path& path);

 private:
  MatrixXfR run(const MatrixXfR& x, std::size_t first, std::size_t last) const;

  int d_h_ = 0;
  int d_f_ = 0;
  int hidden_ = 0;
  std::vector<Layer> layers_;  // 0-2 encoder, 3-5 decoder
};

struct CodecTrainOptions {
  int feature_dim = 16;
  int hidden = 256;
  int epochs = 1500;
  double learning_rate = 1e-3;
  double tau = 0.01;  // similarity temperature of the cross-entropy term
  int checkpoint_every = 50;
  std::uint64_t seed = 0;
};

/// Full-batch Adam on sum_i |D(E(h_i)) - h_i|_1 / N plus the symmetric
/// cross-entropy of the batch cosine-similarity matrix (logits cos / tau,
/// identity targets). The learning rate follows a cosine decay to 1% so the
/// L1 term settles. Deterministic for a given seed.
EmbeddingCodec train_codec(const std::vector<std::vector<double>>& embeddings,
                           const CodecTrainOptions& options = {});

/// Loss of the codec on a batch, as minimized by train_codec.
double codec_loss(const EmbeddingCodec& codec, const std::vector<std::vector<double>>& embeddings,
                  double tau);

}  // namespace semsds
