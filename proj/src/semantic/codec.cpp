#include "semsds/semantic/codec.hpp"

#include "semsds/error.hpp"
#include "semsds/util/binary_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace semsds {

namespace {

bool has_activation(std::size_t layer) { return layer != 2 && layer != 5; }

MatrixXfR to_matrix(const std::vector<std::vector<double>>& rows, int dim) {
  MatrixXfR m(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != dim) {
      throw_error(ErrorKind::InvalidInput, "embedding dimension mismatch: got " +
                                               std::to_string(rows[i].size()) + ", expected " +
                                               std::to_string(dim));
    }
    for (int j = 0; j < dim; ++j) m(Eigen::Index(i), j) = static_cast<float>(rows[i][std::size_t(j)]);
  }
  return m;
}

struct LossResult {
  double value = 0.0;
  MatrixXfR grad;  // dL/doutput
};

// L1 / N + symmetric cross-entropy over cos(out_i, target_j) / tau.
LossResult reconstruction_loss(const MatrixXfR& out, const MatrixXfR& target, double tau) {
  const Eigen::Index n = out.rows();
  LossResult r;
  const MatrixXfR diff = out - target;
  r.value = double(diff.cwiseAbs().sum()) / double(n);
  r.grad = diff.unaryExpr([](float v) { return v > 0.f ? 1.f : (v < 0.f ? -1.f : 0.f); }) / float(n);

  Eigen::MatrixXd a = out.cast<double>();
  Eigen::MatrixXd b = target.cast<double>();
  const Eigen::VectorXd an = a.rowwise().norm().cwiseMax(1e-12);
  const Eigen::VectorXd bn = b.rowwise().norm().cwiseMax(1e-12);
  const Eigen::MatrixXd ah = an.cwiseInverse().asDiagonal() * a;
  const Eigen::MatrixXd bh = bn.cwiseInverse().asDiagonal() * b;
  const Eigen::MatrixXd logits = (ah * bh.transpose()) / tau;

  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(n, n);
  double ce_rows = 0.0, ce_cols = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    const double s = e.sum();
    ce_rows += -(logits(i, i) - m - std::log(s));
    d_logits.row(i) += e / s;
    d_logits(i, i) -= 1.0;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double m = logits.col(j).maxCoeff();
    const Eigen::VectorXd e = (logits.col(j).array() - m).exp();
    const double s = e.sum();
    ce_cols += -(logits(j, j) - m - std::log(s));
    d_logits.col(j) += e / s;
    d_logits(j, j) -= 1.0;
  }
  r.value += 0.5 * (ce_rows + ce_cols) / double(n);
  d_logits *= 0.5 / (double(n) * tau);

  const Eigen::MatrixXd d_ah = d_logits * bh;
  Eigen::MatrixXd d_a(n, a.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double proj = d_ah.row(i).dot(ah.row(i));
    d_a.row(i) = (d_ah.row(i) - proj * ah.row(i)) / an(i);
  }
  r.grad += d_a.cast<float>();
  return r;
}

}  // namespace

EmbeddingCodec::EmbeddingCodec(int d_h, int d_f, std::uint64_t seed, int hidden)
    : d_h_(d_h), d_f_(d_f), hidden_(hidden) {
  if (d_h <= 0 || d_f <= 0 || hidden <= 0) {
    throw_error(ErrorKind::InvalidParameter, "codec dimensions must be positive");
  }
  const int dims[7] = {d_h, hidden, hidden, d_f, hidden, hidden, d_h};
  std::mt19937_64 rng(seed);
  for (int l = 0; l < 6; ++l) {
    Layer layer;
    layer.weight.resize(dims[l], dims[l + 1]);
    layer.bias = Eigen::RowVectorXf::Zero(dims[l + 1]);
    const double limit = std::sqrt(6.0 / double(dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = static_cast<float>(u(rng));
    }
    layers_.push_back(std::move(layer));
  }
}

MatrixXfR EmbeddingCodec::run(const MatrixXfR& x, std::size_t first, std::size_t last) const {
  MatrixXfR a = x;
  for (std::size_t l = first; l < last; ++l) {
    MatrixXfR z = a * layers_[l].weight;
    z.rowwise() += layers_[l].bias;
    if (has_activation(l)) z = z.array().tanh();
    a = std::move(z);
  }
  return a;
}

MatrixXfR EmbeddingCodec::encode(const MatrixXfR& h) const {
  if (h.cols() != d_h_) throw_error(ErrorKind::InvalidInput, "encode: input dimension mismatch");
  return run(h, 0, 3);
}

MatrixXfR EmbeddingCodec::decode(const MatrixXfR& f) const {
  if (f.cols() != d_f_) throw_error(ErrorKind::InvalidInput, "decode: feature dimension mismatch");
  return run(f, 3, 6);
}

std::vector<double> EmbeddingCodec::encode(const std::vector<double>& h) const {
  const MatrixXfR out = encode(to_matrix({h}, d_h_));
  return {out.data(), out.data() + out.size()};
}

std::vector<double> EmbeddingCodec::decode(const std::vector<double>& f) const {
  const MatrixXfR out = decode(to_matrix({f}, d_f_));
  return {out.data(), out.data() + out.size()};
}

void EmbeddingCodec::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(ErrorKind::Io, "cannot write " + path.string());
  binio::write_magic(out, "AEC1");
  binio::write<std::uint32_t>(out, std::uint32_t(d_h_));
  binio::write<std::uint32_t>(out, std::uint32_t(d_f_));
  binio::write<std::uint32_t>(out, std::uint32_t(hidden_));
  binio::write<std::uint32_t>(out, std::uint32_t(layers_.size()));
  for (const auto& layer : layers_) {
    binio::write<std::uint32_t>(out, std::uint32_t(layer.weight.rows()));
    binio::write<std::uint32_t>(out, std::uint32_t(layer.weight.cols()));
    out.write(reinterpret_cast<const char*>(layer.weight.data()),
              std::streamsize(layer.weight.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(layer.bias.data()),
              std::streamsize(layer.bias.size() * sizeof(float)));
  }
  binio::write<double>(out, final_loss);
  binio::write<std::uint32_t>(out, std::uint32_t(loss_history.size()));
  for (double v : loss_history) binio::write<double>(out, v);
  if (!out) throw_error(ErrorKind::Io, "failed writing " + path.string());
}

EmbeddingCodec EmbeddingCodec::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorKind::Io, "cannot open codec checkpoint " + path.string());
  if (!binio::read_magic(in, "AEC1")) {
    throw_error(ErrorKind::InvalidInput, path.string() + " is not a codec checkpoint");
  }
  EmbeddingCodec c;
  c.d_h_ = int(binio::read<std::uint32_t>(in));
  c.d_f_ = int(binio::read<std::uint32_t>(in));
  c.hidden_ = int(binio::read<std::uint32_t>(in));
  const auto count = binio::read<std::uint32_t>(in);
  const int dims[7] = {c.d_h_, c.hidden_, c.hidden_, c.d_f_, c.hidden_, c.hidden_, c.d_h_};
  if (count != 6) throw_error(ErrorKind::InvalidInput, "codec checkpoint must have 6 layers");
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto rows = binio::read<std::uint32_t>(in);
    const auto cols = binio::read<std::uint32_t>(in);
    if (!in || int(rows) != dims[l] || int(cols) != dims[l + 1]) {
      throw_error(ErrorKind::InvalidInput, "codec checkpoint layer shapes are inconsistent");
    }
    Layer layer;
    layer.weight.resize(rows, cols);
    layer.bias.resize(cols);
    in.read(reinterpret_cast<char*>(layer.weight.data()), std::streamsize(layer.weight.size() * sizeof(float)));
    in.read(reinterpret_cast<char*>(layer.bias.data()), std::streamsize(layer.bias.size() * sizeof(float)));
    c.layers_.push_back(std::move(layer));
  }
  c.final_loss = binio::read<double>(in);
  const auto n = binio::read<std::uint32_t>(in);
  if (!in || n > (1u << 24)) throw_error(ErrorKind::InvalidInput, "truncated codec checkpoint");
  c.loss_history.resize(n);
  for (auto& v : c.loss_history) v = binio::read<double>(in);
  if (!in) throw_error(ErrorKind::InvalidInput, "truncated codec checkpoint");
  return c;
}

double codec_loss(const EmbeddingCodec& codec, const std::vector<std::vector<double>>& embeddings,
                  double tau) {
  const MatrixXfR h = to_matrix(embeddings, codec.input_dim());
  return reconstruction_loss(codec.decode(codec.encode(h)), h, tau).value;
}

EmbeddingCodec train_codec(const std::vector<std::vector<double>>& embeddings,
                           const CodecTrainOptions& options) {
  if (embeddings.size() < 2) {
    throw_error(ErrorKind::InvalidInput, "codec training needs at least 2 embeddings");
  }
  if (options.epochs < 0 || options.learning_rate <= 0.0 || options.tau <= 0.0 ||
      options.checkpoint_every <= 0) {
    throw_error(ErrorKind::InvalidParameter, "invalid codec training options");
  }
  const int d_h = static_cast<int>(embeddings.front().size());
  const MatrixXfR h = to_matrix(embeddings, d_h);
  EmbeddingCodec codec(d_h, options.feature_dim, options.seed, options.hidden);
  auto& layers = codec.layers();
  const std::size_t L = layers.size();

  struct Moments {
    MatrixXfR mw, vw;
    Eigen::RowVectorXf mb, vb;
  };
  std::vector<Moments> moments(L);
  for (std::size_t l = 0; l < L; ++l) {
    moments[l].mw = MatrixXfR::Zero(layers[l].weight.rows(), layers[l].weight.cols());
    moments[l].vw = moments[l].mw;
    moments[l].mb = Eigen::RowVectorXf::Zero(layers[l].bias.size());
    moments[l].vb = moments[l].mb;
  }
  const float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;

  std::vector<MatrixXfR> acts(L + 1);
  for (int epoch = 0; epoch <= options.epochs; ++epoch) {
    acts[0] = h;
    for (std::size_t l = 0; l < L; ++l) {
      MatrixXfR z = acts[l] * layers[l].weight;
      z.rowwise() += layers[l].bias;
      if (has_activation(l)) z = z.array().tanh();
      acts[l + 1] = std::move(z);
    }
    LossResult loss = reconstruction_loss(acts[L], h, options.tau);
    codec.final_loss = loss.value;
    if (epoch % options.checkpoint_every == 0 || epoch == options.epochs) {
      codec.loss_history.push_back(loss.value);
    }
    if (epoch == options.epochs) break;

    const double progress = double(epoch) / double(std::max(options.epochs, 1));
    const float lr = static_cast<float>(
        options.learning_rate * (0.01 + 0.99 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress))));
    const float t = float(epoch + 1);
    const float c1 = 1.f - std::pow(beta1, t), c2 = 1.f - std::pow(beta2, t);

    MatrixXfR delta = std::move(loss.grad);
    for (std::size_t l = L; l-- > 0;) {
      if (has_activation(l)) delta.array() *= 1.f - acts[l + 1].array().square();
      const MatrixXfR gw = acts[l].transpose() * delta;
      const Eigen::RowVectorXf gb = delta.colwise().sum();
      if (l > 0) delta = delta * layers[l].weight.transpose();
      auto& m = moments[l];
      m.mw = beta1 * m.mw + (1.f - beta1) * gw;
      m.vw = beta2 * m.vw + (1.f - beta2) * gw.cwiseAbs2();
      m.mb = beta1 * m.mb + (1.f - beta1) * gb;
      m.vb = beta2 * m.vb + (1.f - beta2) * gb.cwiseAbs2();
      layers[l].weight.array() -=
          lr * (m.mw.array() / c1) / ((m.vw.array() / c2).sqrt() + eps);
      layers[l].bias.array() -= lr * (m.mb.array() / c1) / ((m.vb.array() / c2).sqrt() + eps);
    }
  }
  return codec;
}

}  // namespace semsds
