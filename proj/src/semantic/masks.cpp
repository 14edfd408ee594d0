#include "semsds/semantic/masks.hpp"

#include "semsds/error.hpp"

#include <algorithm>
#include <cmath>

namespace semsds {

SubpromptSet::SubpromptSet(double tau) : tau_(tau) {}

void SubpromptSet::add(RegionId id, std::string text, std::vector<double> embedding) {
  if (index_of(id) >= 0) {
    throw_error(ErrorKind::InvalidInput, "duplicate subprompt for object " +
                                             std::to_string(id.object) + " region " +
                                             std::to_string(id.region));
  }
  if (!entries_.empty() && int(embedding.size()) != dim()) {
    throw_error(ErrorKind::InvalidInput, "subprompt embedding dimension mismatch");
  }
  double n = 0.0;
  for (double v : embedding) n += v * v;
  n = std::sqrt(n);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw_error(ErrorKind::InvalidInput, "subprompt embedding has zero or non-finite norm");
  }
  for (double& v : embedding) v /= n;
  entries_.push_back({id, std::move(text), std::move(embedding)});
}

int SubpromptSet::index_of(const RegionId& id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

MatrixXfR decode_map(const std::vector<double>& features, int feature_dim,
                     const EmbeddingCodec& codec) {
  if (feature_dim != codec.feature_dim() || feature_dim <= 0 ||
      features.size() % std::size_t(feature_dim) != 0) {
    throw_error(ErrorKind::InvalidInput, "feature map does not match the codec feature dimension");
  }
  const Eigen::Index rows = Eigen::Index(features.size() / std::size_t(feature_dim));
  MatrixXfR f(rows, feature_dim);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = static_cast<float>(features[std::size_t(i)]);
  return codec.decode(f);
}

Eigen::MatrixXd probabilities(const MatrixXfR& semantic, const SubpromptSet& prompts) {
  if (!(prompts.tau() > 0.0)) throw_error(ErrorKind::InvalidParameter, "temperature must be positive");
  if (prompts.empty()) throw_error(ErrorKind::InvalidInput, "no subprompts");
  if (semantic.cols() != prompts.dim()) {
    throw_error(ErrorKind::InvalidInput, "semantic map dimension does not match the subprompts");
  }
  const Eigen::Index n = Eigen::Index(prompts.size());
  Eigen::MatrixXd q(prompts.dim(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    q.col(j) = Eigen::Map<const Eigen::VectorXd>(prompts[std::size_t(j)].embedding.data(), prompts.dim());
  }
  const Eigen::MatrixXd s = semantic.cast<double>();
  const Eigen::MatrixXd dots = s * q;
  const Eigen::VectorXd norms = s.rowwise().norm();
  Eigen::MatrixXd p(s.rows(), n);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double inv = norms(i) > 0.0 ? 1.0 / norms(i) : 0.0;
    const Eigen::RowVectorXd logits = dots.row(i) * (inv / prompts.tau());
    const double m = logits.maxCoeff();
    const Eigen::RowVectorXd e = (logits.array() - m).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

bool MaskSet::is_partition() const {
  const std::size_t pixels = std::size_t(width) * std::size_t(height);
  if (background.size() != pixels) return false;
  for (const auto& m : raw) {
    if (m.size() != pixels) return false;
  }
  for (std::size_t v = 0; v < pixels; ++v) {
    int sum = background[v];
    for (const auto& m : raw) sum += m[v];
    if (sum != 1) return false;
  }
  return true;
}

std::size_t MaskSet::pixel_count(int subprompt) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), subprompt));
}

MaskSet masks_from_labels(std::vector<int> labels, int width, int height,
                          const std::vector<RegionId>& ids) {
  const std::size_t pixels = std::size_t(width) * std::size_t(height);
  if (labels.size() != pixels) throw_error(ErrorKind::InvalidInput, "label map size mismatch");
  MaskSet m;
  m.width = width;
  m.height = height;
  m.ids = ids;
  m.raw.assign(ids.size(), std::vector<std::uint8_t>(pixels, 0));
  m.background.assign(pixels, 0);
  for (std::size_t v = 0; v < pixels; ++v) {
    const int l = labels[v];
    if (l < 0) {
      m.background[v] = 1;
    } else if (l < int(ids.size())) {
      m.raw[std::size_t(l)][v] = 1;
    } else {
      throw_error(ErrorKind::InvalidInput, "label out of range");
    }
  }
  m.labels = std::move(labels);
  return m;
}

MaskSet masks(const Eigen::MatrixXd& probabilities, int width, int height,
              const std::vector<RegionId>& ids) {
  if (probabilities.rows() != Eigen::Index(width) * height ||
      probabilities.cols() != Eigen::Index(ids.size()) || ids.empty()) {
    throw_error(ErrorKind::InvalidInput, "probability map shape mismatch");
  }
  std::vector<int> labels(std::size_t(probabilities.rows()));
  for (Eigen::Index v = 0; v < probabilities.rows(); ++v) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < probabilities.cols(); ++j) {
      if (probabilities(v, j) > probabilities(v, best)) best = j;
    }
    labels[std::size_t(v)] = int(best);
  }
  return masks_from_labels(std::move(labels), width, height, ids);
}

std::vector<std::uint8_t> pool_binary(const std::vector<std::uint8_t>& mask, int width, int height,
                                      int stride, int dilation) {
  if (stride <= 0 || dilation <= 0 || dilation % 2 == 0) {
    throw_error(ErrorKind::InvalidParameter, "pool stride must be positive and dilation odd");
  }
  if (width % stride != 0 || height % stride != 0) {
    throw_error(ErrorKind::InvalidInput, "mask size " + std::to_string(width) + "x" +
                                             std::to_string(height) +
                                             " is not divisible by pooling stride " +
                                             std::to_string(stride));
  }
  const int pw = width / stride, ph = height / stride;
  std::vector<std::uint8_t> coarse(std::size_t(pw) * std::size_t(ph), 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (mask[std::size_t(y) * std::size_t(width) + std::size_t(x)]) {
        coarse[std::size_t(y / stride) * std::size_t(pw) + std::size_t(x / stride)] = 1;
      }
    }
  }
  // Separable max pool.
  const int r = dilation / 2;
  std::vector<std::uint8_t> rows(coarse.size(), 0), out(coarse.size(), 0);
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      std::uint8_t v = 0;
      for (int dx = std::max(0, x - r); dx <= std::min(pw - 1, x + r); ++dx) {
        v |= coarse[std::size_t(y) * std::size_t(pw) + std::size_t(dx)];
      }
      rows[std::size_t(y) * std::size_t(pw) + std::size_t(x)] = v;
    }
  }
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      std::uint8_t v = 0;
      for (int dy = std::max(0, y - r); dy <= std::min(ph - 1, y + r); ++dy) {
        v |= rows[std::size_t(dy) * std::size_t(pw) + std::size_t(x)];
      }
      out[std::size_t(y) * std::size_t(pw) + std::size_t(x)] = v;
    }
  }
  return out;
}

void pool_masks(MaskSet& m, int stride, int dilation) {
  m.pooled.clear();
  for (const auto& raw : m.raw) m.pooled.push_back(pool_binary(raw, m.width, m.height, stride, dilation));
  // Only subprompt masks are dilated; a dilated null mask would pull object
  // edges toward the scene-level score.
  m.pooled_background = pool_binary(m.background, m.width, m.height, stride, 1);
  m.pooled_width = m.width / stride;
  m.pooled_height = m.height / stride;
}

MaskSet segment(const RenderOutput& render, const EmbeddingCodec& codec,
                const SubpromptSet& prompts, const SegmentOptions& options) {
  const std::size_t pixels = render.pixel_count();
  const int d_f = render.feature_dim;
  if (render.semantic.size() != pixels * std::size_t(d_f)) {
    throw_error(ErrorKind::InvalidInput, "render has no semantic map");
  }
  std::vector<std::size_t> fg;
  for (std::size_t v = 0; v < pixels; ++v) {
    if (render.alpha[v] >= options.background_alpha) fg.push_back(v);
  }
  std::vector<int> labels(pixels, -1);
  std::vector<RegionId> ids;
  for (const auto& s : prompts.entries()) ids.push_back(s.id);
  if (!fg.empty()) {
    if (prompts.empty()) throw_error(ErrorKind::InvalidInput, "no subprompts");
    if (codec.input_dim() != prompts.dim()) {
      throw_error(ErrorKind::InvalidInput, "codec output dimension does not match the subprompts");
    }
    if (d_f != codec.feature_dim()) {
      throw_error(ErrorKind::InvalidInput, "feature map does not match the codec feature dimension");
    }
    // argmax_j cos(q_j, S) = argmax_j S . q_j since |S| is shared by the row.
    // The affine output layer folds into the projections: S . Q = h W Q + b Q,
    // so the d_h-dimensional decoded map is never materialized.
    const auto& layers = codec.layers();
    const auto& out_layer = layers.back();
    const Eigen::Index n = Eigen::Index(prompts.size());
    Eigen::MatrixXf q(prompts.dim(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (int c = 0; c < prompts.dim(); ++c) q(c, j) = float(prompts[std::size_t(j)].embedding[std::size_t(c)]);
    }
    const Eigen::MatrixXf wq = out_layer.weight * q;
    const Eigen::RowVectorXf bq = out_layer.bias * q;
    MatrixXfR h(Eigen::Index(fg.size()), d_f);
    for (std::size_t i = 0; i < fg.size(); ++i) {
      for (int c = 0; c < d_f; ++c) h(Eigen::Index(i), c) = float(render.semantic[fg[i] * std::size_t(d_f) + std::size_t(c)]);
    }
    for (std::size_t l = layers.size() / 2; l + 1 < layers.size(); ++l) {
      MatrixXfR z = h * layers[l].weight;
      z.rowwise() += layers[l].bias;
      h = z.array().tanh();
    }
    Eigen::MatrixXf dots = h * wq;
    dots.rowwise() += bq;
    for (std::size_t i = 0; i < fg.size(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < n; ++j) {
        if (dots(Eigen::Index(i), j) > dots(Eigen::Index(i), best)) best = j;
      }
      labels[fg[i]] = int(best);
    }
  }
  return masks_from_labels(std::move(labels), render.width, render.height, ids);
}

}  // namespace semsds
