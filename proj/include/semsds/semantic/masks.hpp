#pragma once

#include "semsds/core/types.hpp"
#include "semsds/render/rasterizer.hpp"
#include "semsds/semantic/codec.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace semsds {

struct Subprompt {
  RegionId id;
  std::string text;
  std::vector<double> embedding;  // unit norm
};

/// Ordered subprompts with their text embeddings and the softmax temperature.
class SubpromptSet {
 public:
  explicit SubpromptSet(double tau = 0.01);

  /// Normalizes `embedding`. Throws on a duplicate id or a dimension change.
  void add(RegionId id, std::string text, std::vector<double> embedding);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Subprompt& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<Subprompt>& entries() const { return entries_; }
  int index_of(const RegionId& id) const;  // -1 if absent
  double tau() const { return tau_; }
  void set_tau(double tau) { tau_ = tau; }
  int dim() const { return entries_.empty() ? 0 : int(entries_.front().embedding.size()); }

 private:
  double tau_;
  std::vector<Subprompt> entries_;
};

/// S(v) = D(F(v)) for every pixel. `features` is pixels x d_f, row-major.
MatrixXfR decode_map(const std::vector<double>& features, int feature_dim,
                     const EmbeddingCodec& codec);

/// Row-wise softmax of cos(q_j, S(v)) / tau. Zero rows of S have cosine 0.
Eigen::MatrixXd probabilities(const MatrixXfR& semantic, const SubpromptSet& prompts);

struct MaskSet {
  int width = 0;
  int height = 0;
  std::vector<RegionId> ids;   // aligned with the SubpromptSet
  std::vector<int> labels;     // per pixel: subprompt index, or -1 for background
  std::vector<std::vector<std::uint8_t>> raw;  // per subprompt, H x W
  std::vector<std::uint8_t> background;        // null mask, H x W

  int pooled_width = 0;
  int pooled_height = 0;
  std::vector<std::vector<std::uint8_t>> pooled;
  std::vector<std::uint8_t> pooled_background;

  /// Every pixel belongs to exactly one of the raw masks or the null mask.
  bool is_partition() const;
  std::size_t pixel_count(int subprompt) const;
};

/// Argmax labels; ties go to the lowest subprompt index.
MaskSet masks(const Eigen::MatrixXd& probabilities, int width, int height,
              const std::vector<RegionId>& ids);

/// Builds the raw and null masks from per-pixel labels.
MaskSet masks_from_labels(std::vector<int> labels, int width, int height,
                          const std::vector<RegionId>& ids);

/// Average pooling with kernel = stride, binarized at > 0, then a
/// kernel x kernel max pool with same-size padding. Fills the pooled fields.
/// The null mask is downsampled the same way but not dilated.
/// Throws InvalidInput when the size is not divisible by the stride.
void pool_masks(MaskSet& masks, int stride, int dilation = 5);

/// Two-stage pooling of a single binary grid (see pool_masks).
std::vector<std::uint8_t> pool_binary(const std::vector<std::uint8_t>& mask, int width, int height,
                                      int stride, int dilation);

struct SegmentOptions {
  double background_alpha = 0.05;  // pixels below this accumulated alpha go to the null mask
};

/// Raw masks of a rendered semantic map. Pixels with alpha below
/// background_alpha go to the null mask; the rest take the argmax of
/// probabilities(decode_map(...)), computed without materializing S.
MaskSet segment(const RenderOutput& render, const EmbeddingCodec& codec,
                const SubpromptSet& prompts, const SegmentOptions& options = {});

}  // namespace semsds
