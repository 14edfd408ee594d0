#pragma once

#include <cstddef>
#include <vector>

namespace semsds {

/// Planar C x H x W tensor in double precision.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(std::size_t(c) * std::size_t(h) * std::size_t(w), fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return std::size_t(height) * std::size_t(width); }
  double& at(int c, int y, int x) { return data[std::size_t(c) * plane() + std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
  double at(int c, int y, int x) const { return data[std::size_t(c) * plane() + std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

}  // namespace semsds
