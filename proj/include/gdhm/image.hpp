#pragma once

#include <cstring>
#include <vector>

#include "gdhm/common.hpp"

namespace gdhm {

// Planar image of doubles, channel-major: data[(c*h + y)*w + x]. Planar
// layout keeps per-channel loops contiguous for the SIMD kernels.
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h_, int w_, int c_, double fill = 0.0)
      : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

  double& at(int ch, int y, int x) { return data[(static_cast<size_t>(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const {
    return data[(static_cast<size_t>(ch) * h + y) * w + x];
  }
  double* plane(int ch) { return data.data() + static_cast<size_t>(ch) * h * w; }
  const double* plane(int ch) const { return data.data() + static_cast<size_t>(ch) * h * w; }
  size_t size() const { return data.size(); }
  int pixels() const { return h * w; }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }

  bool operator==(const Image& o) const {
    return same_shape(o) && std::memcmp(data.data(), o.data.data(),
                                        data.size() * sizeof(double)) == 0;
  }
};

}  // namespace gdhm
