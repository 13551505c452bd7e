#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gpse {

class Rng;

// Dense row-major tensor of doubles. Shape conventions in the network code:
// activations [N, C, H, W], conv weights [Co, Ci, kh, kw], linear weights
// [Dout, Din].
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double v);
  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0);

  size_t size() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;
  bool all_finite() const;

  double& at4(int n, int c, int h, int w) {
    return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  double at4(int n, int c, int h, int w) const {
    return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
};

size_t shape_numel(const std::vector<int>& shape);

}  // namespace gpse
