#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "mcse/common.hpp"

namespace mcse {

// Dense row-major real tensor. All autodiff runs on these; complex spectra
// enter the graph as separate real/imaginary tensors.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    require(static_cast<std::int64_t>(data.size()) == numel_of(shape),
            "Tensor: data size does not match shape");
  }

  static std::int64_t numel_of(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      require(d >= 0, "Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  // Product of all dimensions except the last; (rows, cols) view used by the
  // matrix primitives.
  std::int64_t lead() const {
    require(!shape.empty(), "Tensor: scalar has no lead dimension");
    return numel() / shape.back();
  }

  double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const {
    return data[static_cast<std::size_t>(i)];
  }

  bool all_finite() const;
};

Tensor scalar_tensor(double v);

}  // namespace mcse
