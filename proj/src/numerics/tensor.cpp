#include "mcse/numerics/tensor.hpp"

#include <cmath>

namespace mcse {

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor scalar_tensor(double v) { return Tensor({1}, {v}); }

}  // namespace mcse
