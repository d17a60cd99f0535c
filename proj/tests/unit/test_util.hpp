#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mona/tensor.hpp"

namespace mona::testing {

inline Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape, double lo = -2.0,
                            double hi = 2.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline int random_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace mona::testing
