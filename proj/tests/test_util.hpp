#pragma once

#include <cmath>
#include <functional>

#include "pdc/rng.hpp"
#include "pdc/tensor.hpp"

namespace testutil {

inline pdc::Tensor random_tensor(std::vector<std::size_t> shape, pdc::Rng& rng,
                                 double lo = -1.0, double hi = 1.0) {
  pdc::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Independent central finite difference used by the test-side oracles.
inline double fd_slot(double& slot, const std::function<double()>& f, double eps = 1e-5) {
  const double saved = slot;
  slot = saved + eps;
  const double up = f();
  slot = saved - eps;
  const double down = f();
  slot = saved;
  return (up - down) / (2.0 * eps);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testutil
