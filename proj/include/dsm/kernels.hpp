#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dsm/model.hpp"

namespace dsm {

// Compactly supported kernel:
//   sigma * [ (2 + cos(2 pi d / l)) / 3 * (1 - d / l) + sin(2 pi d / l) / (2 pi) ]  for d < l,
//   0 otherwise.
// Smooth, monotone on [0, l], equal to sigma at d = 0 and to 0 at d = l.
template <typename Scalar>
Scalar sparse_kernel(Scalar d, Scalar l, Scalar sigma) {
  using std::cos;
  using std::sin;
  if (!(d >= Scalar(0))) throw std::invalid_argument("kernel distance must be non-negative");
  if (!(l > Scalar(0)) || !(sigma > Scalar(0))) throw std::invalid_argument("kernel length and scale must be positive");
  if (d >= l) return Scalar(0);
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  const Scalar r = d / l;
  const Scalar s = Scalar(1) - r;
  if (s > Scalar(0.25)) {
    return sigma * ((Scalar(2) + cos(two_pi * r)) / Scalar(3) * s + sin(two_pi * r) / two_pi);
  }
  // Near d = l the bracket is s * sum_{n>=2} (-1)^n (2n-2) / (3 (2n+1)!) x^(2n), x = 2 pi s.
  const Scalar x2 = (two_pi * s) * (two_pi * s);
  Scalar term = x2 * x2 / Scalar(120);  // x^4 / 5!
  Scalar sum = Scalar(0);
  for (int n = 2; n < 16; ++n) {
    sum += (n % 2 ? -term : term) * Scalar(2 * n - 2) / Scalar(3);
    term *= x2 / Scalar((2 * n + 2) * (2 * n + 3));
  }
  return sigma * s * sum;
}

inline double spatial_weight(const Vec3& x, const Vec3& xj, const KernelParams& p) {
  return sparse_kernel((x - xj).norm(), p.l_s, p.sigma_s);
}

inline double flow_weight(const Vec3& x, const Vec3& xj, const KernelParams& p) {
  return sparse_kernel((x - xj).norm(), p.l1, p.sigma1);
}

inline double flow_weight_free(const Vec3& x, const Vec3& xj, const KernelParams& p) {
  return sparse_kernel((x - xj).norm(), p.l_free, p.sigma_free);
}

}  // namespace dsm
