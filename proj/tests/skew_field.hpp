#pragma once

#include <cmath>

#include "reghom/coeffs.hpp"

namespace reghom::test_fields {

// The skew parts of mat4 and mat5 are constant and drop out of the
// divergence-form operator. This field has a varying skew part so the
// nonsymmetric code paths see a genuinely non-self-adjoint problem.
inline CoefficientField varying_skew() {
  CoefficientField f;
  f.name = "varying_skew";
  f.evaluate = [](const Vec2& x) {
    const double w = 1.5 * std::sin(2.0 * M_PI * x.x) * std::cos(2.0 * M_PI * x.y);
    const double d = 3.0 + std::cos(2.0 * M_PI * x.y);
    return Matrix2{d, 0.5 + w, 0.5 - w, 4.0 - std::sin(2.0 * M_PI * x.x)};
  };
  f.is_symmetric = false;
  f.period = Vec2{1.0, 1.0};
  f.alpha_hint = 1.5;
  f.beta_hint = 6.0;
  return f;
}

}  // namespace reghom::test_fields
