// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace lorasim::special {

/// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
/// Series expansion below x < a + 1, Lentz continued fraction for Q above.
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed directly
/// on the continued-fraction side so small tails keep relative accuracy.
double gamma_q(double a, double x);

}  // namespace lorasim::special
