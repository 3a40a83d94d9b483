// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#include "lorasim/special_functions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lorasim::special {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
constexpr int kMaxIter = 100000;

// log(x^a e^-x / Gamma(a)), shared prefactor of both expansions.
double log_prefactor(double a, double x) {
    int sign = 0;
    return a * std::log(x) - x - ::lgamma_r(a, &sign);
}

// P(a, x) by the series sum_n x^n / (a (a+1) ... (a+n)).
double lower_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(log_prefactor(a, x));
}

// Q(a, x) by the modified Lentz evaluation of the Legendre continued fraction.
double upper_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return std::exp(log_prefactor(a, x)) * h;
}

void check(double a, double x) {
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("incomplete gamma requires a > 0");
    if (!(x >= 0.0) || std::isnan(x)) throw std::invalid_argument("incomplete gamma requires x >= 0");
}

}  // namespace

double gamma_p(double a, double x) {
    check(a, x);
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return lower_series(a, x);
    return 1.0 - upper_fraction(a, x);
}

double gamma_q(double a, double x) {
    check(a, x);
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return 1.0 - lower_series(a, x);
    return upper_fraction(a, x);
}

}  // namespace lorasim::special
