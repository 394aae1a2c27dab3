#include "dhc/bessel.hpp"

#include <cmath>
#include <stdexcept>

namespace dhc {

namespace {

double j0_series(double x) {
  const __float128 q = (__float128)x * x / 4.0;
  __float128 term = 1.0, sum = 1.0;
  for (int m = 1; m < 200; ++m) {
    term *= -q / ((__float128)m * m);
    sum += term;
    const double t = (double)term;
    if (t < 1e-25 && t > -1e-25) break;
  }
  return (double)sum;
}

double j1_series(double x) {
  const __float128 q = (__float128)x * x / 4.0;
  __float128 term = 1.0, sum = 1.0;
  for (int m = 1; m < 200; ++m) {
    term *= -q / ((__float128)m * (m + 1));
    sum += term;
    const double t = (double)term;
    if (t < 1e-25 && t > -1e-25) break;
  }
  return 0.5 * x * (double)sum;
}

// Hankel amplitude-phase expansion; a_k = prod_{j<=k} (mu - (2j-1)^2).
double j_asymptotic(int order, double x) {
  const double mu = 4.0 * order * order;
  const double i8x = 1.0 / (8.0 * x);
  long double p = 1.0L, q = 0.0L, term = 1.0L;
  for (int k = 1; k <= 12; ++k) {
    term *= (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / k * i8x;
    const long double signed_term = ((k / 2) % 2 == 0 ? term : -term);
    if (k % 2 == 1) {
      q += signed_term; // signs + - + - at k = 1,3,5,...
    } else {
      p += signed_term; // signs - + - at k = 2,4,6,...
    }
  }
  const double chi = x - (0.5 * order + 0.25) * M_PI;
  return std::sqrt(2.0 / (M_PI * x)) * ((double)p * std::cos(chi) - (double)q * std::sin(chi));
}

double zero_by_bisection(double (*f)(double), double lo, double hi) {
  double flo = f(lo), fhi = f(hi);
  if (flo * fhi > 0.0) throw std::runtime_error("bessel zero bracket does not change sign");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo < 1e-16 * mid) break;
    const double fm = f(mid);
    if (flo * fm <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace

double bessel_j0(double x) {
  x = std::fabs(x);
  return x < 30.0 ? j0_series(x) : j_asymptotic(0, x);
}

double bessel_j1(double x) {
  const double s = x < 0.0 ? -1.0 : 1.0;
  x = std::fabs(x);
  return s * (x < 30.0 ? j1_series(x) : j_asymptotic(1, x));
}

double bessel_j0_zero(int k) {
  if (k < 1) throw std::runtime_error("bessel_j0_zero: k must be >= 1");
  const double b = (k - 0.25) * M_PI;
  return zero_by_bisection(&bessel_j0, b - 0.6, b + 0.6);
}

double bessel_j1_zero(int k) {
  if (k < 1) throw std::runtime_error("bessel_j1_zero: k must be >= 1");
  const double b = (k + 0.25) * M_PI;
  return zero_by_bisection(&bessel_j1, b - 0.6, b + 0.6);
}

} // namespace dhc
