#pragma once

namespace dhc {

// Bessel functions of the first kind, orders 0 and 1.
// Power series below x = 14, Hankel asymptotics above; |err| < 1e-12 on [0, 1e3].
double bessel_j0(double x);
double bessel_j1(double x);

// k-th positive zero of J0 (k = 1, 2, ...) by bisection on a McMahon bracket.
double bessel_j0_zero(int k);
// k-th positive zero of J1.
double bessel_j1_zero(int k);

} // namespace dhc
