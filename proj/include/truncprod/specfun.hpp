#pragma once

// Complex special functions: principal-branch log-gamma, digamma, trigamma,
// the Jacobi theta lattice sum, and Airy Ai/Ai' on the real line.

#include <complex>

namespace truncprod {

using Complex = std::complex<double>;

// Principal branch of log Gamma, continuous on the plane cut along (-inf,0].
// Stirling for Re z >= 10, upward recurrence below, reflection for Re z < 0.5.
// Relative error <= 1e-13 for |z| <= 1e6. Throws on nonpositive-integer poles.
Complex log_gamma(Complex z);

// psi(z) = Gamma'(z)/Gamma(z), same pole/branch policy as log_gamma.
Complex digamma(Complex z);

// psi'(z), relative error <= 1e-12.
Complex trigamma(Complex z);

// theta(z,tau) = sum_{n in Z} exp(pi i n^2 tau + 2 pi i n z), Im tau > 0.
// Summed symmetrically outward; truncated when the last term falls below
// 1e-16 of the partial sum. Throws domain error for Im tau <= 0 and a
// convergence error if the term cap is exhausted.
Complex jacobi_theta(Complex z, Complex tau, long max_terms = 1000000);

struct AiryPair {
    double ai;
    double ai_prime;
};

// (Ai(x), Ai'(x)) by the Maclaurin series with high-precision accumulation.
// Valid for |x| <= 12 (range error outside); absolute error <= 1e-10.
AiryPair airy_pair(double x);

} // namespace truncprod
