#include "truncprod/specfun.hpp"
#include "truncprod/common.hpp"

#include <mpfr.h>

#include <cmath>
#include <cstdio>

namespace truncprod {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kLogTwoPiHalf = 0.91893853320467274178032973640561764; // log(2*pi)/2

// B_{2r}/(2r(2r-1)) for the Stirling series of log Gamma, r = 1..8.
constexpr double kStirling[8] = {
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
};

// B_{2r} for the digamma/trigamma tails, r = 1..7.
constexpr double kBernoulli[7] = {
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
    5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0,
};

bool near_nonpositive_integer(Complex z, double tol = 1e-12) {
    if (z.real() > 0.5) return false;
    double r = std::round(z.real());
    return r <= 0.0 && std::abs(z.real() - r) <= tol && std::abs(z.imag()) <= tol;
}

void check_pole(Complex z, const char* who) {
    if (near_nonpositive_integer(z)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s: pole at nonpositive integer (z = %.17g%+.17gi)",
                      who, z.real(), z.imag());
        throw_domain(buf);
    }
}

// log(sin(pi z)) on the branch that keeps log_gamma continuous off (-inf,0].
// For Im z >= 0: sin(pi z) = (i/2) e^{-i pi z} (1 - e^{2 pi i z}).
Complex log_sin_pi(Complex z) {
    if (z.imag() < 0.0) return std::conj(log_sin_pi(std::conj(z)));
    const Complex i(0.0, 1.0);
    Complex q = std::exp(2.0 * kPi * i * z); // |q| <= 1
    return i * kPi / 2.0 - std::log(2.0) - i * kPi * z + std::log(1.0 - q);
}

Complex stirling_log_gamma(Complex z) {
    Complex lz = std::log(z);
    Complex acc = (z - 0.5) * lz - z + kLogTwoPiHalf;
    Complex zi = 1.0 / z;
    Complex zp = zi;
    Complex z2 = zi * zi;
    for (double c : kStirling) {
        acc += c * zp;
        zp *= z2;
    }
    return acc;
}

} // namespace

Complex log_gamma(Complex z) {
    check_pole(z, "log_gamma");
    if (z.real() < 0.5) {
        // reflection: log Gamma(z) = log pi - log sin(pi z) - log Gamma(1-z)
        return std::log(kPi) - log_sin_pi(z) - log_gamma(1.0 - z);
    }
    Complex shift(0.0, 0.0);
    while (z.real() < 10.0) {
        shift += std::log(z);
        z += 1.0;
    }
    return stirling_log_gamma(z) - shift;
}

Complex digamma(Complex z) {
    check_pole(z, "digamma");
    if (z.real() < 0.5) {
        // psi(z) = psi(1-z) - pi cot(pi z); cot via one-sided exponentials.
        Complex w = (z.imag() >= 0.0) ? z : std::conj(z);
        Complex q = std::exp(Complex(0.0, 2.0 * kPi) * w);
        Complex cot = Complex(0.0, -1.0) * (1.0 + q) / (1.0 - q);
        if (z.imag() < 0.0) cot = std::conj(cot);
        return digamma(1.0 - z) - kPi * cot;
    }
    Complex acc(0.0, 0.0);
    while (z.real() < 10.0) {
        acc -= 1.0 / z;
        z += 1.0;
    }
    Complex z2 = 1.0 / (z * z);
    Complex tail(0.0, 0.0);
    Complex zp = z2;
    for (int r = 0; r < 7; ++r) {
        tail += kBernoulli[r] / (2.0 * (r + 1)) * zp;
        zp *= z2;
    }
    return acc + std::log(z) - 0.5 / z - tail;
}

Complex trigamma(Complex z) {
    check_pole(z, "trigamma");
    if (z.real() < 0.5) {
        // psi'(z) = pi^2/sin^2(pi z) - psi'(1-z); 1/sin^2 in factored form.
        Complex w = (z.imag() >= 0.0) ? z : std::conj(z);
        Complex q = std::exp(Complex(0.0, 2.0 * kPi) * w);
        Complex inv_sin2 = -4.0 * q / ((1.0 - q) * (1.0 - q));
        if (z.imag() < 0.0) inv_sin2 = std::conj(inv_sin2);
        return kPi * kPi * inv_sin2 - trigamma(1.0 - z);
    }
    Complex acc(0.0, 0.0);
    while (z.real() < 10.0) {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    Complex zi = 1.0 / z;
    Complex z2 = zi * zi;
    Complex tail = zi + 0.5 * z2;
    Complex zp = zi * z2;
    for (double b2r : kBernoulli) {
        tail += b2r * zp;
        zp *= z2;
    }
    return acc + tail;
}

Complex jacobi_theta(Complex z, Complex tau, long max_terms) {
    if (!(tau.imag() > 0.0)) throw_domain("jacobi_theta: Im tau must be positive");
    const Complex ipi(0.0, kPi);
    Complex sum(1.0, 0.0); // n = 0 term
    for (long n = 1; n <= max_terms; ++n) {
        Complex e_common = ipi * static_cast<double>(n) * static_cast<double>(n) * tau;
        Complex e_lin = 2.0 * ipi * static_cast<double>(n) * z;
        Complex term = std::exp(e_common + e_lin) + std::exp(e_common - e_lin);
        sum += term;
        if (std::abs(term) < 1e-16 * std::abs(sum)) return sum;
    }
    throw_convergence("jacobi_theta: series needs more terms than the configured cap");
}

AiryPair airy_pair(double x) {
    if (std::abs(x) > 12.0)
        throw_domain("airy_pair: |x| exceeds the supported range 12");
    // Ai(x) = c1 f(x) - c2 g(x); the alternating tails cancel catastrophically
    // near x = 12, so accumulate in 320-bit arithmetic.
    const mpfr_prec_t prec = 320;
    mpfr_t xm, x3, f, g, fp, gp, a, b, t, c1, c2, third;
    mpfr_inits2(prec, xm, x3, f, g, fp, gp, a, b, t, c1, c2, third, (mpfr_ptr) nullptr);
    mpfr_set_d(xm, x, MPFR_RNDN);
    mpfr_pow_ui(x3, xm, 3, MPFR_RNDN);

    // f-series: a_0 = 1, a_{k+1} = a_k x^3 / ((3k+2)(3k+3)); f' term = a_k 3k/x
    // g-series: b_0 = x, b_{k+1} = b_k x^3 / ((3k+3)(3k+4)); g' term = b_k (3k+1)/x
    mpfr_set_ui(a, 1, MPFR_RNDN);
    mpfr_set(b, xm, MPFR_RNDN);
    mpfr_set_ui(f, 1, MPFR_RNDN);
    mpfr_set(g, xm, MPFR_RNDN);
    mpfr_set_ui(fp, 0, MPFR_RNDN);
    mpfr_set_ui(gp, 1, MPFR_RNDN); // d/dx of b_0 = x
    for (unsigned k = 0; k < 400; ++k) {
        mpfr_mul(a, a, x3, MPFR_RNDN);
        mpfr_div_ui(a, a, (3 * k + 2) * (3 * k + 3), MPFR_RNDN);
        mpfr_add(f, f, a, MPFR_RNDN);
        // a_{k+1} ~ x^{3k+3}: derivative term a_{k+1} (3k+3)/x
        if (x != 0.0) {
            mpfr_mul_ui(t, a, 3 * k + 3, MPFR_RNDN);
            mpfr_div(t, t, xm, MPFR_RNDN);
            mpfr_add(fp, fp, t, MPFR_RNDN);
        }
        mpfr_mul(b, b, x3, MPFR_RNDN);
        mpfr_div_ui(b, b, (3 * k + 3) * (3 * k + 4), MPFR_RNDN);
        mpfr_add(g, g, b, MPFR_RNDN);
        if (x != 0.0) {
            mpfr_mul_ui(t, b, 3 * k + 4, MPFR_RNDN);
            mpfr_div(t, t, xm, MPFR_RNDN);
            mpfr_add(gp, gp, t, MPFR_RNDN);
        }
        mpfr_abs(t, a, MPFR_RNDN);
        if (mpfr_get_exp(t) < -360 && k > 4) break;
    }
    // c1 = 3^{-2/3}/Gamma(2/3), c2 = 3^{-1/3}/Gamma(1/3)
    mpfr_set_ui(third, 1, MPFR_RNDN);
    mpfr_div_ui(third, third, 3, MPFR_RNDN);
    mpfr_ui_sub(t, 1, third, MPFR_RNDN); // 2/3
    mpfr_gamma(c1, t, MPFR_RNDN);
    mpfr_set_ui(t, 3, MPFR_RNDN);
    mpfr_pow(t, t, third, MPFR_RNDN); // 3^{1/3}
    mpfr_mul(c1, c1, t, MPFR_RNDN);
    mpfr_mul(c1, c1, t, MPFR_RNDN); // Gamma(2/3) 3^{2/3}
    mpfr_ui_div(c1, 1, c1, MPFR_RNDN);
    mpfr_gamma(c2, third, MPFR_RNDN);
    mpfr_mul(c2, c2, t, MPFR_RNDN); // Gamma(1/3) 3^{1/3}
    mpfr_ui_div(c2, 1, c2, MPFR_RNDN);

    AiryPair out;
    mpfr_mul(t, c1, f, MPFR_RNDN);
    mpfr_mul(b, c2, g, MPFR_RNDN);
    mpfr_sub(t, t, b, MPFR_RNDN);
    out.ai = mpfr_get_d(t, MPFR_RNDN);
    mpfr_mul(t, c1, fp, MPFR_RNDN);
    mpfr_mul(b, c2, gp, MPFR_RNDN);
    mpfr_sub(t, t, b, MPFR_RNDN);
    out.ai_prime = mpfr_get_d(t, MPFR_RNDN);

    mpfr_clears(xm, x3, f, g, fp, gp, a, b, t, c1, c2, third, (mpfr_ptr) nullptr);
    return out;
}

} // namespace truncprod
