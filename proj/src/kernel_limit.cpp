#include "truncprod/kernel_limit.hpp"
#include "truncprod/common.hpp"
#include "truncprod/quadrature.hpp"
#include "truncprod/specfun.hpp"

#include <cmath>
#include <complex>

namespace truncprod {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
using Cplx = std::complex<double>;
} // namespace

double gaussian_limit(double eta) {
    return std::exp(-0.5 * eta * eta) / std::sqrt(2.0 * kPi);
}

double sine_kernel(double xi, double eta) {
    double d = xi - eta;
    if (d == 0.0) return 1.0;
    return std::sin(kPi * d) / (kPi * d);
}

namespace {

double airy_closed_form(double xi, double eta) {
    double d = xi - eta;
    if (std::abs(d) < 1e-5) {
        // diagonal value at the midpoint plus the quadratic correction
        double m = 0.5 * (xi + eta), dl = 0.5 * d;
        AiryPair p = airy_pair(m);
        double diag = p.ai_prime * p.ai_prime - m * p.ai * p.ai;
        double corr = (4.0 * p.ai * p.ai_prime + 8.0 * m * p.ai_prime * p.ai_prime -
                       8.0 * m * m * p.ai * p.ai) /
                      12.0;
        return diag + dl * dl * corr;
    }
    AiryPair px = airy_pair(xi), pe = airy_pair(eta);
    return (px.ai * pe.ai_prime - px.ai_prime * pe.ai) / d;
}

// double contour over the wedge rays through +1 (u) and -1 (lambda)
double airy_contour(double xi, double eta) {
    const double R = 8.0;          // e^{-R^3/3 + 10R} < 1e-12 tail
    const int nper = 320;          // per ray segment, doubled once for est
    const Cplx wp(0.5, std::sqrt(3.0) / 2.0);  // e^{ i pi/3}
    const Cplx wm = std::conj(wp);

    auto eval = [&](int nn) {
        const GaussLegendreRule& rule = gauss_legendre(nn);
        // u-nodes on gamma_R: u = 1 + r e^{+-i pi/3}; lambda on gamma_L mirror
        std::vector<Cplx> un, uw, ln_, lw;
        for (int half = 0; half < 2; ++half) {
            Cplx dir = half == 0 ? wm : wp; // from e^{-i pi/3} inf up to e^{+i pi/3} inf
            for (int i = 0; i < nn; ++i) {
                double r = 0.5 * R * (1.0 + rule.nodes[i]);
                double w = 0.5 * R * rule.weights[i];
                // orientation: half 0 runs r: R -> 0, half 1 runs 0 -> R
                Cplx u = 1.0 + r * dir;
                Cplx du = dir * w;
                if (half == 0) du = -du; // incoming ray reverses
                un.push_back(u);
                uw.push_back(du);
                // gamma_L = mirror: lambda = -conj(u), dlambda = -conj(du)
                ln_.push_back(-std::conj(u));
                lw.push_back(-std::conj(du));
            }
        }
        // reverse the incoming halves so node order follows the contour
        Cplx acc(0.0, 0.0);
        for (size_t a = 0; a < un.size(); ++a) {
            Cplx fu = std::exp(un[a] * un[a] * un[a] / 3.0 - xi * un[a]) * uw[a];
            for (size_t b = 0; b < ln_.size(); ++b) {
                Cplx gl = std::exp(-(ln_[b] * ln_[b] * ln_[b] / 3.0 - eta * ln_[b])) * lw[b];
                acc += fu * gl / (un[a] - ln_[b]);
            }
        }
        Cplx pref = 1.0 / (Cplx(0.0, 2.0 * kPi) * Cplx(0.0, 2.0 * kPi));
        return (pref * acc).real();
    };
    double v1 = eval(nper);
    double v2 = eval(nper * 3 / 2);
    if (std::abs(v2 - v1) > 1e-8 * std::max(1.0, std::abs(v2)))
        throw_convergence("airy_kernel: contour quadrature failed to settle");
    return v2;
}

} // namespace

double airy_kernel(double xi, double eta, AiryMethod method) {
    if (std::abs(xi) > 10.0 || std::abs(eta) > 10.0)
        throw_domain("airy_kernel: arguments limited to |.| <= 10");
    return method == AiryMethod::closed_form ? airy_closed_form(xi, eta)
                                             : airy_contour(xi, eta);
}

double crit_bulk_kernel(double xi, double eta, double gamma) {
    if (!(gamma > 0.0)) throw_domain("crit_bulk_kernel: gamma must be positive");
    const Cplx i(0.0, 1.0);
    Cplx tau = i * gamma / (2.0 * kPi);
    auto integrand = [&](double w) {
        Cplx z = (kPi * w - i * xi) / (2.0 * kPi);
        Cplx e = (kPi * w - i * eta);
        return std::exp(e * e / (2.0 * gamma)) * jacobi_theta(z, tau);
    };
    int nn = 64;
    Cplx prev(0.0, 0.0);
    for (int lvl = 0; lvl < 9; ++lvl, nn *= 2) {
        const GaussLegendreRule& rule = gauss_legendre(nn);
        Cplx acc(0.0, 0.0);
        for (int j = 0; j < nn; ++j) acc += rule.weights[j] * integrand(rule.nodes[j]);
        acc /= std::sqrt(8.0 * kPi * gamma);
        if (lvl > 0 && std::abs(acc - prev) <= 1e-10 * std::max(1e-30, std::abs(acc))) {
            if (std::abs(acc.imag()) > 1e-11 * std::max(1.0, std::abs(acc.real())))
                throw_convergence("crit_bulk_kernel: imaginary residual above tolerance");
            return acc.real();
        }
        prev = acc;
    }
    throw_convergence("crit_bulk_kernel: node doubling did not settle");
}

namespace {

// (1/2pi) int e^{gamma(1+it)^2/2 - eta(1+it)} / (Gamma(1+it)((1+it)+k)) dt, real part
double crit_edge_s_integral(double eta, double gamma, int k) {
    // damping e^{-gamma t^2/2} against 1/|Gamma| ~ e^{pi |t|/2}
    double tmax = (kPi / 2.0 + std::sqrt(kPi * kPi / 4.0 + 2.0 * gamma * 44.0)) / gamma;
    auto f = [&](double t) {
        Cplx s(1.0, t);
        Cplx val = std::exp(gamma * s * s / 2.0 - eta * s - log_gamma(s)) / (s + static_cast<double>(k));
        return val.real();
    };
    // integrand is even-symmetrized by the +-t pairing inside adaptive range
    return adaptive_integrate(f, -tmax, tmax, 1e-12, 1e-16) / (2.0 * kPi);
}

} // namespace

double crit_edge_kernel(double xi, double eta, double gamma) {
    if (!(gamma > 0.0)) throw_domain("crit_edge_kernel: gamma must be positive");
    double total = 0.0;
    double kfact = 1.0;
    for (int k = 0; k < 400; ++k) {
        if (k > 0) kfact *= k;
        double coeff = ((k & 1) ? -1.0 : 1.0) / kfact * std::exp(-gamma * k * k / 2.0 - xi * k);
        double term = coeff * crit_edge_s_integral(eta, gamma, k);
        total += term;
        if (std::abs(term) < 1e-16 * std::abs(total) && k >= 2) return total;
    }
    throw_convergence("crit_edge_kernel: residue series did not settle");
}

} // namespace truncprod
