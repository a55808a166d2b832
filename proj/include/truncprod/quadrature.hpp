#pragma once

// Gauss-Legendre rules and a small adaptive integrator used for densities,
// kernel traces and the limit-kernel contour integrals.

#include <functional>
#include <vector>

namespace truncprod {

struct GaussLegendreRule {
    std::vector<double> nodes;   // on (-1, 1)
    std::vector<double> weights;
};

// Nodes by Newton iteration on the Legendre recurrence; cached per n.
const GaussLegendreRule& gauss_legendre(int n);

// integral of f over [a,b] with one n-point rule
double gl_integrate(const std::function<double(double)>& f, double a, double b, int n);

// Adaptive Gauss-Kronrod 7/15 with an interval stack. abs_tol guards flat
// integrands near zero; throws a convergence error when the stack overflows.
double adaptive_integrate(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-10, double abs_tol = 1e-14,
                          int max_intervals = 20000);

} // namespace truncprod
