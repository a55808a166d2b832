#include "truncprod/quadrature.hpp"
#include "truncprod/common.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace truncprod {

namespace {

GaussLegendreRule build_rule(int n) {
    GaussLegendreRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Tricomi initial guess, then Newton on P_n.
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return r;
}

// Gauss-Kronrod 7/15 nodes (positive half) and weights.
const double kGK[8][3] = {
    {0.000000000000000, 0.417959183673469, 0.209482141084728},
    {0.405845151377397, 0.381830050505119, 0.190350578064785},
    {0.741531185599394, 0.279705391489277, 0.140653259715525},
    {0.949107912342759, 0.129484966168870, 0.063092092629979},
    {0.207784955007898, 0.0, 0.204432940075298},
    {0.586087235467691, 0.0, 0.169004726639267},
    {0.864864423359769, 0.0, 0.104790010322250},
    {0.991455371120813, 0.0, 0.022935322010529},
};

void gk15(const std::function<double(double)>& f, double a, double b,
          double& value, double& err) {
    const double c = 0.5 * (a + b);
    const double m = 0.5 * (b - a);
    double y0 = f(c);
    double g7 = kGK[0][1] * y0;
    double k15 = kGK[0][2] * y0;
    for (int i = 1; i < 8; ++i) {
        double dx = m * kGK[i][0];
        double yi = f(c + dx) + f(c - dx);
        g7 += kGK[i][1] * yi;
        k15 += kGK[i][2] * yi;
    }
    g7 *= m;
    k15 *= m;
    err = std::abs(k15 - g7);
    err = 200.0 * err * std::sqrt(err > 0 ? err : 0);
    value = k15;
}

} // namespace

const GaussLegendreRule& gauss_legendre(int n) {
    static std::map<int, GaussLegendreRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
    return it->second;
}

double gl_integrate(const std::function<double(double)>& f, double a, double b, int n) {
    const GaussLegendreRule& r = gauss_legendre(n);
    const double c = 0.5 * (a + b), m = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += r.weights[i] * f(c + m * r.nodes[i]);
    return s * m;
}

double adaptive_integrate(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, double abs_tol, int max_intervals) {
    struct Seg { double a, b, value, err; };
    std::vector<Seg> stack;
    Seg s0{a, b, 0, 0};
    gk15(f, a, b, s0.value, s0.err);
    stack.push_back(s0);
    double total = s0.value, toterr = s0.err;
    int splits = 0;
    while (toterr > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (++splits > max_intervals)
            throw_convergence("adaptive_integrate: interval budget exhausted");
        // split the worst segment
        auto worst = std::max_element(stack.begin(), stack.end(),
                                      [](const Seg& x, const Seg& y) { return x.err < y.err; });
        Seg seg = *worst;
        stack.erase(worst);
        double mid = 0.5 * (seg.a + seg.b);
        Seg l{seg.a, mid, 0, 0}, r{mid, seg.b, 0, 0};
        gk15(f, l.a, l.b, l.value, l.err);
        gk15(f, r.a, r.b, r.value, r.err);
        stack.push_back(l);
        stack.push_back(r);
        total = 0.0;
        toterr = 0.0;
        for (const Seg& s : stack) {
            total += s.value;
            toterr += s.err;
        }
    }
    return total;
}

} // namespace truncprod
