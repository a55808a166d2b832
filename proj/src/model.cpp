#include "truncprod/model.hpp"
#include "truncprod/quadrature.hpp"
#include "truncprod/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace truncprod {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;

double tri(double x) { return trigamma(Complex(x, 0.0)).real(); }
double psi(double x) { return digamma(Complex(x, 0.0)).real(); }

// h(z) = sum_{j=0}^M (1/(n+v_j+z) - 1/(m_j+z)), m_0 = 0, v_0 = 0
double edge_equation(const ProductModel& md, double z) {
    double s = 1.0 / (md.n + z) - 1.0 / z;
    for (int j = 0; j < md.M; ++j)
        s += 1.0 / (md.n + md.v[j] + z) - 1.0 / (md.m[j] + z);
    return s;
}
} // namespace

void validate(const ProductModel& model) {
    if (model.n < 1) throw_domain("model: n must be positive");
    if (model.M < 1) throw_domain("model: M must be positive");
    if (static_cast<int>(model.v.size()) != model.M || static_cast<int>(model.m.size()) != model.M)
        throw_domain("model: v and m must both have length M");
    int prev_v = 0; // v_0
    for (int j = 0; j < model.M; ++j) {
        if (model.v[j] < 0) throw_domain("model: v_j must be nonnegative");
        if (model.m[j] < model.n + prev_v) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "model: m_%d = %d violates m_j >= n + v_{j-1} = %d",
                          j + 1, model.m[j], model.n + prev_v);
            throw_domain(buf);
        }
        prev_v = model.v[j];
    }
}

ProductModel to_product(const SimplifiedModel& sm) {
    if (!(sm.a > 0.0 && sm.a < sm.M)) throw_domain("simplified model: need 0 < a < M");
    if (sm.n < 1 || sm.M < 1) throw_domain("simplified model: n, M must be positive");
    int m = std::max(static_cast<int>(std::lround(sm.n * (1.0 + 1.0 / sm.a))), sm.n + 1);
    ProductModel pm;
    pm.n = sm.n;
    pm.M = sm.M;
    pm.v.assign(sm.M, 0);
    pm.m.assign(sm.M, m);
    validate(pm);
    return pm;
}

double realized_a(const SimplifiedModel& sm) {
    ProductModel pm = to_product(sm);
    return static_cast<double>(sm.n) / (pm.m[0] - sm.n);
}

double dwr(const ProductModel& model) {
    validate(model);
    double s = 1.0 / model.n;
    for (int j = 0; j < model.M; ++j)
        s += 1.0 / (model.n + model.v[j]) - 1.0 / model.m[j];
    return s;
}

bool check_determinantal(const ProductModel& model) {
    validate(model);
    long slack = 0;
    for (int j = 0; j < model.M; ++j) slack += model.m[j] - model.n - model.v[j];
    return model.n <= slack;
}

double z0(const ProductModel& model) {
    validate(model);
    double lo = 1e-9;
    double hi = model.n;
    if (edge_equation(model, lo) >= 0.0)
        throw_domain("z0: no positive root (left end already nonnegative)");
    const double cap = std::ldexp(static_cast<double>(model.n), 20); // 2^20 n
    while (edge_equation(model, hi) < 0.0) {
        hi *= 2.0;
        if (hi > cap)
            throw_domain("z0: no positive root of the edge equation on the expanded bracket");
    }
    while ((hi - lo) > 1e-13 * hi) {
        double mid = 0.5 * (lo + hi);
        if (edge_equation(model, mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double lambda_m(const ProductModel& model) {
    double z = z0(model);
    double acc = std::log(model.n + z) - std::log(z);
    for (int j = 0; j < model.M; ++j)
        acc += std::log(model.n + model.v[j] + z) - std::log(model.m[j] + z);
    return std::exp(acc);
}

double rho_edge(const ProductModel& model) {
    double z = z0(model);
    auto sq = [](double t) { return t * t; };
    double rad = 1.0 / sq(z) - 1.0 / sq(model.n + z);
    for (int j = 0; j < model.M; ++j)
        rad += 1.0 / sq(model.m[j] + z) - 1.0 / sq(model.n + model.v[j] + z);
    rad *= 0.5;
    if (!(rad > 0.0))
        throw_domain("rho_edge: nonpositive radicand (Airy scaling invalid for this model)");
    return std::pow(rad, -1.0 / 3.0);
}

double rho_normality(const ProductModel& model, int k) {
    validate(model);
    if (k < 1 || k > model.n) throw_domain("rho_normality: k out of range 1..n");
    double rad = tri(model.n + 1 - k);
    for (int j = 0; j < model.M; ++j)
        rad += tri(model.n + model.v[j] + 1 - k) - tri(model.m[j] + 1 - k);
    if (!(rad > 0.0)) throw_domain("rho_normality: nonpositive radicand");
    return std::sqrt(rad);
}

double gamma_prime(const ProductModel& model, double u) {
    validate(model);
    if (!(u > 0.0 && u < 1.0)) throw_domain("gamma_prime: u must lie in (0,1)");
    double nu = model.n * u;
    double s = 1.0 / (model.n - nu);
    for (int j = 0; j < model.M; ++j) {
        double dm = model.m[j] - nu;
        if (dm <= 0.0) throw_domain("gamma_prime: m_j - nu must be positive");
        s += 1.0 / (model.n + model.v[j] - nu) - 1.0 / dm;
    }
    return s;
}

// ---------------------------------------------------------------------------
// two-size parameterization
// ---------------------------------------------------------------------------

BulkPoint bulk_param(int M, double a, double theta) {
    if (!(a > 0.0 && a < M)) throw_domain("bulk_param: need 0 < a < M");
    if (!(theta > 0.0 && theta < kPi / (M + 1)))
        throw_domain("bulk_param: theta outside (0, pi/(M+1))");
    double S = std::sin((M + 1) * theta);
    double T = std::sin(M * theta);
    double st = std::sin(theta);
    BulkPoint p;
    p.vm = (M + 1) * std::log(S) - M * std::log(T) - std::log(st);
    p.x = std::exp(M * std::log(a) - (M + 1) * std::log(a + 1) + p.vm);
    double D = (a + 1) * (a + 1) * T * T * st * st +
               std::pow(a * std::cos(M * theta) * st - T * std::cos(theta), 2);
    p.dens = std::exp((M + 2) * std::log(a + 1) + (M + 1) * std::log(T) + 2 * std::log(st) -
                      M * std::log(a) - M * std::log(S)) /
             (kPi * D);
    std::complex<double> eit(std::cos(theta), std::sin(theta));
    p.w_plus = S * eit / ((a + 1) * T - a * S * eit);
    return p;
}

double theta_of_x(int M, double a, double x) {
    EdgeConstants ec = edge_constants(M, a);
    if (!(x > 0.0 && x < ec.x_star)) throw_domain("theta_of_x: x outside (0, x_*)");
    // x(theta) is strictly decreasing; bisect.
    double lo = 1e-15, hi = kPi / (M + 1) - 1e-15;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (bulk_param(M, a, mid).x > x)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-13 * hi) break;
    }
    return 0.5 * (lo + hi);
}

EdgeConstants edge_constants(int M, double a) {
    if (!(a > 0.0 && a < M))
        throw_domain("edge_constants: degenerate unless 0 < a < M");
    EdgeConstants ec;
    ec.x_star = std::exp((M + 1) * std::log(M + 1.0) + M * std::log(a) -
                         (M + 1) * std::log(a + 1.0) - M * std::log(static_cast<double>(M)));
    ec.c2 = std::exp(-std::log(2.0) / 3.0 + M * std::log(a) + (M + 2.0 / 3.0) * std::log(M + 1.0) +
                     (4.0 / 3.0) * std::log(M - a) - (M + 5.0 / 3.0) * std::log(a + 1.0) -
                     (M + 1.0 / 3.0) * std::log(static_cast<double>(M)));
    return ec;
}

double limiting_density(int M, double a, double x) {
    return bulk_param(M, a, theta_of_x(M, a, x)).dens;
}

namespace {
// |dx/dtheta| from d log x/dtheta = (M+1)^2 cot((M+1)t) - cot t - M^2 cot(Mt)
double abs_dx_dtheta(int M, double a, double theta) {
    BulkPoint p = bulk_param(M, a, theta);
    double d = (M + 1.0) * (M + 1.0) / std::tan((M + 1) * theta) - 1.0 / std::tan(theta) -
               static_cast<double>(M) * M / std::tan(M * theta);
    return std::abs(p.x * d);
}
} // namespace

double limiting_cdf(int M, double a, double x) {
    EdgeConstants ec = edge_constants(M, a);
    if (x <= 0.0) return 0.0;
    if (x >= ec.x_star) return 1.0;
    double th = theta_of_x(M, a, x);
    // mass on (0, x) corresponds to theta in (th, pi/(M+1))
    auto f = [&](double t) { return bulk_param(M, a, t).dens * abs_dx_dtheta(M, a, t); };
    double hi = kPi / (M + 1);
    return adaptive_integrate(f, th, hi - 1e-12 * hi, 1e-10, 1e-12);
}

// ---------------------------------------------------------------------------
// regimes
// ---------------------------------------------------------------------------

RegimeKind regime_kind_from_string(const std::string& s) {
    if (s == "normality") return RegimeKind::normality;
    if (s == "crit_bulk") return RegimeKind::crit_bulk;
    if (s == "crit_edge") return RegimeKind::crit_edge;
    if (s == "gue_edge") return RegimeKind::gue_edge;
    if (s == "gue_bulk") return RegimeKind::gue_bulk;
    if (s == "gue_edge_x") return RegimeKind::gue_edge_x;
    throw_config("unknown regime kind: " + s);
}

std::string to_string(RegimeKind kind) {
    switch (kind) {
        case RegimeKind::normality: return "normality";
        case RegimeKind::crit_bulk: return "crit_bulk";
        case RegimeKind::crit_edge: return "crit_edge";
        case RegimeKind::gue_edge: return "gue_edge";
        case RegimeKind::gue_bulk: return "gue_bulk";
        case RegimeKind::gue_edge_x: return "gue_edge_x";
    }
    throw_config("unknown regime kind");
}

void validate(const RegimeSpec& spec) {
    auto want = [&](bool need_k, bool need_u, bool need_theta) {
        if (spec.k.has_value() != need_k || spec.u.has_value() != need_u ||
            spec.theta.has_value() != need_theta)
            throw_config("regime '" + to_string(spec.kind) +
                         "': exactly the parameters required by the kind must be present");
    };
    switch (spec.kind) {
        case RegimeKind::normality: want(true, false, false); break;
        case RegimeKind::crit_bulk:
            want(false, true, false);
            if (!(*spec.u > 0.0 && *spec.u < 1.0)) throw_config("crit_bulk: u must lie in (0,1)");
            break;
        case RegimeKind::gue_bulk:
            want(false, false, true);
            break;
        default: want(false, false, false); break;
    }
}

ScalingContext make_scaling(const ProductModel& model, const RegimeSpec& spec) {
    validate(model);
    validate(spec);
    ScalingContext ctx;
    ctx.model = model;
    ctx.spec = spec;
    switch (spec.kind) {
        case RegimeKind::normality: {
            int k = *spec.k;
            double rho = rho_normality(model, k);
            double loc = psi(model.n + 1 - k);
            for (int j = 0; j < model.M; ++j)
                loc += psi(model.n + model.v[j] + 1 - k) - psi(model.m[j] + 1 - k);
            ctx.loc0 = loc;
            ctx.loc_scale = rho;
            ctx.conj_rate = (k - 1) * rho;
            ctx.amplitude = rho;
            break;
        }
        case RegimeKind::crit_bulk: {
            double u = *spec.u;
            double nu = model.n * u;
            double fl = std::floor(nu);
            double gp = gamma_prime(model, u);
            double loc = std::log((1.0 - u) / u);
            for (int j = 0; j < model.M; ++j)
                loc += std::log((model.n + model.v[j] - nu) / (model.m[j] - nu));
            loc += gp * (nu - fl - 0.5);
            ctx.loc0 = loc;
            ctx.loc_scale = 1.0;
            ctx.conj_rate = fl;
            ctx.amplitude = 1.0;
            ctx.saddle_re = model.n - 1.0 + fl; // x-kernel coordinates
            break;
        }
        case RegimeKind::crit_edge: {
            double loc = std::log(static_cast<double>(model.n));
            for (int j = 0; j < model.M; ++j)
                loc += std::log(static_cast<double>(model.n + model.v[j])) -
                       std::log(static_cast<double>(model.m[j]));
            loc -= 0.5 * dwr(model);
            ctx.loc0 = loc;
            ctx.loc_scale = 1.0;
            ctx.conj_rate = 0.0;
            ctx.amplitude = 1.0;
            ctx.saddle_re = model.n - 1.0;
            break;
        }
        case RegimeKind::gue_edge: {
            double z = z0(model);
            double rho = rho_edge(model);
            ctx.loc0 = std::log(lambda_m(model));
            ctx.loc_scale = 1.0 / rho;
            ctx.conj_rate = -z / rho;
            ctx.amplitude = 1.0 / rho;
            ctx.saddle_re = model.n - 1.0 + z;
            break;
        }
        case RegimeKind::gue_bulk:
        case RegimeKind::gue_edge_x:
            throw_config("regime '" + to_string(spec.kind) +
                         "' requires the simplified (two-size) model");
    }
    return ctx;
}

ScalingContext make_scaling(const SimplifiedModel& sm, const RegimeSpec& spec) {
    validate(spec);
    ProductModel pm = to_product(sm);
    if (spec.kind != RegimeKind::gue_bulk && spec.kind != RegimeKind::gue_edge_x)
        return make_scaling(pm, spec);
    double a = realized_a(sm);
    ScalingContext ctx;
    ctx.model = pm;
    ctx.spec = spec;
    if (spec.kind == RegimeKind::gue_bulk) {
        double theta = *spec.theta;
        if (!(theta > 0.0 && theta < kPi / (sm.M + 1)))
            throw_config("gue_bulk: theta outside (0, pi/(M+1))");
        BulkPoint p = bulk_param(sm.M, a, theta);
        double S = std::sin((sm.M + 1) * theta);
        double T = std::sin(sm.M * theta);
        double st = std::sin(theta);
        double D = (a + 1) * (a + 1) * T * T * st * st +
                   std::pow(a * std::cos(sm.M * theta) * st - T * std::cos(theta), 2);
        double rho_printed = sm.n * S * T * st / (kPi * D);
        double rho_dens = sm.n * p.x * p.dens; // = (a+1) * rho_printed
        double scale =
            (spec.bulk_amplitude == BulkAmplitude::density_based) ? rho_dens : rho_printed;
        ctx.loc0 = std::log(p.x);
        ctx.loc_scale = 1.0 / scale;
        ctx.conj_rate = -kPi * (std::cos(theta) / st - a * S / ((a + 1) * T * st));
        ctx.amplitude = 1.0 / scale;
        ctx.saddle_re = sm.n * p.w_plus.real();
        ctx.saddle_im = sm.n * p.w_plus.imag();
    } else { // gue_edge_x
        EdgeConstants ec = edge_constants(sm.M, a);
        double n23 = std::pow(static_cast<double>(sm.n), 2.0 / 3.0);
        ctx.x_variable = true;
        ctx.loc0 = ec.x_star;
        ctx.loc_scale = ec.c2 / n23;
        ctx.conj_rate = -std::cbrt(static_cast<double>(sm.n)) * (sm.M + 1) * ec.c2 /
                        ((sm.M - a) * ec.x_star);
        ctx.amplitude = ec.c2 / n23;
        ctx.saddle_re = sm.n * (sm.M + 1) / (sm.M - a);
    }
    return ctx;
}

double scaling_location(const ProductModel& model, const RegimeSpec& spec, double xi) {
    return make_scaling(model, spec).location(xi);
}
double scaling_location(const SimplifiedModel& sm, const RegimeSpec& spec, double xi) {
    return make_scaling(sm, spec).location(xi);
}
double conjugation_rate(const ProductModel& model, const RegimeSpec& spec) {
    return make_scaling(model, spec).conj_rate;
}
double conjugation_rate(const SimplifiedModel& sm, const RegimeSpec& spec) {
    return make_scaling(sm, spec).conj_rate;
}
double amplitude(const ProductModel& model, const RegimeSpec& spec) {
    return make_scaling(model, spec).amplitude;
}
double amplitude(const SimplifiedModel& sm, const RegimeSpec& spec) {
    return make_scaling(sm, spec).amplitude;
}

} // namespace truncprod
