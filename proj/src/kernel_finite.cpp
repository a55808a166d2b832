#include "truncprod/kernel_finite.hpp"
#include "truncprod/common.hpp"
#include "parallel.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>

namespace truncprod {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kLn10 = 2.30258509299404568401799145468436421;

using Cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// model precomputation
// ---------------------------------------------------------------------------

// distinct (v_j, d_j = m_j - n - v_j) pairs with multiplicities
struct Group {
    int v;
    int d;
    int cnt;
};

struct Contour {
    double vertex;
    double slope;
    bool operator==(const Contour& o) const { return vertex == o.vertex && slope == o.slope; }
};

struct Precomp {
    ProductModel model;
    int n = 1;
    std::vector<Group> groups;
    std::vector<double> Lc; // log |c~_k|, k = 0..n-1
    int sign0 = 1;          // sign of c~_0 = (-1)^{n-1}
    std::optional<double> saddle_z0;
};

Precomp build_precomp(ProductModel md) {
    validate(md);
    Precomp pc;
    pc.model = std::move(md);
    const ProductModel& m = pc.model;
    pc.n = m.n;
    std::map<std::pair<int, int>, int> gm;
    for (int j = 0; j < m.M; ++j) gm[{m.v[j], m.m[j] - m.n - m.v[j]}]++;
    for (auto& [key, cnt] : gm) pc.groups.push_back({key.first, key.second, cnt});

    // c~_k = (-1)^{n-1-k}/(k!(n-1-k)!) prod_j Gamma(k+1-n+m_j)/Gamma(k+1+v_j)
    pc.Lc.resize(m.n);
    double lc = -std::lgamma(static_cast<double>(m.n));
    for (const Group& g : pc.groups)
        lc += g.cnt * (std::lgamma(static_cast<double>(1 + g.v + g.d)) -
                       std::lgamma(static_cast<double>(1 + g.v)));
    pc.Lc[0] = lc;
    for (int k = 0; k + 1 < m.n; ++k) {
        double step = std::log(static_cast<double>(m.n - 1 - k) / (k + 1));
        for (const Group& g : pc.groups)
            step += g.cnt * std::log(static_cast<double>(k + 1 + g.v + g.d) /
                                     static_cast<double>(k + 1 + g.v));
        pc.Lc[k + 1] = pc.Lc[k] + step;
    }
    try {
        pc.saddle_z0 = z0(pc.model);
    } catch (const Error&) {
        pc.saddle_z0.reset();
    }
    return pc;
}

// rightmost pole of G sits at s = -1 - min{v : group has d > 0}; half-width of
// the analyticity strip of the integrand in the w-plane
double strip_halfwidth(const Precomp& pc, const Contour& ct) {
    int vmin = 0;
    bool has_pole = false;
    for (const Group& g : pc.groups)
        if (g.d > 0) {
            vmin = has_pole ? std::min(vmin, g.v) : g.v;
            has_pole = true;
        }
    if (!has_pole) return 0.5; // G entire; only variation limits h
    double q = ct.vertex + 1.0 + vmin;
    double s2 = ct.slope * ct.slope;
    double d = (4.0 * q > s2) ? ct.slope / 2.0 : (ct.slope - std::sqrt(s2 - 4.0 * q)) / 2.0;
    return std::min(d, 0.5);
}

// ---------------------------------------------------------------------------
// contour scanning (double precision): envelope of the integrand magnitude
// ---------------------------------------------------------------------------

double ln_abs_G(const Precomp& pc, double sre, double sim) {
    double acc = 0.0;
    for (int l = 0; l < pc.n; ++l) {
        double dr = sre - l;
        acc += 0.5 * std::log(dr * dr + sim * sim);
    }
    for (const Group& g : pc.groups) {
        double part = 0.0;
        if (g.d > 0) {
            for (int l = 0; l < g.d; ++l) {
                double dr = sre + 1 + g.v + l;
                part += 0.5 * std::log(dr * dr + sim * sim);
            }
            acc -= g.cnt * part;
        } else if (g.d < 0) {
            for (int l = 1; l <= -g.d; ++l) {
                double dr = sre + 1 + g.v - l;
                part += 0.5 * std::log(dr * dr + sim * sim);
            }
            acc += g.cnt * part;
        }
    }
    return acc;
}

Cplx ln_G(const Precomp& pc, Cplx s) {
    Cplx acc(0.0, 0.0);
    for (int l = 0; l < pc.n; ++l) acc += std::log(s - static_cast<double>(l));
    for (const Group& g : pc.groups) {
        Cplx part(0.0, 0.0);
        if (g.d > 0) {
            for (int l = 0; l < g.d; ++l) part += std::log(s + static_cast<double>(1 + g.v + l));
            acc -= static_cast<double>(g.cnt) * part;
        } else if (g.d < 0) {
            for (int l = 1; l <= -g.d; ++l) part += std::log(s + static_cast<double>(1 + g.v - l));
            acc += static_cast<double>(g.cnt) * part;
        }
    }
    return acc;
}

struct ScanResult {
    double env_max = -1e308;
    double w_extent = 1.0; // where the envelope has dropped ~60 digits
};

ScanResult scan_contour(const Precomp& pc, const std::vector<double>& Ak, double ly,
                        const Contour& ct) {
    ScanResult res;
    const double probe_ln = 140.0; // envelope window tracked during the scan
    double w = 0.0;
    int guard = 0;
    while (guard++ < 6000) {
        double sre = ct.vertex - w * w;
        double sim = ct.slope * w;
        double env = -(sre + 1.0) * ly + ln_abs_G(pc, sre, sim);
        double rmax = -1e308;
        for (int k = 0; k < pc.n; ++k) {
            double dr = sre - k;
            double r = Ak[k] - 0.5 * std::log(dr * dr + sim * sim);
            rmax = std::max(rmax, r);
        }
        env += rmax;
        res.env_max = std::max(res.env_max, env);
        if (env < res.env_max - probe_ln) break;
        res.w_extent = w;
        w += std::max(0.05, 0.04 * w);
    }
    res.w_extent = std::max(res.w_extent, 0.5);
    return res;
}

double clamp_vertex(double v) {
    if (v < -0.9) v = -0.9;
    if (v < 0.4) return v;
    return std::floor(v) + 0.5;
}

// ---------------------------------------------------------------------------
// double-precision run
// ---------------------------------------------------------------------------

struct RunResult {
    bool ok = false;            // finite and below the node budget
    double value_ln = 0.0;      // log |value|
    int sign = 0;               // 0 means value == 0
    double cancel_digits = 400; // log10( sum|contrib| / |sum contrib| )
    long nodes = 0;
};

double run_value(const RunResult& r) {
    return r.sign == 0 ? 0.0 : r.sign * std::exp(r.value_ln);
}

RunResult run_double(const Precomp& pc, const std::vector<double>& Ak, double astar, double ly,
                     const Contour& ct, double h, double eshift, double cutoff_ln,
                     long max_side_nodes) {
    RunResult rr;
    const int n = pc.n;
    std::vector<double> ek(n);
    for (int k = 0; k < n; ++k) {
        double d = Ak[k] - astar;
        ek[k] = (d < -745.0) ? 0.0 : std::exp(d);
        if (k & 1) ek[k] = -ek[k];
    }
    if (pc.sign0 < 0)
        for (double& e : ek) e = -e;
    const double bshift = eshift - astar;

    double acc = 0.0, accabs = 0.0;
    double fmax_ln = -1e308;
    long i = 0;
    int consec = 0;
    for (;; ++i) {
        if (i > max_side_nodes) return rr; // budget exceeded -> not ok
        double w = i * h;
        Cplx s(ct.vertex - w * w, ct.slope * w);
        Cplx B = -(s + 1.0) * ly + ln_G(pc, s);
        Cplx R(0.0, 0.0);
        for (int k = 0; k < n; ++k) R += ek[k] / (s - static_cast<double>(k));
        Cplx f(0.0, 0.0);
        double fe = B.real() - bshift;
        if (fe > -745.0) f = std::exp(Cplx(fe, B.imag())) * R;
        double contrib;
        if (i == 0)
            contrib = 0.5 * f.real() * ct.slope; // f real at the vertex
        else
            contrib = f.real() * ct.slope - 2.0 * w * f.imag(); // Im(f s')
        acc += contrib;
        accabs += std::abs(contrib);
        double fl = std::abs(f.real()) + std::abs(f.imag());
        double fln = (fl > 0) ? std::log(fl) : -1e308;
        fmax_ln = std::max(fmax_ln, fln);
        if (i > 0 && fln < fmax_ln + cutoff_ln) {
            if (++consec >= 6) break;
        } else {
            consec = 0;
        }
    }
    rr.nodes = 2 * i + 1;
    rr.ok = true;
    if (acc == 0.0) {
        rr.sign = 0;
        rr.cancel_digits = 400;
        return rr;
    }
    rr.sign = (acc > 0) ? 1 : -1;
    rr.value_ln = eshift + std::log(std::abs(acc) * h / kPi);
    rr.cancel_digits = (accabs > 0) ? std::log10(accabs / std::abs(acc)) : 0.0;
    return rr;
}

// ---------------------------------------------------------------------------
// MPFR run: same structure with exact rational G and big accumulators
// ---------------------------------------------------------------------------

class MpArray {
public:
    MpArray(size_t count, mpfr_prec_t prec) : v_(count) {
        for (auto& x : v_) mpfr_init2(&x, prec);
    }
    ~MpArray() {
        for (auto& x : v_) mpfr_clear(&x);
    }
    MpArray(const MpArray&) = delete;
    MpArray& operator=(const MpArray&) = delete;
    mpfr_ptr operator[](size_t i) { return &v_[i]; }

private:
    std::vector<__mpfr_struct> v_;
};

struct BigC {
    mpfr_ptr re, im;
};

// dst = a*b, aliasing-safe via scratch t0,t1
void cmul(BigC dst, BigC a, BigC b, mpfr_ptr t0, mpfr_ptr t1, mpfr_ptr t2) {
    mpfr_mul(t0, a.re, b.re, MPFR_RNDN);
    mpfr_mul(t1, a.im, b.im, MPFR_RNDN);
    mpfr_sub(t0, t0, t1, MPFR_RNDN);
    mpfr_mul(t1, a.re, b.im, MPFR_RNDN);
    mpfr_mul(t2, a.im, b.re, MPFR_RNDN);
    mpfr_add(t1, t1, t2, MPFR_RNDN);
    mpfr_set(dst.re, t0, MPFR_RNDN);
    mpfr_set(dst.im, t1, MPFR_RNDN);
}

// dst = a / b
void cdiv(BigC dst, BigC a, BigC b, mpfr_ptr t0, mpfr_ptr t1, mpfr_ptr t2, mpfr_ptr nrm) {
    mpfr_mul(nrm, b.re, b.re, MPFR_RNDN);
    mpfr_mul(t0, b.im, b.im, MPFR_RNDN);
    mpfr_add(nrm, nrm, t0, MPFR_RNDN);
    // a * conj(b)
    mpfr_mul(t0, a.re, b.re, MPFR_RNDN);
    mpfr_mul(t1, a.im, b.im, MPFR_RNDN);
    mpfr_add(t0, t0, t1, MPFR_RNDN);
    mpfr_mul(t1, a.im, b.re, MPFR_RNDN);
    mpfr_mul(t2, a.re, b.im, MPFR_RNDN);
    mpfr_sub(t1, t1, t2, MPFR_RNDN);
    mpfr_div(dst.re, t0, nrm, MPFR_RNDN);
    mpfr_div(dst.im, t1, nrm, MPFR_RNDN);
}

void cpow_ui(BigC dst, BigC base, unsigned long e, BigC acc, BigC sq, mpfr_ptr t0, mpfr_ptr t1,
             mpfr_ptr t2) {
    mpfr_set_ui(acc.re, 1, MPFR_RNDN);
    mpfr_set_ui(acc.im, 0, MPFR_RNDN);
    mpfr_set(sq.re, base.re, MPFR_RNDN);
    mpfr_set(sq.im, base.im, MPFR_RNDN);
    while (e > 0) {
        if (e & 1) cmul(acc, acc, sq, t0, t1, t2);
        e >>= 1;
        if (e) cmul(sq, sq, sq, t0, t1, t2);
    }
    mpfr_set(dst.re, acc.re, MPFR_RNDN);
    mpfr_set(dst.im, acc.im, MPFR_RNDN);
}

RunResult run_big(const Precomp& pc, double lx, double ly, double logpref, const Contour& ct,
                  double h, double cutoff_ln, long max_side_nodes, mpfr_prec_t prec) {
    RunResult rr;
    const int n = pc.n;
    const size_t ng = pc.groups.size();

    // registers: ck[n], then working set
    MpArray ck(n, prec);
    MpArray reg(40, prec);
    int ri = 0;
    auto R = [&]() { return reg[ri++]; };
    mpfr_ptr t0 = R(), t1 = R(), t2 = R(), nrm = R();
    BigC s{R(), R()}, acc{R(), R()}, base{R(), R()}, pw{R(), R()}, pacc{R(), R()}, psq{R(), R()};
    BigC efac{R(), R()}, rsum{R(), R()}, term{R(), R()}, f{R(), R()};
    mpfr_ptr wv = R(), sumv = R(), sumabs = R(), fmaxln = R(), fln = R(), contrib = R();
    mpfr_ptr ratio = R(), expx = R(), d_re = R();

    // c~_0 * e^{logpref}: via real lngamma at integer arguments
    mpfr_set_d(t0, static_cast<double>(n), MPFR_RNDN);
    mpfr_lngamma(t1, t0, MPFR_RNDN);
    mpfr_neg(t1, t1, MPFR_RNDN);
    for (const Group& g : pc.groups) {
        mpfr_set_si(t0, 1 + g.v + g.d, MPFR_RNDN);
        mpfr_lngamma(t2, t0, MPFR_RNDN);
        mpfr_mul_si(t2, t2, g.cnt, MPFR_RNDN);
        mpfr_add(t1, t1, t2, MPFR_RNDN);
        mpfr_set_si(t0, 1 + g.v, MPFR_RNDN);
        mpfr_lngamma(t2, t0, MPFR_RNDN);
        mpfr_mul_si(t2, t2, g.cnt, MPFR_RNDN);
        mpfr_sub(t1, t1, t2, MPFR_RNDN);
    }
    mpfr_add_d(t1, t1, logpref, MPFR_RNDN);
    mpfr_exp(ck[0], t1, MPFR_RNDN);
    if (pc.sign0 < 0) mpfr_neg(ck[0], ck[0], MPFR_RNDN);
    mpfr_set_d(t0, lx, MPFR_RNDN);
    mpfr_exp(expx, t0, MPFR_RNDN);
    for (int k = 0; k + 1 < n; ++k) {
        // c~_{k+1}/c~_k = -(n-1-k)/(k+1) * prod_g ((k+1+v+d)/(k+1+v))^cnt
        mpfr_set_si(ratio, -(n - 1 - k), MPFR_RNDN);
        mpfr_div_ui(ratio, ratio, k + 1, MPFR_RNDN);
        for (const Group& g : pc.groups) {
            mpfr_set_si(t0, k + 1 + g.v + g.d, MPFR_RNDN);
            mpfr_div_si(t0, t0, k + 1 + g.v, MPFR_RNDN);
            mpfr_pow_ui(t0, t0, g.cnt, MPFR_RNDN);
            mpfr_mul(ratio, ratio, t0, MPFR_RNDN);
        }
        mpfr_mul(ck[k + 1], ck[k], ratio, MPFR_RNDN);
        mpfr_mul(ck[k + 1], ck[k + 1], expx, MPFR_RNDN);
    }

    mpfr_set_ui(sumv, 0, MPFR_RNDN);
    mpfr_set_ui(sumabs, 0, MPFR_RNDN);
    mpfr_set_d(fmaxln, -1e308, MPFR_RNDN);
    long i = 0;
    int consec = 0;
    std::vector<unsigned long> gcnt(ng);
    for (size_t gi = 0; gi < ng; ++gi) gcnt[gi] = pc.groups[gi].cnt;

    for (;; ++i) {
        if (i > max_side_nodes) return rr;
        mpfr_set_d(wv, h, MPFR_RNDN);
        mpfr_mul_si(wv, wv, i, MPFR_RNDN);
        // s = vertex - w^2 + i slope w
        mpfr_mul(t0, wv, wv, MPFR_RNDN);
        mpfr_d_sub(s.re, ct.vertex, t0, MPFR_RNDN);
        mpfr_mul_d(s.im, wv, ct.slope, MPFR_RNDN);

        // G(s)
        mpfr_set_ui(acc.re, 1, MPFR_RNDN);
        mpfr_set_ui(acc.im, 0, MPFR_RNDN);
        for (int l = 0; l < n; ++l) {
            mpfr_sub_ui(base.re, s.re, l, MPFR_RNDN);
            mpfr_set(base.im, s.im, MPFR_RNDN);
            cmul(acc, acc, base, t0, t1, t2);
        }
        for (size_t gi = 0; gi < ng; ++gi) {
            const Group& g = pc.groups[gi];
            if (g.d == 0) continue;
            mpfr_set_ui(base.re, 1, MPFR_RNDN);
            mpfr_set_ui(base.im, 0, MPFR_RNDN);
            if (g.d > 0) {
                for (int l = 0; l < g.d; ++l) {
                    mpfr_add_si(pw.re, s.re, 1 + g.v + l, MPFR_RNDN);
                    mpfr_set(pw.im, s.im, MPFR_RNDN);
                    cmul(base, base, pw, t0, t1, t2);
                }
            } else {
                for (int l = 1; l <= -g.d; ++l) {
                    mpfr_add_si(pw.re, s.re, 1 + g.v - l, MPFR_RNDN);
                    mpfr_set(pw.im, s.im, MPFR_RNDN);
                    cmul(base, base, pw, t0, t1, t2);
                }
            }
            cpow_ui(pw, base, gcnt[gi], pacc, psq, t0, t1, t2);
            if (g.d > 0)
                cdiv(acc, acc, pw, t0, t1, t2, nrm);
            else
                cmul(acc, acc, pw, t0, t1, t2);
        }
        // efac = exp(-(s+1) ly)
        mpfr_add_ui(t0, s.re, 1, MPFR_RNDN);
        mpfr_mul_d(t0, t0, -ly, MPFR_RNDN);
        mpfr_mul_d(t1, s.im, -ly, MPFR_RNDN);
        mpfr_exp(t2, t0, MPFR_RNDN);
        mpfr_sin_cos(efac.im, efac.re, t1, MPFR_RNDN);
        mpfr_mul(efac.re, efac.re, t2, MPFR_RNDN);
        mpfr_mul(efac.im, efac.im, t2, MPFR_RNDN);
        // rsum = sum_k ck[k]/(s-k)
        mpfr_set_ui(rsum.re, 0, MPFR_RNDN);
        mpfr_set_ui(rsum.im, 0, MPFR_RNDN);
        for (int k = 0; k < n; ++k) {
            mpfr_sub_ui(d_re, s.re, k, MPFR_RNDN);
            mpfr_mul(nrm, d_re, d_re, MPFR_RNDN);
            mpfr_mul(t0, s.im, s.im, MPFR_RNDN);
            mpfr_add(nrm, nrm, t0, MPFR_RNDN);
            mpfr_mul(t0, ck[k], d_re, MPFR_RNDN);
            mpfr_div(t0, t0, nrm, MPFR_RNDN);
            mpfr_add(rsum.re, rsum.re, t0, MPFR_RNDN);
            mpfr_mul(t0, ck[k], s.im, MPFR_RNDN);
            mpfr_div(t0, t0, nrm, MPFR_RNDN);
            mpfr_sub(rsum.im, rsum.im, t0, MPFR_RNDN);
        }
        cmul(f, efac, acc, t0, t1, t2);
        cmul(f, f, rsum, t0, t1, t2);
        // contribution: i=0 -> f.re*slope/2 ; else Im(f s') = f.re*slope - 2w f.im
        if (i == 0) {
            mpfr_mul_d(contrib, f.re, 0.5 * ct.slope, MPFR_RNDN);
        } else {
            mpfr_mul_d(contrib, f.re, ct.slope, MPFR_RNDN);
            mpfr_mul(t0, f.im, wv, MPFR_RNDN);
            mpfr_mul_d(t0, t0, 2.0, MPFR_RNDN);
            mpfr_sub(contrib, contrib, t0, MPFR_RNDN);
        }
        mpfr_add(sumv, sumv, contrib, MPFR_RNDN);
        mpfr_abs(t0, contrib, MPFR_RNDN);
        mpfr_add(sumabs, sumabs, t0, MPFR_RNDN);
        // tail test on |f| ~ |re|+|im|
        mpfr_abs(t0, f.re, MPFR_RNDN);
        mpfr_abs(t1, f.im, MPFR_RNDN);
        mpfr_add(t0, t0, t1, MPFR_RNDN);
        if (mpfr_zero_p(t0)) {
            mpfr_set_d(fln, -1e308, MPFR_RNDN);
        } else {
            mpfr_log(fln, t0, MPFR_RNDN);
        }
        if (mpfr_cmp(fln, fmaxln) > 0) mpfr_set(fmaxln, fln, MPFR_RNDN);
        mpfr_sub(t0, fln, fmaxln, MPFR_RNDN);
        if (i > 0 && mpfr_get_d(t0, MPFR_RNDN) < cutoff_ln) {
            if (++consec >= 6) break;
        } else {
            consec = 0;
        }
    }
    rr.nodes = 2 * i + 1;
    rr.ok = true;
    if (mpfr_zero_p(sumv)) {
        rr.sign = 0;
        rr.cancel_digits = 4000;
        return rr;
    }
    rr.sign = mpfr_sgn(sumv) > 0 ? 1 : -1;
    mpfr_abs(t0, sumv, MPFR_RNDN);
    mpfr_log(t1, t0, MPFR_RNDN);
    rr.value_ln = mpfr_get_d(t1, MPFR_RNDN) + std::log(h / kPi);
    mpfr_div(t2, sumabs, t0, MPFR_RNDN);
    mpfr_log(t2, t2, MPFR_RNDN);
    rr.cancel_digits = mpfr_get_d(t2, MPFR_RNDN) / kLn10;
    return rr;
}

} // namespace

void validate(const QuadratureSettings& q) {
    if (!(q.parabola_vertex > -1.0 && q.parabola_vertex < 0.0))
        throw_config("quadrature: parabola_vertex must lie in (-1, 0)");
    if (!(q.parabola_slope > 0.0)) throw_config("quadrature: parabola_slope must be positive");
    if (q.base_nodes < 8) throw_config("quadrature: base_nodes must be at least 8");
    if (q.max_doublings < 1) throw_config("quadrature: max_doublings must be at least 1");
    if (!(q.rel_tol > 0.0)) throw_config("quadrature: rel_tol must be positive");
    if (!(q.tail_cutoff > 0.0 && q.tail_cutoff < 1e-6))
        throw_config("quadrature: tail_cutoff must lie in (0, 1e-6)");
}

// ---------------------------------------------------------------------------
// evaluator
// ---------------------------------------------------------------------------

struct KernelEvaluator::Impl {
    explicit Impl(ProductModel md) : pc(build_precomp(std::move(md))) {}

    Precomp pc;
    mutable std::mutex mtx;
    mutable int cached_digits = 0;

    struct Hints {
        std::optional<double> saddle_re;
        std::optional<double> saddle_im;
    };

    KernelValue core(double lx, double ly, double logpref, const QuadratureSettings& q,
                     const Hints& hints) const;
};

KernelEvaluator::KernelEvaluator(ProductModel model)
    : impl_(std::make_unique<Impl>(std::move(model))) {}

KernelEvaluator::~KernelEvaluator() = default;

const ProductModel& KernelEvaluator::model() const { return impl_->pc.model; }

KernelValue KernelEvaluator::Impl::core(double lx, double ly, double logpref,
                                        const QuadratureSettings& q,
                                        const Hints& hints) const {
    validate(q);
    if (!(ly < 0.0)) throw_domain("kernel: decay requires log y < 0 (y < 1)");
    const int n = pc.n;

    std::vector<double> Ak(n);
    double astar = -1e308;
    for (int k = 0; k < n; ++k) {
        Ak[k] = pc.Lc[k] + k * lx + logpref;
        astar = std::max(astar, Ak[k]);
    }

    // candidate contours: the configured parabola, the positive-real saddle
    // shifted into x-kernel coordinates, and a bulk-saddle-guided family
    std::vector<Contour> cands;
    cands.push_back({q.parabola_vertex, q.parabola_slope});
    auto add = [&](double v, double s) {
        Contour c{clamp_vertex(v), std::max(s, 0.5)};
        for (const Contour& e : cands)
            if (e == c) return;
        cands.push_back(c);
    };
    if (pc.saddle_z0) {
        double v = n - 1.0 + *pc.saddle_z0;
        double s0 = std::max(1.0, std::sqrt(v + 1.0));
        add(v, 1.0);
        add(v, s0);
        add(v, 3.0 * s0);
    }
    if (hints.saddle_re && !hints.saddle_im) {
        double v = *hints.saddle_re;
        double s0 = std::max(1.0, std::sqrt(std::abs(v) + 1.0));
        add(v, 1.0);
        add(v, s0);
        add(v, 3.0 * s0);
    }
    if (hints.saddle_re && hints.saddle_im) {
        double re = *hints.saddle_re, im = std::abs(*hints.saddle_im);
        for (double w0 : {0.5, 1.0, 2.0}) add(re + w0 * w0, im / w0);
    }

    Contour best = cands[0];
    ScanResult best_scan;
    bool first = true;
    for (const Contour& c : cands) {
        ScanResult sr = scan_contour(pc, Ak, ly, c);
        if (first || sr.env_max < best_scan.env_max - 1e-9) {
            best = c;
            best_scan = sr;
            first = false;
        }
    }

    // initial working precision from the envelope against a coarse value guess
    double value_guess_ln = logpref - 0.5 * (lx + ly) - 40.0;
    int digits = static_cast<int>((best_scan.env_max - value_guess_ln) / kLn10) + 12;
    {
        std::lock_guard<std::mutex> lk(mtx);
        if (cached_digits > 0) digits = std::max(digits, cached_digits);
    }
    bool use_double = digits <= 15;

    const double quad_boost = (ly > std::log(0.98)) ? 4.0 : 1.0;
    long max_side = use_double ? 3000000 : 500000;
    KernelValue out;

    for (int round = 0; round < 8; ++round) {
        double pdig = use_double ? 15.65 : digits;
        double target_ln = (pdig + 4.0) * kLn10;
        double d_strip = strip_halfwidth(pc, best);
        double h0 = std::min({2.0 * kPi * d_strip * 0.8 / target_ln,
                              kPi / std::sqrt(target_ln * std::max(std::abs(ly), 0.02)), 0.2,
                              2.0 * best_scan.w_extent / q.base_nodes});
        h0 /= quad_boost;
        // tail cutoff relative to the on-contour maximum
        double cutoff_ln = -(target_ln + 9.0);

        mpfr_prec_t prec = static_cast<mpfr_prec_t>(digits * 3.33) + 24;
        auto run_at = [&](double h) {
            return use_double
                       ? run_double(pc, Ak, astar, ly, best, h, best_scan.env_max, cutoff_ln,
                                    max_side)
                       : run_big(pc, lx, ly, logpref, best, h, cutoff_ln, max_side, prec);
        };

        RunResult r0 = run_at(h0);
        long nodes_total = r0.nodes;
        bool converged = false;
        double rel_change = 1.0;
        RunResult rcur = r0;
        double h = h0;
        if (r0.ok) {
            for (int lvl = 0; lvl < q.max_doublings; ++lvl) {
                h *= 0.5;
                RunResult r1 = run_at(h);
                nodes_total += r1.nodes;
                if (!r1.ok) {
                    rcur = r1;
                    break;
                }
                if (r1.sign != 0 && rcur.sign == r1.sign)
                    rel_change = std::abs(std::expm1(rcur.value_ln - r1.value_ln));
                else
                    rel_change = 2.0;
                rcur = r1;
                if (rel_change <= q.rel_tol) {
                    converged = true;
                    break;
                }
            }
        }

        double needed = rcur.ok
                            ? rcur.cancel_digits +
                                  std::log10(std::sqrt(std::max<long>(rcur.nodes, 1))) -
                                  std::log10(q.rel_tol) + 1.0
                            : pdig + 40.0;
        bool precision_ok = rcur.ok && rcur.sign != 0 && needed <= pdig;
        if (precision_ok && converged) {
            if (std::abs(rcur.value_ln) > 705.0)
                throw_domain("kernel: value magnitude exceeds the double range");
            out.value = run_value(rcur);
            out.est_error = std::abs(out.value) * rel_change;
            out.nodes_used = nodes_total;
            std::lock_guard<std::mutex> lk(mtx);
            cached_digits = use_double ? 0 : digits;
            return out;
        }
        if (precision_ok && !converged)
            throw_convergence("kernel: node doubling budget exhausted before rel_tol");
        // escalate precision and retry
        int next = static_cast<int>(std::max(needed + 10.0, digits * 1.35)) + 1;
        digits = std::max(next, 30);
        if (digits > q.max_precision_digits)
            throw_convergence(
                "kernel: required working precision exceeds max_precision_digits (measured "
                "cancellation " +
                std::to_string(rcur.cancel_digits) + " digits)");
        use_double = false;
        max_side = 500000;
    }
    throw_convergence("kernel: precision escalation did not stabilize");
}

KernelValue KernelEvaluator::kernel_x(double x, double y, const QuadratureSettings& q) const {
    if (!(x > 0.0 && x <= 1.0)) throw_domain("kernel_x: require 0 < x <= 1");
    if (!(y > 0.0 && y < 1.0)) throw_domain("kernel_x: require 0 < y < 1");
    if (!check_determinantal(impl_->pc.model))
        throw_domain("kernel_x: determinantal condition violated");
    return impl_->core(std::log(x), std::log(y), 0.0, q, {});
}

KernelValue KernelEvaluator::kernel_log(double u, double w, const QuadratureSettings& q) const {
    if (!(u <= 0.0)) throw_domain("kernel_log: require u <= 0");
    if (!(w < 0.0)) throw_domain("kernel_log: require w < 0");
    if (!check_determinantal(impl_->pc.model))
        throw_domain("kernel_log: determinantal condition violated");
    const int n = impl_->pc.n;
    double logpref = (u - w) * (1.0 - n) + w;
    return impl_->core(u, w, logpref, q, {});
}

KernelValue KernelEvaluator::scaled(const ScalingContext& ctx, double xi, double eta,
                                    const QuadratureSettings& q) const {
    if (!check_determinantal(impl_->pc.model))
        throw_domain("scaled_kernel: determinantal condition violated");
    Impl::Hints hints{ctx.saddle_re, ctx.saddle_im};
    const int n = impl_->pc.n;
    double lp = std::log(ctx.amplitude) + ctx.conj_rate * (xi - eta);
    double lx, ly;
    if (ctx.x_variable) {
        double x = ctx.location(xi), y = ctx.location(eta);
        if (!(x > 0.0 && x <= 1.0 && y > 0.0 && y < 1.0))
            throw_domain("scaled_kernel: scaled x-locations leave (0,1)");
        lx = std::log(x);
        ly = std::log(y);
    } else {
        double u = ctx.location(xi), w = ctx.location(eta);
        if (!(u <= 0.0 && w < 0.0))
            throw_domain("scaled_kernel: scaled log-locations leave the support");
        lx = u;
        ly = w;
        lp += (u - w) * (1.0 - n) + w;
    }
    return impl_->core(lx, ly, lp, q, hints);
}

KernelValue kernel_x(const ProductModel& model, double x, double y, const QuadratureSettings& q) {
    return KernelEvaluator(model).kernel_x(x, y, q);
}
KernelValue kernel_log(const ProductModel& model, double u, double w,
                       const QuadratureSettings& q) {
    return KernelEvaluator(model).kernel_log(u, w, q);
}
KernelValue scaled_kernel(const ProductModel& model, const RegimeSpec& spec, double xi, double eta,
                          const QuadratureSettings& q) {
    ScalingContext ctx = make_scaling(model, spec);
    return KernelEvaluator(model).scaled(ctx, xi, eta, q);
}
KernelValue scaled_kernel(const SimplifiedModel& sm, const RegimeSpec& spec, double xi, double eta,
                          const QuadratureSettings& q) {
    ScalingContext ctx = make_scaling(sm, spec);
    return KernelEvaluator(ctx.model).scaled(ctx, xi, eta, q);
}

KernelGrid kernel_grid(const ScalingContext& ctx, const std::vector<double>& grid,
                       const QuadratureSettings& q, int threads) {
    for (size_t i = 0; i + 1 < grid.size(); ++i)
        if (!(grid[i] < grid[i + 1])) throw_domain("kernel_grid: grid must be strictly increasing");
    const int g = static_cast<int>(grid.size());
    KernelGrid out;
    out.value.resize(g, g);
    out.est_error.resize(g, g);
    out.nodes_used.resize(g, g);
    KernelEvaluator eval(ctx.model);
    detail::parallel_for(g * g, threads, [&](int idx) {
        int i = idx / g, j = idx % g;
        KernelValue kv = eval.scaled(ctx, grid[i], grid[j], q);
        out.value(i, j) = kv.value;
        out.est_error(i, j) = kv.est_error;
        out.nodes_used(i, j) = kv.nodes_used;
    });
    return out;
}

} // namespace truncprod
