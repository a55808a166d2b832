#include "truncprod/experiments.hpp"
#include "truncprod/common.hpp"
#include "truncprod/kernel_limit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace truncprod {

namespace {

double limit_value(const ScalingContext& ctx, double xi, double eta) {
    switch (ctx.spec.kind) {
        case RegimeKind::normality: return gaussian_limit(eta);
        case RegimeKind::crit_bulk:
            return crit_bulk_kernel(xi, eta, gamma_prime(ctx.model, *ctx.spec.u));
        case RegimeKind::crit_edge: return crit_edge_kernel(xi, eta, dwr(ctx.model));
        case RegimeKind::gue_edge:
        case RegimeKind::gue_edge_x: return airy_kernel(xi, eta, AiryMethod::closed_form);
        case RegimeKind::gue_bulk: return sine_kernel(xi, eta);
    }
    throw_domain("limit_value: unknown regime");
}

} // namespace

std::string describe(const ProductModel& model) {
    std::ostringstream os;
    os << "n=" << model.n << ",M=" << model.M << ",m=" << model.m.front();
    bool constm = std::all_of(model.m.begin(), model.m.end(),
                              [&](int x) { return x == model.m.front(); });
    if (!constm) os << "..";
    bool zerov = std::all_of(model.v.begin(), model.v.end(), [](int x) { return x == 0; });
    os << ",v=" << (zerov ? "0" : "mixed");
    return os.str();
}

ComparisonReport kernel_distance(const ScalingContext& ctx, const std::vector<double>& grid,
                                 const QuadratureSettings& q, int threads) {
    auto t0 = std::chrono::steady_clock::now();
    ComparisonReport rep;
    rep.model_descriptor = describe(ctx.model);
    rep.spec = ctx.spec;
    rep.grid = grid;
    const int g = static_cast<int>(grid.size());

    KernelGrid kg = kernel_grid(ctx, grid, q, threads);
    rep.finite_matrix = kg.value;
    rep.max_est_error = kg.est_error.cwiseAbs().maxCoeff();
    rep.limit_matrix.resize(g, g);
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) rep.limit_matrix(i, j) = limit_value(ctx, grid[i], grid[j]);

    const bool diag_only = (ctx.spec.kind == RegimeKind::normality);
    double sup = 0.0, diag = 0.0;
    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
            if (diag_only && i != j) continue;
            sup = std::max(sup, std::abs(rep.finite_matrix(i, j) - rep.limit_matrix(i, j)));
        }
        double li = rep.limit_matrix(i, i);
        diag = std::max(diag, std::abs(rep.finite_matrix(i, i) - li) / std::abs(li));
    }
    rep.sup_distance = sup;
    rep.diag_rel_distance = diag;
    double detL = rep.limit_matrix.determinant();
    if (diag_only || std::abs(detL) < 1e-140) {
        rep.det_rel_distance = std::numeric_limits<double>::quiet_NaN();
    } else {
        double detF = rep.finite_matrix.determinant();
        rep.det_rel_distance = std::abs(detF - detL) / std::abs(detL);
    }
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

ComparisonReport kernel_distance(const ProductModel& model, const RegimeSpec& spec,
                                 const std::vector<double>& grid, const QuadratureSettings& q,
                                 int threads) {
    return kernel_distance(make_scaling(model, spec), grid, q, threads);
}
ComparisonReport kernel_distance(const SimplifiedModel& sm, const RegimeSpec& spec,
                                 const std::vector<double>& grid, const QuadratureSettings& q,
                                 int threads) {
    return kernel_distance(make_scaling(sm, spec), grid, q, threads);
}

std::vector<SweepRow> transition_sweep(const std::vector<ProductModel>& family,
                                       const std::vector<double>& grid,
                                       const QuadratureSettings& q, int threads) {
    std::vector<SweepRow> rows;
    rows.reserve(family.size());
    for (const ProductModel& md : family) {
        SweepRow row;
        row.model_descriptor = describe(md);
        row.delta = dwr(md);
        RegimeSpec norm{RegimeKind::normality, 1, {}, {}, BulkAmplitude::density_based};
        row.dist_gaussian = kernel_distance(md, norm, grid, q, threads).sup_distance;
        RegimeSpec ce{RegimeKind::crit_edge, {}, {}, {}, BulkAmplitude::density_based};
        {
            ComparisonReport r = kernel_distance(md, ce, grid, q, threads);
            double d = 0.0;
            for (int i = 0; i < static_cast<int>(grid.size()); ++i)
                d = std::max(d, std::abs(r.finite_matrix(i, i) - r.limit_matrix(i, i)));
            row.dist_critical = d;
        }
        RegimeSpec ge{RegimeKind::gue_edge, {}, {}, {}, BulkAmplitude::density_based};
        {
            ComparisonReport r = kernel_distance(md, ge, grid, q, threads);
            row.dist_gue = r.sup_distance;
        }
        rows.push_back(row);
    }
    return rows;
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw_domain("ks_statistic: empty sample");
    std::sort(sample.begin(), sample.end());
    const double N = static_cast<double>(sample.size());
    double d = 0.0;
    for (size_t i = 0; i < sample.size(); ++i) {
        double F = cdf(sample[i]);
        d = std::max(d, std::abs((i + 1) / N - F));
        d = std::max(d, std::abs(i / N - F));
    }
    return d;
}

double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw_domain("ks two-sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                                 static_cast<double>(j) / b.size()));
    }
    return d;
}

DensityComparison density_comparison(const SimplifiedModel& sm, std::uint64_t seed, int draws,
                                     int bins, int threads) {
    if (!(sm.a > 0.0 && sm.a < sm.M)) throw_domain("density_comparison: need 0 < a < M");
    ProductModel pm = to_product(sm);
    double a = realized_a(sm);
    SampleBatch batch = sample_batch(pm, seed, draws, threads);
    std::vector<double> all;
    all.reserve(static_cast<size_t>(draws) * pm.n);
    for (const auto& row : batch.values) all.insert(all.end(), row.begin(), row.end());
    DensityComparison out;
    out.bins = bins;
    out.ks_statistic =
        ks_statistic(all, [&](double x) { return limiting_cdf(sm.M, a, x); });
    EdgeConstants ec = edge_constants(sm.M, a);
    out.empirical = empirical_density(batch, bins, 0.0, ec.x_star);
    return out;
}

DensityComparison density_comparison(const ProductModel& model, std::uint64_t seed, int draws,
                                     int bins, const QuadratureSettings& q, int threads) {
    SampleBatch batch = sample_batch(model, seed, draws, threads);
    DensityComparison out;
    out.bins = bins;
    out.empirical = empirical_density(batch, bins, 0.0, 1.0);
    KernelEvaluator eval(model);
    out.kernel_diag.resize(bins);
    double worst = 0.0;
    for (int b = 0; b < bins; ++b) {
        double x = out.empirical.abscissae[b];
        out.kernel_diag[b] = eval.kernel_x(x, x, q).value;
        double se = std::max(out.empirical.std_errors[b], 1e-300);
        worst = std::max(worst, std::abs(out.empirical.values[b] - out.kernel_diag[b]) / se);
    }
    out.max_sigma_deviation = worst;
    return out;
}

} // namespace truncprod
