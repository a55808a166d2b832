#pragma once

// Convergence harness: scaled finite kernels against their limit kernels,
// transition sweeps in the depth-to-width ratio, and Monte Carlo density
// comparisons.

#include "truncprod/kernel_finite.hpp"
#include "truncprod/model.hpp"
#include "truncprod/sampler.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace truncprod {

struct ComparisonReport {
    std::string model_descriptor;
    RegimeSpec spec;
    std::vector<double> grid;
    Eigen::MatrixXd finite_matrix;
    Eigen::MatrixXd limit_matrix;
    double sup_distance = 0.0;      // on the comparison set of the regime
    double diag_rel_distance = 0.0; // max_i |F_ii - L_ii| / |L_ii|
    double det_rel_distance = 0.0;  // |det F - det L| / |det L|; NaN if L singular
    double max_est_error = 0.0;     // largest kernel quadrature error on the grid
    double runtime_seconds = 0.0;
};

// Evaluates the scaled finite kernel and the regime's limit kernel on the
// grid. Critical regimes use the finite-size Delta (edge) and gamma' (bulk)
// as the limit parameter. The normality limit is xi-independent, so its
// distances are taken on the diagonal slice.
ComparisonReport kernel_distance(const ScalingContext& ctx, const std::vector<double>& grid,
                                 const QuadratureSettings& q, int threads = 0);
ComparisonReport kernel_distance(const ProductModel& model, const RegimeSpec& spec,
                                 const std::vector<double>& grid, const QuadratureSettings& q,
                                 int threads = 0);
ComparisonReport kernel_distance(const SimplifiedModel& sm, const RegimeSpec& spec,
                                 const std::vector<double>& grid, const QuadratureSettings& q,
                                 int threads = 0);

struct SweepRow {
    std::string model_descriptor;
    double delta = 0.0;
    double dist_gaussian = 0.0; // normality (k=1) diagonal distance
    double dist_critical = 0.0; // crit_edge against gamma = Delta, diagonal
    double dist_gue = 0.0;      // gue_edge against the Airy kernel
};

std::vector<SweepRow> transition_sweep(const std::vector<ProductModel>& family,
                                       const std::vector<double>& grid,
                                       const QuadratureSettings& q, int threads = 0);

struct DensityComparison {
    double ks_statistic = 0.0;          // empirical vs limiting CDF (simplified path)
    int bins = 0;
    DensityCurve empirical;
    std::vector<double> kernel_diag;    // finite-n one-point intensity per bin
    double max_sigma_deviation = 0.0;   // max |empirical-kernel| / std_error
};

// Simplified-model path: KS of squared singular values against the limiting
// law. Finite-model path: per-bin comparison with the kernel diagonal.
DensityComparison density_comparison(const SimplifiedModel& sm, std::uint64_t seed, int draws,
                                     int bins, int threads = 0);
DensityComparison density_comparison(const ProductModel& model, std::uint64_t seed, int draws,
                                     int bins, const QuadratureSettings& q, int threads = 0);

// one-sample Kolmogorov-Smirnov statistic against a cdf given at the sorted
// sample points
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
// two-sample KS statistic
double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b);

std::string describe(const ProductModel& model);

} // namespace truncprod
