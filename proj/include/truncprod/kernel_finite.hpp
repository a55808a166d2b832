#pragma once

// Exact evaluation of the finite-n correlation kernels. The t-integral is
// collapsed to its n residues; the s-integral runs over a left-opening
// parabola wrapping the pole cluster on (-inf,-1]. All Gamma ratios are
// integer-offset and reduce to products of linear factors, so the integrand
// is rational times an exponential. A double-precision path handles
// well-conditioned evaluations; an MPFR path with measured-cancellation
// escalation covers the deep regimes where the residue sum cancels.

#include "truncprod/model.hpp"

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace truncprod {

struct QuadratureSettings {
    int base_nodes = 96;
    int max_doublings = 6;
    double rel_tol = 1e-9;
    double parabola_vertex = -0.5; // must lie in (-1, 0)
    double parabola_slope = 1.0;
    double tail_cutoff = 1e-18; // relative integrand-magnitude cutoff
    int max_precision_digits = 12000;
};

void validate(const QuadratureSettings& q);

struct KernelValue {
    double value = 0.0;
    double est_error = 0.0; // absolute change under the final node doubling
    long nodes_used = 0;
};

class KernelEvaluator {
public:
    explicit KernelEvaluator(ProductModel model);
    ~KernelEvaluator();
    KernelEvaluator(const KernelEvaluator&) = delete;
    KernelEvaluator& operator=(const KernelEvaluator&) = delete;

    const ProductModel& model() const;

    // x-variable kernel, 0 < x <= 1, 0 < y < 1
    KernelValue kernel_x(double x, double y, const QuadratureSettings& q) const;
    // log-variable kernel, u <= 0, w < 0
    KernelValue kernel_log(double u, double w, const QuadratureSettings& q) const;
    // amplitude * e^{c(xi-eta)} * K(g(xi), g(eta)) for a prepared regime
    KernelValue scaled(const ScalingContext& ctx, double xi, double eta,
                       const QuadratureSettings& q) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// one-shot wrappers
KernelValue kernel_x(const ProductModel& model, double x, double y, const QuadratureSettings& q);
KernelValue kernel_log(const ProductModel& model, double u, double w, const QuadratureSettings& q);
KernelValue scaled_kernel(const ProductModel& model, const RegimeSpec& spec, double xi, double eta,
                          const QuadratureSettings& q);
KernelValue scaled_kernel(const SimplifiedModel& sm, const RegimeSpec& spec, double xi, double eta,
                          const QuadratureSettings& q);

struct KernelGrid {
    Eigen::MatrixXd value;
    Eigen::MatrixXd est_error;
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> nodes_used;
};

// G[i][j] = scaled_kernel(..., grid[i], grid[j]); rows evaluated in parallel
// across `threads` workers with a deterministic layout.
KernelGrid kernel_grid(const ScalingContext& ctx, const std::vector<double>& grid,
                       const QuadratureSettings& q, int threads = 0);

} // namespace truncprod
