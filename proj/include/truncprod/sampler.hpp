#pragma once

// Monte Carlo oracle: samples squared singular values of truncated-unitary
// products with a counter-based RNG so that draw i is an independent
// substream of (seed, i) and parallel runs are bitwise identical to serial.

#include "truncprod/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace truncprod {

// Philox4x32-10 block cipher as a counter-based generator.
class PhiloxRng {
public:
    PhiloxRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();
    // uniform on (0, 1]
    double next_open_unit();
    // standard normal via Box-Muller on (0,1]
    double next_gaussian();

    // raw block for known-answer tests
    static void block(const std::uint32_t counter[4], const std::uint32_t key[2],
                      std::uint32_t out[4]);

private:
    void refill();
    std::uint32_t key_[2];
    std::uint32_t counter_[4];
    std::uint32_t buf_[4];
    int have_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Haar-distributed unitary: complex Ginibre, QR, then the column phases fixed
// so the triangular factor has a positive real diagonal.
Eigen::MatrixXcd haar_unitary(int m, PhiloxRng& rng);

// sorted squared singular values of T_M ... T_1 (ascending, in [0,1])
std::vector<double> sample_squared_singvals(const ProductModel& model, PhiloxRng& rng);
// log of the squared singular values; safe for deep products whose values
// underflow the double range
std::vector<double> sample_log_squared_singvals(const ProductModel& model, PhiloxRng& rng);

struct SampleBatch {
    ProductModel model;
    std::uint64_t seed = 0;
    int draws = 0;
    std::vector<std::vector<double>> values; // draws x n, each sorted ascending
};

// draw-level parallelism with deterministic assembly by draw index
SampleBatch sample_batch(const ProductModel& model, std::uint64_t seed, int draws,
                         int threads = 0);

struct DensityCurve {
    std::vector<double> abscissae;
    std::vector<double> values;
    std::vector<double> std_errors;
};

// histogram of all n*draws values normalized so the curve integrates to n
DensityCurve empirical_density(const SampleBatch& batch, int bins, double lo, double hi);

// rho_{M,n} (log x_max - log lambda_M) per draw
std::vector<double> edge_samples(const ProductModel& model, std::uint64_t seed, int draws,
                                 int threads = 0);

} // namespace truncprod
