#include "truncprod/sampler.hpp"
#include "truncprod/common.hpp"
#include "parallel.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace truncprod {

namespace {
constexpr double kTwoPi = 6.28318530717958647692528676655900577;
}

// ---------------------------------------------------------------------------
// Philox4x32-10 (Salmon et al. reference constants)
// ---------------------------------------------------------------------------

PhiloxRng::PhiloxRng(std::uint64_t seed, std::uint64_t stream) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    counter_[0] = 0;
    counter_[1] = 0;
    counter_[2] = static_cast<std::uint32_t>(stream);
    counter_[3] = static_cast<std::uint32_t>(stream >> 32);
}

void PhiloxRng::block(const std::uint32_t counter[4], const std::uint32_t key[2],
                      std::uint32_t out[4]) {
    const std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    const std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    std::uint32_t x0 = counter[0], x1 = counter[1], x2 = counter[2], x3 = counter[3];
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
        std::uint64_t p0 = static_cast<std::uint64_t>(M0) * x0;
        std::uint64_t p1 = static_cast<std::uint64_t>(M1) * x2;
        std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        std::uint32_t y0 = hi1 ^ x1 ^ k0;
        std::uint32_t y1 = lo1;
        std::uint32_t y2 = hi0 ^ x3 ^ k1;
        std::uint32_t y3 = lo0;
        x0 = y0;
        x1 = y1;
        x2 = y2;
        x3 = y3;
        k0 += W0;
        k1 += W1;
    }
    out[0] = x0;
    out[1] = x1;
    out[2] = x2;
    out[3] = x3;
}

void PhiloxRng::refill() {
    block(counter_, key_, buf_);
    if (++counter_[0] == 0 && ++counter_[1] == 0) ++counter_[2];
    have_ = 4;
}

std::uint64_t PhiloxRng::next_u64() {
    if (have_ < 2) refill();
    std::uint64_t hi = buf_[--have_];
    std::uint64_t lo = buf_[--have_];
    return (hi << 32) | lo;
}

double PhiloxRng::next_open_unit() {
    // (k+1) 2^{-64} in (0, 1]
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1p-53;
}

double PhiloxRng::next_gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = next_open_unit();
    double u2 = next_open_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
}

// ---------------------------------------------------------------------------
// Haar sampling and products
// ---------------------------------------------------------------------------

Eigen::MatrixXcd haar_unitary(int m, PhiloxRng& rng) {
    if (m < 1) throw_domain("haar_unitary: m must be positive");
    for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::MatrixXcd g(m, m);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i)
                g(i, j) = std::complex<double>(rng.next_gaussian(), rng.next_gaussian());
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
        Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(m, m);
        Eigen::VectorXcd d = qr.matrixQR().diagonal();
        bool ok = true;
        for (int i = 0; i < m; ++i) {
            double a = std::abs(d(i));
            if (a < 1e-300) {
                ok = false;
                break;
            }
            Q.col(i) *= d(i) / a;
        }
        if (ok) return Q;
    }
    throw_domain("haar_unitary: repeated numerical rank failure");
}

namespace {

// running product kept as Q * (R-chain) with a tracked log scale so deep
// products do not underflow before the final SVD
struct ProductState {
    Eigen::MatrixXcd left;  // current tall factor, (n+v_j) x n
    Eigen::MatrixXcd rchain; // accumulated n x n upper-triangular product
    double log_scale = 0.0;
    int since_reorth = 0;
};

void reorth(ProductState& st, int n) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(st.left);
    Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(st.left.rows(), n);
    Eigen::MatrixXcd R =
        qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    st.rchain = R * st.rchain;
    double mx = st.rchain.cwiseAbs().maxCoeff();
    if (mx > 0.0 && (mx < 1e-120 || mx > 1e120)) {
        st.rchain /= mx;
        st.log_scale += std::log(mx);
    }
    st.left = Q;
    st.since_reorth = 0;
}

// returns log(sigma_i^2) sorted ascending
std::vector<double> sample_log_sq(const ProductModel& md, PhiloxRng& rng) {
    const int n = md.n;
    ProductState st;
    st.left = Eigen::MatrixXcd::Identity(n, n);
    st.rchain = Eigen::MatrixXcd::Identity(n, n);
    int prev_cols = n; // n + v_0
    for (int j = 0; j < md.M; ++j) {
        int rows = n + md.v[j];
        Eigen::MatrixXcd U = haar_unitary(md.m[j], rng);
        st.left = U.topLeftCorner(rows, prev_cols) * st.left;
        prev_cols = rows;
        if (++st.since_reorth >= 25) reorth(st, n);
    }
    reorth(st, n); // flush the tall factor into the chain
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(st.rchain);
    Eigen::VectorXd sv = svd.singularValues();
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
        double ls = (sv(i) > 0.0) ? std::log(sv(i)) + st.log_scale : -1e308;
        out[i] = 2.0 * ls;
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

std::vector<double> sample_log_squared_singvals(const ProductModel& model, PhiloxRng& rng) {
    validate(model);
    return sample_log_sq(model, rng);
}

std::vector<double> sample_squared_singvals(const ProductModel& model, PhiloxRng& rng) {
    std::vector<double> ls = sample_log_squared_singvals(model, rng);
    for (double& v : ls) v = std::exp(std::min(v, 0.0));
    return ls;
}

SampleBatch sample_batch(const ProductModel& model, std::uint64_t seed, int draws, int threads) {
    validate(model);
    if (draws < 1) throw_domain("sample_batch: draws must be positive");
    SampleBatch b;
    b.model = model;
    b.seed = seed;
    b.draws = draws;
    b.values.resize(draws);
    detail::parallel_for(draws, threads, [&](int i) {
        PhiloxRng rng(seed, static_cast<std::uint64_t>(i));
        b.values[i] = sample_squared_singvals(model, rng);
    });
    return b;
}

DensityCurve empirical_density(const SampleBatch& batch, int bins, double lo, double hi) {
    if (batch.draws < 100) throw_domain("empirical_density: need at least 100 draws");
    if (bins < 5) throw_domain("empirical_density: need at least 5 bins");
    if (!(hi > lo)) throw_domain("empirical_density: empty range");
    const int n = batch.model.n;
    const double width = (hi - lo) / bins;
    std::vector<long> counts(bins, 0);
    long total = static_cast<long>(batch.draws) * n;
    for (const auto& row : batch.values)
        for (double v : row) {
            if (v < lo || v >= hi) continue;
            int b = static_cast<int>((v - lo) / width);
            if (b >= 0 && b < bins) ++counts[b];
        }
    DensityCurve c;
    c.abscissae.resize(bins);
    c.values.resize(bins);
    c.std_errors.resize(bins);
    for (int b = 0; b < bins; ++b) {
        c.abscissae[b] = lo + (b + 0.5) * width;
        double p = static_cast<double>(counts[b]) / total;
        c.values[b] = n * p / width;
        c.std_errors[b] = n * std::sqrt(p * (1.0 - p) / total) / width;
    }
    return c;
}

std::vector<double> edge_samples(const ProductModel& model, std::uint64_t seed, int draws,
                                 int threads) {
    validate(model);
    double rho = rho_edge(model);
    double llam = std::log(lambda_m(model));
    std::vector<double> out(draws);
    detail::parallel_for(draws, threads, [&](int i) {
        PhiloxRng rng(seed, static_cast<std::uint64_t>(i));
        std::vector<double> ls = sample_log_sq(model, rng);
        out[i] = rho * (ls.back() - llam);
    });
    return out;
}

} // namespace truncprod
