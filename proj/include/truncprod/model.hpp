#pragma once

// Truncated-product ensemble data, derived spectral parameters, the
// trigonometric density parameterization for the two-size model, and the
// affine scaling maps (location, conjugation rate, amplitude) of each
// limit regime.

#include "truncprod/common.hpp"

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace truncprod {

// Y_M = T_M ... T_1, T_j the top-left (n+v_j) x (n+v_{j-1}) block of a Haar
// unitary of size m_j. Conventions v_0 = 0, m_0 = 0.
struct ProductModel {
    int n = 1;
    int M = 1;
    std::vector<int> v; // v_1..v_M, nonnegative
    std::vector<int> m; // m_1..m_M, m_j >= n + v_{j-1}
};

// Two-size model: v_j = 0, m_j = round(n(1 + 1/a)) for all j. The realized
// ratio a' = n/(m-n) is what enters every formula.
struct SimplifiedModel {
    int n = 1;
    int M = 1;
    double a = 1.0; // 0 < a < M
};

void validate(const ProductModel& model);
ProductModel to_product(const SimplifiedModel& sm);
double realized_a(const SimplifiedModel& sm);

// ---------------------------------------------------------------------------
// derived parameters
// ---------------------------------------------------------------------------

// depth-to-width ratio Delta = sum_{j=0}^M 1/(n+v_j) - sum_{j=1}^M 1/m_j
double dwr(const ProductModel& model);

// n <= sum_j (m_j - n - v_j)
bool check_determinantal(const ProductModel& model);

// Unique positive root of sum_{j=0}^M (1/(n+v_j+z) - 1/(m_j+z)) = 0, m_0 = 0.
// Bracket-doubling from [1e-9, n], bisection to 1e-13 relative width.
// Throws a domain error when no sign change exists (degenerate edge regime).
double z0(const ProductModel& model);

// prod_{j=0}^M (n+v_j+z0)/(m_j+z0), accumulated in log space
double lambda_m(const ProductModel& model);

// ( (1/2) sum_j [ 1/(m_j+z0)^2 - 1/(n+v_j+z0)^2 ] )^{-1/3}; the radicand is
// taken with the sign that keeps it positive (cube-root Airy scale).
double rho_edge(const ProductModel& model);

// sqrt( sum_{j=0}^M psi'(n+v_j+1-k) - sum_{j=1}^M psi'(m_j+1-k) ), 1 <= k <= n
double rho_normality(const ProductModel& model, int k);

// finite-size critical-bulk rate sum 1/(n+v_j-nu) - sum 1/(m_j-nu), 0 < u < 1
double gamma_prime(const ProductModel& model, double u);

// ---------------------------------------------------------------------------
// two-size density parameterization, theta in (0, pi/(M+1))
// ---------------------------------------------------------------------------

struct BulkPoint {
    double x;                    // x(theta)
    double dens;                 // limiting density at x(theta)
    double vm;                   // (M+1) log sin((M+1)t) - M log sin(Mt) - log sin t
    std::complex<double> w_plus; // W_+(x)
};

BulkPoint bulk_param(int M, double a, double theta);
double theta_of_x(int M, double a, double x);

struct EdgeConstants {
    double x_star;
    double c2;
};
EdgeConstants edge_constants(int M, double a);

double limiting_density(int M, double a, double x);
// cumulative of limiting_density on [0, x], by quadrature in theta
double limiting_cdf(int M, double a, double x);

// ---------------------------------------------------------------------------
// regime scaling maps
// ---------------------------------------------------------------------------

enum class RegimeKind { normality, crit_bulk, crit_edge, gue_edge, gue_bulk, gue_edge_x };

// Which scale/amplitude convention the gue_bulk map uses. density_based uses
// n x(theta) rho(x(theta)) for both the xi-scale and the amplitude;
// theorem_literal uses the printed rho_{M,n}(theta). They differ by (a+1).
enum class BulkAmplitude { density_based, theorem_literal };

struct RegimeSpec {
    RegimeKind kind = RegimeKind::gue_edge;
    std::optional<int> k;        // normality
    std::optional<double> u;     // crit_bulk, in (0,1)
    std::optional<double> theta; // gue_bulk, in (0, pi/(M+1))
    BulkAmplitude bulk_amplitude = BulkAmplitude::density_based;
};

RegimeKind regime_kind_from_string(const std::string& s);
std::string to_string(RegimeKind kind);
void validate(const RegimeSpec& spec);

// Affine data of one (model, regime) pair: location g(xi) = loc0 + loc_scale*xi
// (log variable, or x variable for gue_edge_x), the conjugation rate c with
// prefactor e^{c(xi-eta)}, and the amplitude A of the theorem's left side.
struct ScalingContext {
    ProductModel model;
    RegimeSpec spec;
    bool x_variable = false;
    double loc0 = 0.0;
    double loc_scale = 1.0;
    double conj_rate = 0.0;
    double amplitude = 1.0;
    // contour placement hints for the kernel evaluator
    std::optional<double> saddle_re;
    std::optional<double> saddle_im;

    double location(double xi) const { return loc0 + loc_scale * xi; }
};

ScalingContext make_scaling(const ProductModel& model, const RegimeSpec& spec);
ScalingContext make_scaling(const SimplifiedModel& sm, const RegimeSpec& spec);

// spec-level wrappers
double scaling_location(const ProductModel& model, const RegimeSpec& spec, double xi);
double scaling_location(const SimplifiedModel& sm, const RegimeSpec& spec, double xi);
double conjugation_rate(const ProductModel& model, const RegimeSpec& spec);
double conjugation_rate(const SimplifiedModel& sm, const RegimeSpec& spec);
double amplitude(const ProductModel& model, const RegimeSpec& spec);
double amplitude(const SimplifiedModel& sm, const RegimeSpec& spec);

} // namespace truncprod
