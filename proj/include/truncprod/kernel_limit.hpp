#pragma once

// The five limit kernels of the phase transition: Gaussian density, sine
// kernel, Airy kernel (two independent representations), and the two
// critical interpolating kernels.

namespace truncprod {

double gaussian_limit(double eta);
double sine_kernel(double xi, double eta);

enum class AiryMethod { closed_form, contour };
// |xi|,|eta| <= 10; contour truncation tail < 1e-12; methods agree to 1e-8
double airy_kernel(double xi, double eta, AiryMethod method = AiryMethod::closed_form);

// (1/sqrt(8 pi gamma)) int_{-1}^{1} e^{(pi w - i eta)^2/(2 gamma)}
//     theta((pi w - i xi)/(2 pi), i gamma/(2 pi)) dw
double crit_bulk_kernel(double xi, double eta, double gamma);

// residue series over the wrapped gamma poles, each with a vertical-line
// s-integral through Re s = 1
double crit_edge_kernel(double xi, double eta, double gamma);

} // namespace truncprod
