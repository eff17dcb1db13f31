#pragma once

#include "risvi/rng.hpp"
#include "risvi/types.hpp"

namespace risvi::vardist {

// --- complex Laplace CL(m, b), density exp(-|z-m|/b) / (2*pi*b^2) ---

double cl_logpdf(cxd z, cxd m, double b);

// Standard draw zeta ~ CL(0,1): radius Gamma(shape 2, scale 1), uniform
// angle. cl_sample(m,b) is exactly m + b*zeta for the same stream state.
cxd cl_standard_sample(RandomStream& rng);
cxd cl_sample(cxd m, double b, RandomStream& rng);

// log(2*pi*b^2) + 2
double cl_entropy(double b);

// E|z - m|^2 = 6 b^2
double cl_variance(double b);

// --- Gamma(k, unit scale) with implicit reparameterization ---

struct GammaSample {
    double x;      // draw from Gamma(k, 1)
    double dxdk;   // pathwise derivative d x / d k at fixed underlying noise
};

// Marsaglia-Tsang rejection draw (boosting transform for k < 1), with the
// implicit-reparameterization derivative
//   dx/dk = -(dP(k,x)/dk) / pdf(x;k),
// where dP/dk is a central finite difference with step 1e-5*max(1,k).
GammaSample gamma_sample_implicit(double k, RandomStream& rng);

// Derivative alone, for re-attaching gradients to a stored draw.
double gamma_dxdk(double k, double x);

// Quantile of Gamma(k,1): the x with reg_lower_gamma(k, x) = u. Bisection
// plus Newton polish; used as the fixed-noise evaluation path so finite
// differences in k see the same underlying uniform.
double gamma_quantile(double k, double u);

double gamma_logpdf(double x, double k);

// Regularized lower incomplete gamma P(a, x).
double reg_lower_gamma(double a, double x);

// --- KL(Gamma(k, scale 1) || Exp(alpha)) ---

enum class KlMode { Analytic, PaperLiteral };

// Analytic: (k-1)*psi(k) - lgamma(k) - k - log(alpha) + alpha*k.
// PaperLiteral evaluates (1-k)*psi(1) - lgamma(1) + lgamma(k) as printed;
// the two agree only at k = 1.
double kl_gamma_exp(double k, double alpha, KlMode mode = KlMode::Analytic);
double kl_gamma_exp_grad_k(double k, double alpha, KlMode mode = KlMode::Analytic);

// --- special functions (positive real axis) ---

double log_gamma(double x);
double digamma(double x);
double trigamma(double x);

enum class SpecialKind { Digamma, LogGamma };
double special(SpecialKind kind, double x);

}  // namespace risvi::vardist
