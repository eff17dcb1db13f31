#include "risvi/vardist.hpp"

#include <cmath>
#include <limits>

namespace risvi::vardist {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

// Lanczos approximation, g = 7, 9 terms.
const double kLanczos[9] = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

}  // namespace

double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: x must be > 0");
    if (x < 0.5) {
        // reflection keeps the Lanczos argument away from zero
        return std::log(kPi / std::sin(kPi * x)) - log_gamma(1.0 - x);
    }
    const double z = x - 1.0;
    double sum = kLanczos[0];
    for (int i = 1; i < 9; ++i) sum += kLanczos[i] / (z + i);
    const double base = z + 7.5;
    return 0.5 * kLogTwoPi + (z + 0.5) * std::log(base) - base + std::log(sum);
}

double digamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("digamma: x must be > 0");
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // asymptotic expansion with Bernoulli coefficients
    double series = std::log(x) - 0.5 * inv;
    series -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
    return acc + series;
}

double trigamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("trigamma: x must be > 0");
    double acc = 0.0;
    while (x < 10.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = inv * (1.0 + 0.5 * inv);
    series += inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))));
    return acc + series;
}

double special(SpecialKind kind, double x) {
    return kind == SpecialKind::Digamma ? digamma(x) : log_gamma(x);
}

double cl_logpdf(cxd z, cxd m, double b) {
    require(b > 0.0, "cl_logpdf: scale must be > 0");
    return -std::log(kTwoPi * b * b) - std::abs(z - m) / b;
}

cxd cl_standard_sample(RandomStream& rng) {
    // radius ~ Gamma(2, 1) as a sum of two exponentials
    double u1 = 0.0, u2 = 0.0;
    do {
        u1 = rng.uniform();
    } while (u1 <= 0.0);
    do {
        u2 = rng.uniform();
    } while (u2 <= 0.0);
    const double r = -std::log(u1) - std::log(u2);
    const double theta = rng.uniform(0.0, kTwoPi);
    return r * cxd(std::cos(theta), std::sin(theta));
}

cxd cl_sample(cxd m, double b, RandomStream& rng) {
    require(b >= 0.0, "cl_sample: scale must be >= 0");
    return m + b * cl_standard_sample(rng);
}

double cl_entropy(double b) {
    require(b > 0.0, "cl_entropy: scale must be > 0");
    return std::log(kTwoPi * b * b) + 2.0;
}

double cl_variance(double b) { return 6.0 * b * b; }

double reg_lower_gamma(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("reg_lower_gamma: a must be > 0");
    if (x <= 0.0) return 0.0;
    const double log_prefix = a * std::log(x) - x - log_gamma(a);
    if (x < a + 1.0) {
        // series expansion of P
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 500; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        return std::min(1.0, sum * std::exp(log_prefix));
    }
    // Lentz continued fraction for Q
    const double tiny = 1e-300;
    double b0 = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b0;
    double frac = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b0 += 2.0;
        d = an * d + b0;
        if (std::abs(d) < tiny) d = tiny;
        c = b0 + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        frac *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    const double q = std::exp(log_prefix) * frac;
    return std::max(0.0, 1.0 - q);
}

double gamma_logpdf(double x, double k) {
    if (!(k > 0.0)) throw std::domain_error("gamma_logpdf: k must be > 0");
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return (k - 1.0) * std::log(x) - x - log_gamma(k);
}

double gamma_dxdk(double k, double x) {
    const double h = 1e-5 * std::max(1.0, k);
    const double lo = std::max(k - h, 1e-12);
    const double dPdk = (reg_lower_gamma(k + h, x) - reg_lower_gamma(lo, x)) / (k + h - lo);
    const double pdf = std::exp(gamma_logpdf(x, k));
    if (pdf <= 0.0 || !std::isfinite(pdf)) return 0.0;
    return -dPdk / pdf;
}

namespace {

double gamma_draw(double k, RandomStream& rng) {
    if (k < 1.0) {
        double u = 0.0;
        do {
            u = rng.uniform();
        } while (u <= 0.0);
        return gamma_draw(k + 1.0, rng) * std::pow(u, 1.0 / k);
    }
    // Marsaglia-Tsang squeeze
    const double d = k - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double z = 0.0, v = 0.0;
        do {
            z = rng.normal();
            v = 1.0 + c * z;
        } while (v <= 0.0);
        v = v * v * v;
        double u = 0.0;
        do {
            u = rng.uniform();
        } while (u <= 0.0);
        if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return d * v;
    }
}

}  // namespace

GammaSample gamma_sample_implicit(double k, RandomStream& rng) {
    require(k > 0.0, "gamma_sample_implicit: shape must be > 0");
    const double x = gamma_draw(k, rng);
    return {x, gamma_dxdk(k, x)};
}

double gamma_quantile(double k, double u) {
    if (!(k > 0.0)) throw std::domain_error("gamma_quantile: k must be > 0");
    require(u >= 0.0 && u < 1.0, "gamma_quantile: u must be in [0, 1)");
    if (u <= 0.0) return 0.0;
    double hi = std::max(4.0 * k, 20.0);
    while (reg_lower_gamma(k, hi) < u) hi *= 2.0;
    double lo = 0.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (reg_lower_gamma(k, mid) < u) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 3; ++i) {  // Newton polish
        const double pdf = std::exp(gamma_logpdf(x, k));
        if (pdf <= 0.0) break;
        const double step = (reg_lower_gamma(k, x) - u) / pdf;
        const double next = x - step;
        if (next > lo && next < hi) x = next;
    }
    return x;
}

double kl_gamma_exp(double k, double alpha, KlMode mode) {
    require(k > 0.0 && alpha > 0.0, "kl_gamma_exp: parameters must be > 0");
    if (mode == KlMode::PaperLiteral) {
        return (1.0 - k) * digamma(1.0) - log_gamma(1.0) + log_gamma(k);
    }
    return (k - 1.0) * digamma(k) - log_gamma(k) - k - std::log(alpha) + alpha * k;
}

double kl_gamma_exp_grad_k(double k, double alpha, KlMode mode) {
    require(k > 0.0 && alpha > 0.0, "kl_gamma_exp_grad_k: parameters must be > 0");
    if (mode == KlMode::PaperLiteral) {
        return -digamma(1.0) + digamma(k);
    }
    return (k - 1.0) * trigamma(k) - 1.0 + alpha;
}

}  // namespace risvi::vardist
