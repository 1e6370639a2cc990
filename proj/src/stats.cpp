#include "pleio/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pleio/errors.hpp"

namespace pleio {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double norm_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

// Wichura's algorithm AS241 (PPND16), relative error ~1e-15.
double norm_quantile(double p) {
    if (std::isnan(p) || p <= 0.0 || p >= 1.0)
        throw DomainError("norm_quantile: p must lie strictly in (0,1)");

    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r +
                    4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r +
                  1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r +
                3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r +
                    2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r +
                  6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r +
                1.0);
    }
    r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r +
                 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r +
               5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r +
             1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r +
                 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r +
               1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r +
             1.0);
    } else {
        r -= 5.0;
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r +
                 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r +
               1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r +
             6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-6) * r +
                 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r +
               1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r +
             1.0);
    }
    return (q < 0.0) ? -x : x;
}

double two_sided_p(double z) {
    return std::min(1.0, 2.0 * norm_sf(std::fabs(z)));
}

double lambda_from_pvalue(double p_two_sided) {
    if (!(p_two_sided > 0.0 && p_two_sided < 1.0))
        throw DomainError("lambda_from_pvalue: p must lie strictly in (0,1)");
    return norm_quantile(1.0 - p_two_sided / 2.0);
}

double mills_ratio(double x) {
    if (x <= 8.0) {
        double pdf = norm_pdf(x);
        if (pdf == 0.0) return std::numeric_limits<double>::infinity();
        return norm_sf(x) / pdf;
    }
    // Backward continued fraction 1/(x + 1/(x + 2/(x + ...))).
    double f = 0.0;
    for (int k = 40; k >= 1; --k) f = static_cast<double>(k) / (x + f);
    return 1.0 / (x + f);
}

namespace {

// Gauss-Legendre nodes/weights on [-1,1] (half, symmetric).
constexpr double kX6[] = {-0.9324695142031522, -0.6612093864662647, -0.2386191860831970};
constexpr double kW6[] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
constexpr double kX12[] = {-0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
                           -0.5873179542866171, -0.3678314989981802, -0.1252334085114692};
constexpr double kW12[] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                           0.2031674267230659, 0.2334925365383547, 0.2491470458134029};
constexpr double kX20[] = {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
                           -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
                           -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
                           -0.07652652113349733};
constexpr double kW20[] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                           0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                           0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                           0.1527533871307259};

// Genz's single-integral algorithm: upper-orthant probability
// P(X > h, Y > k) for standard bivariate normal with correlation r.
double bvnu(double h, double k, double r) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (h == inf || k == inf) return 0.0;
    if (h == -inf) return (k == -inf) ? 1.0 : norm_sf(k);
    if (k == -inf) return norm_sf(h);
    if (r == 0.0) return norm_sf(h) * norm_sf(k);

    const double* xs;
    const double* ws;
    int ng;
    const double ar = std::fabs(r);
    if (ar < 0.3) {
        xs = kX6; ws = kW6; ng = 3;
    } else if (ar < 0.75) {
        xs = kX12; ws = kW12; ng = 6;
    } else {
        xs = kX20; ws = kW20; ng = 10;
    }

    const double twopi = 2.0 * M_PI;
    double hk = h * k;
    double bvn = 0.0;

    if (ar < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(r);
        for (int i = 0; i < ng; ++i) {
            for (int is = -1; is <= 1; is += 2) {
                double sn = std::sin(asr * (is * xs[i] + 1.0) / 2.0);
                bvn += ws[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        return bvn * asr / (2.0 * twopi) + norm_sf(h) * norm_sf(k);
    }

    double kk = k;
    if (r < 0.0) {
        kk = -k;
        hk = -hk;
    }
    if (ar < 1.0) {
        const double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        const double bs = (h - kk) * (h - kk);
        const double c = (4.0 - hk) / 8.0;
        const double d = (12.0 - hk) / 16.0;
        double asr = -(bs / as + hk) / 2.0;
        if (asr > -100.0)
            bvn = a * std::exp(asr) *
                  (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
        if (-hk < 100.0) {
            double b = std::sqrt(bs);
            bvn -= std::exp(-hk / 2.0) * std::sqrt(twopi) * norm_cdf(-b / a) * b *
                   (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (int i = 0; i < ng; ++i) {
            for (int is = -1; is <= 1; is += 2) {
                double x2 = a * (is * xs[i] + 1.0);
                x2 = x2 * x2;
                double rs = std::sqrt(1.0 - x2);
                asr = -(bs / x2 + hk) / 2.0;
                if (asr > -100.0) {
                    double sp = 1.0 + c * x2 * (1.0 + d * x2);
                    double ep = std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs;
                    bvn += a * ws[i] * std::exp(asr) * (ep - sp);
                }
            }
        }
        bvn = -bvn / twopi;
    }
    if (r > 0.0) return bvn + norm_sf(std::max(h, kk));
    bvn = -bvn;
    if (kk > h) bvn += norm_cdf(kk) - norm_cdf(h);
    return bvn;
}

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

}  // namespace

double bvn_rect_prob(double lo1, double hi1, double lo2, double hi2, double rho) {
    if (std::isnan(lo1) || std::isnan(hi1) || std::isnan(lo2) || std::isnan(hi2) ||
        std::isnan(rho))
        throw DomainError("bvn_rect_prob: NaN input");
    if (std::fabs(rho) > 1.0) throw DomainError("bvn_rect_prob: |rho| > 1");
    if (lo1 > hi1 || lo2 > hi2) throw DomainError("bvn_rect_prob: empty rectangle");

    // Degenerate correlation: the mass lives on a line.
    if (std::fabs(rho) > 1.0 - 1e-12) {
        double a = lo1, b = hi1;
        // rho = -1 maps W2 = -W1, so the second constraint becomes
        // -hi2 <= W1 <= -lo2.
        double c = (rho > 0.0) ? lo2 : -hi2;
        double d = (rho > 0.0) ? hi2 : -lo2;
        double lo = std::max(a, c), hi = std::min(b, d);
        if (lo >= hi) return 0.0;
        return clamp01(norm_cdf(hi) - norm_cdf(lo));
    }

    double p = bvnu(lo1, lo2, rho) - bvnu(lo1, hi2, rho) - bvnu(hi1, lo2, rho) +
               bvnu(hi1, hi2, rho);
    return clamp01(p);
}

}  // namespace pleio
