#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pleio/rivw.hpp"
#include "pleio/stats.hpp"

using namespace pleio;

namespace {
const double kLambda = 4.0556269811219074;  // two-sided 5e-5 cutoff

SelectionConfig cfg(double lambda = kLambda, double eta = 0.5) {
    SelectionConfig c;
    c.lambda = lambda;
    c.eta = eta;
    return c;
}
}  // namespace

TEST_CASE("selection records reproduce the indexed noise and threshold rule") {
    const std::vector<double> g = {0.009, -0.012, 0.0005, 0.02};
    const std::vector<double> sx = {0.0022, 0.0022, 0.0022, 0.0022};
    const RngStream stream(31u, 2u);
    const auto rec = rerandomized_select(g, sx, cfg(), stream);
    REQUIRE(rec.size() == g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
        CHECK(rec[j].index == j);
        CHECK(rec[j].z_noise == 0.5 * stream.normal_at(j));
        const double s = std::fabs(g[j] / sx[j] + rec[j].z_noise) - kLambda;
        CHECK(rec[j].s_value == doctest::Approx(s).epsilon(1e-15));
        CHECK(rec[j].selected == (s > 0.0));
    }
    CHECK(stream.counter() == 0);  // indexed access only
}

TEST_CASE("selection rejects nonpositive lambda or eta") {
    const std::vector<double> g = {1.0}, sx = {1.0};
    const RngStream stream(1u, 0u);
    CHECK_THROWS_AS(rerandomized_select(g, sx, cfg(0.0, 0.5), stream), ConfigError);
    CHECK_THROWS_AS(rerandomized_select(g, sx, cfg(kLambda, -0.1), stream), ConfigError);
}

TEST_CASE("rao_blackwell matches high-precision reference values") {
    const auto a = rao_blackwell(4.5, 1.0, cfg());
    CHECK(a.gamma_rb == doctest::Approx(3.8387452384823257).epsilon(1e-12));
    CHECK(a.sigma2_rb == doctest::Approx(2.6126329581222842).epsilon(1e-12));
    const auto b = rao_blackwell(0.01, 0.002236, cfg());
    CHECK(b.gamma_rb == doctest::Approx(0.008419431115084487).epsilon(1e-12));
    CHECK(b.sigma2_rb == doctest::Approx(1.338784013756786e-05).epsilon(1e-12));
    const auto c = rao_blackwell(-2.2, 0.8, cfg());
    CHECK(c.gamma_rb == doctest::Approx(2.4789748957967577).epsilon(1e-12));
    CHECK(c.sigma2_rb == doctest::Approx(2.984019298074482).epsilon(1e-12));
}

TEST_CASE("rao_blackwell symmetry: zero stays zero, sign flips carry through") {
    const auto z = rao_blackwell(0.0, 0.7, cfg());
    CHECK(z.gamma_rb == doctest::Approx(0.0).epsilon(1e-15));
    for (double g : {0.3, 1.7, 4.2, 9.0}) {
        const auto pos = rao_blackwell(g, 1.0, cfg());
        const auto neg = rao_blackwell(-g, 1.0, cfg());
        CHECK(neg.gamma_rb == doctest::Approx(-pos.gamma_rb).epsilon(1e-13));
        CHECK(neg.sigma2_rb == doctest::Approx(pos.sigma2_rb).epsilon(1e-13));
    }
}

TEST_CASE("rao_blackwell correction vanishes for very strong instruments") {
    // |gamma/sigma| far above the cutoff: selection is near-certain, so the
    // conditional estimate collapses back to the unconditional one.
    const auto rb = rao_blackwell(18.0, 1.0, cfg());  // standardized z = 18
    CHECK(rb.gamma_rb == doctest::Approx(18.0).epsilon(1e-8));
    CHECK(rb.sigma2_rb == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("rao_blackwell is continuous across its numerical branch switch") {
    // The implementation changes evaluation strategy around a - tau = 8.
    const double eta = 0.5;
    const double a = kLambda / eta;
    for (double x : {7.9, 7.99, 8.0}) {
        const double tau = a - x;
        const double g_lo = (tau - 1e-9) * eta;  // just below the switch
        const double g_hi = (tau + 1e-9) * eta;  // just above
        const auto lo = rao_blackwell(g_lo, 1.0, cfg());
        const auto hi = rao_blackwell(g_hi, 1.0, cfg());
        CHECK(lo.gamma_rb == doctest::Approx(hi.gamma_rb).epsilon(1e-6));
        CHECK(lo.sigma2_rb == doctest::Approx(hi.sigma2_rb).epsilon(1e-6));
    }
}

TEST_CASE("rao_blackwell stays finite deep in the stable branch") {
    for (double g : {0.0, 1e-4, 0.001, -0.002}) {
        const auto rb = rao_blackwell(g, 1.0, cfg());
        CHECK(std::isfinite(rb.gamma_rb));
        CHECK(std::isfinite(rb.sigma2_rb));
        // shrinkage never overshoots past the far side of the cutoff
        CHECK(std::fabs(rb.gamma_rb) < kLambda + 10.0);
    }
}

TEST_CASE("rao_blackwell is conditionally unbiased under selection") {
    // gamma_hat = gamma + sigma_x * N(0,1); keep draws with
    // |gamma_hat/sigma_x + eta*Z| > lambda; the RB mean must recover gamma and
    // the variance estimate must debias gamma_rb^2.
    const double gamma = 4.0, sx = 1.0;
    const SelectionConfig c = cfg();
    RngStream noise(20240818u, 0u);
    RngStream sel(20240818u, 1u);
    double sum_g = 0.0, sum_q = 0.0;
    long n = 0;
    for (long i = 0; i < 400000; ++i) {
        const double ghat = gamma + sx * noise.next_normal();
        const double s = std::fabs(ghat / sx + c.eta * sel.next_normal()) - c.lambda;
        if (s <= 0.0) continue;
        const auto rb = rao_blackwell(ghat, sx, c);
        sum_g += rb.gamma_rb;
        sum_q += rb.gamma_rb * rb.gamma_rb - rb.sigma2_rb;
        ++n;
    }
    REQUIRE(n > 50000);
    const double mean_g = sum_g / n;
    const double mean_q = sum_q / n;
    CHECK(std::fabs(mean_g - gamma) < 4.0 * 2.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::fabs(mean_q - gamma * gamma) < 4.0 * 20.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("rivw point estimate recovers an exact proportional relationship") {
    // With sigma2_rb = 0 and Gamma = beta * gamma_rb exactly, every residual
    // vanishes: beta_hat = beta, se = 0, and the z / p fields degrade safely.
    const std::vector<double> g = {1.0, 2.0, -0.5};
    const std::vector<double> s2 = {0.0, 0.0, 0.0};
    std::vector<double> G(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) G[j] = 0.5 * g[j];
    const std::vector<double> sy = {0.1, 0.2, 0.15};
    const std::vector<double> sx = {1.0, 1.0, 1.0};
    const auto res = rivw_estimate(g, s2, G, sy, sx);
    CHECK(res.beta_hat == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(res.se == doctest::Approx(0.0));
    CHECK(res.z == 0.0);
    CHECK(res.p_value == doctest::Approx(1.0));
    CHECK(res.n_selected == 3);
}

TEST_CASE("rivw matches a direct evaluation of its formulas") {
    const std::vector<double> g = {0.9, 1.4, -0.6, 2.1};
    const std::vector<double> s2 = {0.04, 0.02, 0.05, 0.01};
    const std::vector<double> G = {0.5, 0.8, -0.2, 1.0};
    const std::vector<double> sy = {0.30, 0.25, 0.40, 0.20};
    const std::vector<double> sx = {0.20, 0.20, 0.25, 0.20};
    const auto res = rivw_estimate(g, s2, G, sy, sx);

    double t1 = 0.0, t2 = 0.0, kap = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double w = 1.0 / (sy[j] * sy[j]);
        t1 += w * g[j] * G[j];
        t2 += w * (g[j] * g[j] - s2[j]);
        kap += (g[j] * g[j] - s2[j]) / (sx[j] * sx[j]);
    }
    CHECK(res.theta1 == doctest::Approx(t1).epsilon(1e-14));
    CHECK(res.theta2 == doctest::Approx(t2).epsilon(1e-14));
    CHECK(res.beta_hat == doctest::Approx(t1 / t2).epsilon(1e-14));
    CHECK(res.kappa_hat == doctest::Approx(kap / 4.0).epsilon(1e-14));

    double ssq = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double om = g[j] * G[j] - (t1 / t2) * (g[j] * g[j] - s2[j]);
        ssq += om * om / std::pow(sy[j], 4);
    }
    CHECK(res.se == doctest::Approx(std::sqrt(ssq) / t2).epsilon(1e-14));
    CHECK(res.z == doctest::Approx(res.beta_hat / res.se).epsilon(1e-14));
    CHECK(res.p_value == doctest::Approx(two_sided_p(res.z)).epsilon(1e-12));
}

TEST_CASE("rivw is invariant to jointly flipping gamma and Gamma") {
    const std::vector<double> g = {0.9, 1.4, -0.6, 2.1};
    const std::vector<double> s2 = {0.04, 0.02, 0.05, 0.01};
    const std::vector<double> G = {0.5, 0.8, -0.2, 1.0};
    const std::vector<double> sy = {0.30, 0.25, 0.40, 0.20};
    const std::vector<double> sx = {0.20, 0.20, 0.25, 0.20};
    std::vector<double> gf(g), Gf(G);
    for (std::size_t j = 0; j < g.size(); ++j) {
        gf[j] = -gf[j];
        Gf[j] = -Gf[j];
    }
    const auto a = rivw_estimate(g, s2, G, sy, sx);
    const auto b = rivw_estimate(gf, s2, Gf, sy, sx);
    CHECK(a.beta_hat == doctest::Approx(b.beta_hat).epsilon(1e-14));
    CHECK(a.se == doctest::Approx(b.se).epsilon(1e-14));
    CHECK(a.kappa_hat == doctest::Approx(b.kappa_hat).epsilon(1e-14));
}

TEST_CASE("rivw failure modes") {
    const std::vector<double> one = {1.0};
    CHECK_THROWS_AS(rivw_estimate(one, one, one, one, one), InsufficientInstruments);
    // all IV strength eaten by the variance debias -> nonpositive denominator
    const std::vector<double> g = {0.1, -0.1};
    const std::vector<double> s2 = {1.0, 1.0};
    const std::vector<double> G = {0.0, 0.0};
    const std::vector<double> sy = {1.0, 1.0};
    const std::vector<double> sx = {1.0, 1.0};
    CHECK_THROWS_AS(rivw_estimate(g, s2, G, sy, sx), DegenerateDenominator);
}

TEST_CASE("pair-based overloads agree with the span-based core") {
    std::vector<HarmonizedPair> pairs(6);
    RngStream rng(55u, 0u);
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        pairs[j].gamma_hat = 0.012 * rng.next_normal();
        pairs[j].sigma_x = 0.0022;
        pairs[j].Gamma_hat = 0.5 * pairs[j].gamma_hat + 0.003 * rng.next_normal();
        pairs[j].sigma_y = 0.0031;
    }
    const RngStream sel(55u, 1u);
    const auto rec = rerandomized_select(pairs, cfg(), sel);

    std::vector<RBEstimate> rb;
    std::vector<double> g, s2, G, sy, sx;
    for (const auto& r : rec) {
        if (!r.selected) continue;
        rb.push_back(rao_blackwell(pairs[r.index].gamma_hat, pairs[r.index].sigma_x, cfg()));
        g.push_back(rb.back().gamma_rb);
        s2.push_back(rb.back().sigma2_rb);
        G.push_back(pairs[r.index].Gamma_hat);
        sy.push_back(pairs[r.index].sigma_y);
        sx.push_back(pairs[r.index].sigma_x);
    }
    if (g.size() >= 2) {
        const auto a = rivw_estimate(pairs, rec, rb);
        const auto b = rivw_estimate(g, s2, G, sy, sx);
        CHECK(a.beta_hat == b.beta_hat);
        CHECK(a.se == b.se);
        CHECK(a.n_selected == b.n_selected);
    }
}
