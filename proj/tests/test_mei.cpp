#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "pleio/mei.hpp"
#include "pleio/rng.hpp"
#include "pleio/stats.hpp"

using namespace pleio;

namespace {

struct Data {
    std::vector<double> g, s2, G, sy, sx;
};

Data make_dataset(std::size_t m, RngStream& rng, double beta = 0.4) {
    Data d;
    d.g.resize(m);
    d.s2.resize(m);
    d.G.resize(m);
    d.sy.resize(m);
    d.sx.assign(m, 1.0);
    for (std::size_t j = 0; j < m; ++j) {
        d.g[j] = 3.0 + 2.0 * rng.next_uniform();
        if (rng.next_uniform() < 0.5) d.g[j] = -d.g[j];
        d.s2[j] = 0.5 + 0.5 * rng.next_uniform();
        d.sy[j] = 0.5 + rng.next_uniform();
        d.G[j] = beta * d.g[j] + d.sy[j] * rng.next_normal();
    }
    return d;
}

MeiResult fit(const Data& d, CodingScheme scheme) {
    const auto rivw = rivw_estimate(d.g, d.s2, d.G, d.sy, d.sx);
    return mei_statistic(d.g, d.s2, d.G, d.sy, rivw, scheme);
}

}  // namespace

TEST_CASE("matches a direct evaluation of its formulas") {
    const std::vector<double> g = {3.2, -4.1, 5.0, 3.9};
    const std::vector<double> s2 = {0.8, 0.9, 0.7, 1.1};
    const std::vector<double> G = {1.5, -1.2, 2.6, 1.0};
    const std::vector<double> sy = {0.9, 1.1, 0.8, 1.0};
    const std::vector<double> sx = {1.0, 1.0, 1.0, 1.0};
    const auto rivw = rivw_estimate(g, s2, G, sy, sx);
    const auto res = mei_statistic(g, s2, G, sy, rivw, CodingScheme::MajorAllele);

    double t1 = 0.0, t2 = 0.0, T = 0.0, swG = 0.0, corr = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double w = 1.0 / (sy[j] * sy[j]);
        t1 += w * g[j] * G[j];
        t2 += w * (g[j] * g[j] - s2[j]);
        T += w * g[j];
        swG += w * G[j];
        corr += w * w * s2[j] * G[j];
    }
    CHECK(res.lambda_r == doctest::Approx(t2 * swG - t1 * T).epsilon(1e-13));
    CHECK(res.lambda_rc == doctest::Approx(res.lambda_r + corr).epsilon(1e-13));

    const double beta = rivw.beta_hat;
    double v = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double u = (G[j] - beta * g[j]) * t2 -
                         (g[j] * G[j] - beta * (g[j] * g[j] - s2[j])) * T;
        CHECK(res.u_hat[j] == doctest::Approx(u).epsilon(1e-13));
        v += u * u / std::pow(sy[j], 4);
    }
    CHECK(res.v_hat == doctest::Approx(v).epsilon(1e-13));
    CHECK(res.z_me == doctest::Approx(res.lambda_rc / std::sqrt(v)).epsilon(1e-13));
    CHECK(res.p_value == doctest::Approx(two_sided_p(res.z_me)).epsilon(1e-12));
    CHECK(res.n_selected == 4);
    CHECK(res.beta_r_used == rivw.beta_hat);
}

TEST_CASE("all-zero outcome effects give the defined degenerate result") {
    const std::vector<double> g = {3.0, -4.0, 5.0};
    const std::vector<double> s2 = {0.5, 0.5, 0.5};
    const std::vector<double> G = {0.0, 0.0, 0.0};
    const std::vector<double> sy = {1.0, 1.0, 1.0};
    const std::vector<double> sx = {1.0, 1.0, 1.0};
    const auto rivw = rivw_estimate(g, s2, G, sy, sx);
    const auto res = mei_statistic(g, s2, G, sy, rivw, CodingScheme::NormalAllele);
    CHECK(res.z_me == 0.0);
    CHECK(res.p_value == 1.0);
    CHECK(res.lambda_rc == 0.0);
    CHECK(res.v_hat == 0.0);
}

TEST_CASE("jointly flipping every SNP negates the numerator, not the variance") {
    RngStream rng(901u, 0u);
    for (int c = 0; c < 20; ++c) {
        const Data d = make_dataset(8, rng);
        Data f = d;
        for (std::size_t j = 0; j < f.g.size(); ++j) {
            f.g[j] = -f.g[j];
            f.G[j] = -f.G[j];
        }
        const auto a = fit(d, CodingScheme::MajorAllele);
        const auto b = fit(f, CodingScheme::MajorAllele);
        CHECK(b.lambda_rc == doctest::Approx(-a.lambda_rc).epsilon(1e-11));
        CHECK(b.v_hat == doctest::Approx(a.v_hat).epsilon(1e-11));
        CHECK(b.z_me == doctest::Approx(-a.z_me).epsilon(1e-11));
        CHECK(b.p_value == doctest::Approx(a.p_value).epsilon(1e-10));
    }
}

TEST_CASE("alignment and size guards") {
    const std::vector<double> g = {3.0, -4.0, 5.0};
    const std::vector<double> s2 = {0.5, 0.5, 0.5};
    const std::vector<double> G = {1.0, -1.5, 2.0};
    const std::vector<double> sy = {1.0, 1.0, 1.0};
    const std::vector<double> sx = {1.0, 1.0, 1.0};
    auto rivw = rivw_estimate(g, s2, G, sy, sx);
    rivw.n_selected = 4;  // stale selection count
    CHECK_THROWS_AS(mei_statistic(g, s2, G, sy, rivw, CodingScheme::MajorAllele),
                    AlignmentError);
    rivw.n_selected = 2;
    const std::vector<double> two = {3.0, -4.0};
    CHECK_THROWS_AS(mei_statistic(two, two, two, two, rivw, CodingScheme::MajorAllele),
                    InsufficientInstruments);
}

TEST_CASE("combined test: identical arms collapse to one two-sided test") {
    RngStream rng(902u, 0u);
    const Data d = make_dataset(10, rng);
    const auto res = fit(d, CodingScheme::MajorAllele);
    auto twin = res;
    twin.scheme = CodingScheme::NormalAllele;
    const auto comb = combined_test(res, twin, d.sy);
    CHECK(comb.rho_mn == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(comb.z_combined == doctest::Approx(std::fabs(res.z_me)).epsilon(1e-14));
    CHECK(comb.p_value == doctest::Approx(two_sided_p(res.z_me)).epsilon(1e-12));
}

TEST_CASE("combined test: orthogonal arms behave like independent tests") {
    // u vectors supported on disjoint SNPs have zero cross moment
    MeiResult a, b;
    a.u_hat = {2.0, 0.0, 1.0, 0.0};
    b.u_hat = {0.0, 1.5, 0.0, -2.5};
    const std::vector<double> sy = {1.0, 1.0, 1.0, 1.0};
    a.v_hat = 5.0;
    b.v_hat = 8.5;
    a.z_me = 1.7;
    b.z_me = -2.3;
    const auto comb = combined_test(a, b, sy);
    CHECK(comb.rho_mn == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(comb.z_combined == doctest::Approx(2.3).epsilon(1e-14));
    const double inside = norm_cdf(2.3) - norm_cdf(-2.3);
    CHECK(comb.p_value == doctest::Approx(1.0 - inside * inside).epsilon(1e-8));
}

TEST_CASE("combined test: guards") {
    MeiResult a, b;
    a.u_hat = {1.0, 2.0};
    b.u_hat = {1.0, 2.0, 3.0};
    a.v_hat = b.v_hat = 1.0;
    const std::vector<double> sy2 = {1.0, 1.0};
    CHECK_THROWS_AS(combined_test(a, b, sy2), AlignmentError);
    b.u_hat = {0.0, 0.0};
    b.v_hat = 0.0;
    CHECK_THROWS_AS(combined_test(a, b, sy2), DegenerateVariance);
}

TEST_CASE("combined p-value is sandwiched between the per-arm bounds") {
    // With z = max(|z_M|, |z_N|): the joint exceedance probability always
    // dominates the single-arm tail at z and never exceeds the union bound.
    RngStream rng(903u, 0u);
    int cases = 0;
    while (cases < 220) {
        const std::size_t m = 4 + static_cast<std::size_t>(8 * rng.next_uniform());
        const Data d = make_dataset(m, rng, 0.2 + 0.6 * rng.next_uniform());
        Data n = d;  // re-orient a random subset to decorrelate the two arms
        for (std::size_t j = 0; j < m; ++j) {
            if (n.g[j] < 0.0) {
                n.g[j] = -n.g[j];
                n.G[j] = -n.G[j];
            }
        }
        MeiResult rm, rn;
        try {
            rm = fit(d, CodingScheme::MajorAllele);
            rn = fit(n, CodingScheme::NormalAllele);
        } catch (const DegenerateDenominator&) {
            continue;
        }
        const auto comb = combined_test(rm, rn, d.sy);
        CHECK(std::fabs(comb.rho_mn) <= 1.0);
        CHECK(comb.z_combined ==
              std::max(std::fabs(comb.z_major), std::fabs(comb.z_normal)));
        const double single = two_sided_p(comb.z_combined);
        CHECK(comb.p_value >= single - 1e-9);
        CHECK(comb.p_value <= std::min(1.0, 2.0 * single) + 1e-9);
        CHECK(comb.p_value <= std::min(1.0, rm.p_value + rn.p_value) + 1e-9);
        ++cases;
    }
}

TEST_CASE("h1 diagnostic: exact zeros and moment recovery") {
    const std::vector<double> sy = {1.0, 0.5, 2.0, 1.0};

    // no pleiotropy at all
    const std::vector<double> g = {3.0, 4.0, 5.0, 6.0};
    const std::vector<double> zero = {0.0, 0.0, 0.0, 0.0};
    CHECK(h1_expected_numerator(g, zero, sy).expected_numerator ==
          doctest::Approx(0.0).epsilon(1e-14));

    // constant instrument effects carry no leverage
    const std::vector<double> cg = {4.0, 4.0, 4.0, 4.0};
    const std::vector<double> a = {0.1, -0.2, 0.3, 0.0};
    CHECK(h1_expected_numerator(cg, a, sy).expected_numerator ==
          doctest::Approx(0.0).epsilon(1e-14));

    // generic case against a manual moment computation
    const std::vector<double> ga = {0.05, -0.1, 0.2, 0.15};
    const auto d = h1_expected_numerator(g, ga, sy);
    const double mg = (3.0 + 4.0 + 5.0 + 6.0) / 4.0;
    const double ma = (0.05 - 0.1 + 0.2 + 0.15) / 4.0;
    double vg = 0.0, cov = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
        vg += (g[j] - mg) * (g[j] - mg);
        cov += (g[j] - mg) * (ga[j] - ma);
    }
    vg /= 4.0;
    cov /= 4.0;
    double sw = 0.0, sw2 = 0.0;
    for (double s : sy) {
        sw += 1.0 / (s * s);
        sw2 += 1.0 / (s * s * s * s);
    }
    CHECK(d.mu_gamma_sel == doctest::Approx(mg).epsilon(1e-14));
    CHECK(d.mu_alpha_sel == doctest::Approx(ma).epsilon(1e-14));
    CHECK(d.tau_gamma_sel == doctest::Approx(std::sqrt(vg)).epsilon(1e-14));
    CHECK(d.expected_numerator ==
          doctest::Approx((sw * sw - sw2) * (ma * vg - mg * cov)).epsilon(1e-12));

    const std::vector<double> one = {1.0};
    CHECK_THROWS_AS(h1_expected_numerator(one, one, one), ValidationError);
    const std::vector<double> three = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(h1_expected_numerator(three, three, sy), ValidationError);
}
