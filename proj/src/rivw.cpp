#include "pleio/rivw.hpp"

#include <cmath>

#include "pleio/stats.hpp"

namespace pleio {

std::vector<SelectionRecord> rerandomized_select(std::span<const double> gamma_hat,
                                                 std::span<const double> sigma_x,
                                                 const SelectionConfig& cfg,
                                                 const RngStream& stream) {
    if (cfg.lambda <= 0.0 || cfg.eta <= 0.0)
        throw ConfigError("rerandomized_select: lambda and eta must be positive");
    std::vector<SelectionRecord> records(gamma_hat.size());
    for (std::size_t j = 0; j < gamma_hat.size(); ++j) {
        SelectionRecord& r = records[j];
        r.index = j;
        r.z_noise = cfg.eta * stream.normal_at(j);
        r.s_value = std::fabs(gamma_hat[j] / sigma_x[j] + r.z_noise) - cfg.lambda;
        r.selected = r.s_value > 0.0;
    }
    return records;
}

std::vector<SelectionRecord> rerandomized_select(const std::vector<HarmonizedPair>& pairs,
                                                 const SelectionConfig& cfg,
                                                 const RngStream& stream) {
    std::vector<double> g(pairs.size()), s(pairs.size());
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        g[j] = pairs[j].gamma_hat;
        s[j] = pairs[j].sigma_x;
    }
    return rerandomized_select(g, s, cfg, stream);
}

RBEstimate rao_blackwell(double gamma_hat, double sigma_x, const SelectionConfig& cfg) {
    const double eta = cfg.eta;
    const double t = gamma_hat / (sigma_x * eta);
    const double a = cfg.lambda / eta;
    const double tau = std::fabs(t);
    const double sign = (t < 0.0) ? -1.0 : 1.0;

    RBEstimate rb;
    rb.a_plus = -t + a;
    rb.a_minus = -t - a;

    // r1 = [phi(A+) - phi(A-)] / D, r2 = [A+ phi(A+) - A- phi(A-)] / D,
    // with D = 1 - Phi(A+) + Phi(A-).
    double r1, r2;
    const double x = a - tau;
    if (x > 8.0) {
        // Deep interior of the non-selection region: both tails of D vanish,
        // so work with Mills ratios where the common phi(x) factor cancels.
        const double y = a + tau;
        const double e = std::exp(-2.0 * a * tau);
        const double denom = mills_ratio(x) + e * mills_ratio(y);
        r1 = sign * (1.0 - e) / denom;
        r2 = (x + e * y) / denom;
    } else {
        const double d = norm_sf(a - tau) + norm_sf(a + tau);
        if (d <= 0.0)
            throw NumericError("rao_blackwell: selection probability underflow at z = " +
                               std::to_string(gamma_hat / sigma_x));
        r1 = sign * (norm_pdf(a - tau) - norm_pdf(a + tau)) / d;
        r2 = ((a - tau) * norm_pdf(a - tau) + (a + tau) * norm_pdf(a + tau)) / d;
    }

    rb.gamma_rb = gamma_hat - (sigma_x / eta) * r1;
    rb.sigma2_rb = sigma_x * sigma_x * (1.0 - r2 / (eta * eta) + (r1 / eta) * (r1 / eta));
    return rb;
}

RivwResult rivw_estimate(std::span<const double> gamma_rb,
                         std::span<const double> sigma2_rb,
                         std::span<const double> Gamma_hat,
                         std::span<const double> sigma_y,
                         std::span<const double> sigma_x) {
    const std::size_t m = gamma_rb.size();
    if (m < 2)
        throw InsufficientInstruments("rivw_estimate: fewer than 2 selected instruments");

    double theta1 = 0.0, theta2 = 0.0, kappa = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double w = 1.0 / (sigma_y[j] * sigma_y[j]);
        const double g2 = gamma_rb[j] * gamma_rb[j] - sigma2_rb[j];
        theta1 += w * gamma_rb[j] * Gamma_hat[j];
        theta2 += w * g2;
        kappa += g2 / (sigma_x[j] * sigma_x[j]);
    }
    if (theta2 <= 0.0)
        throw DegenerateDenominator(
            "rivw_estimate: nonpositive denominator (IV strength too low)");

    RivwResult res;
    res.theta1 = theta1;
    res.theta2 = theta2;
    res.n_selected = m;
    res.beta_hat = theta1 / theta2;
    res.kappa_hat = kappa / static_cast<double>(m);

    double ssq = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double w2 = 1.0 / std::pow(sigma_y[j], 4);
        const double omega2 = gamma_rb[j] * Gamma_hat[j] -
                              res.beta_hat * (gamma_rb[j] * gamma_rb[j] - sigma2_rb[j]);
        ssq += w2 * omega2 * omega2;
    }
    res.se = std::sqrt(ssq) / theta2;
    res.z = (res.se > 0.0) ? res.beta_hat / res.se : 0.0;
    res.p_value = two_sided_p(res.z);
    return res;
}

RivwResult rivw_estimate(const std::vector<HarmonizedPair>& pairs,
                         const std::vector<SelectionRecord>& records,
                         const std::vector<RBEstimate>& rb) {
    std::vector<double> g, s2, G, sy, sx;
    std::size_t k = 0;
    for (const auto& rec : records) {
        if (!rec.selected) continue;
        const auto& p = pairs[rec.index];
        g.push_back(rb[k].gamma_rb);
        s2.push_back(rb[k].sigma2_rb);
        G.push_back(p.Gamma_hat);
        sy.push_back(p.sigma_y);
        sx.push_back(p.sigma_x);
        ++k;
    }
    return rivw_estimate(g, s2, G, sy, sx);
}

}  // namespace pleio
